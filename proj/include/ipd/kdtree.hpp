#pragma once

#include <Eigen/Dense>

#include <queue>
#include <utility>
#include <vector>

namespace ipd {

struct Neighbor {
    int index;
    double dist;
};

// Exact nearest-neighbor queries with deterministic ordering: knn sorts by
// (distance, index) ascending, radius queries return ascending indices and
// include points exactly at the boundary. Results do not depend on tree
// layout, so two trees over the same cloud answer identically.
class KdTree {
public:
    explicit KdTree(const Eigen::MatrixX3d& points);

    // The k nearest points to query (fewer when the cloud is smaller).
    std::vector<Neighbor> knn(const Eigen::Vector3d& query, int k) const;

    // All points with distance <= radius.
    std::vector<int> radius_indices(const Eigen::Vector3d& query, double radius) const;

    int size() const { return int(points_.rows()); }

private:
    struct Node {
        double split = 0.0;
        int axis = -1;  // -1 marks a leaf
        int left = -1;  // children, or [begin, end) into order_ at a leaf
        int right = -1;
    };

    using HeapEntry = std::pair<double, int>;  // (squared distance, index)

    int build(int begin, int end);
    void knn_walk(int id, const Eigen::Vector3d& q, std::size_t k,
                  std::priority_queue<HeapEntry>& heap) const;
    void radius_walk(int id, const Eigen::Vector3d& q, double radius, double r2,
                     std::vector<int>& out) const;

    Eigen::MatrixX3d points_;
    std::vector<int> order_;
    std::vector<Node> nodes_;
    int root_ = -1;
};

} // namespace ipd
