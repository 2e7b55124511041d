#include "ipd/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace ipd {

namespace {
constexpr int kLeafSize = 16;
}

KdTree::KdTree(const Eigen::MatrixX3d& points) : points_(points) {
    const int n = int(points_.rows());
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0);
    if (n > 0) {
        nodes_.reserve(std::size_t(2 * n / kLeafSize + 8));
        root_ = build(0, n);
    }
}

int KdTree::build(int begin, int end) {
    const int id = int(nodes_.size());
    nodes_.push_back({});
    if (end - begin <= kLeafSize) {
        std::sort(order_.begin() + begin, order_.begin() + end);
        nodes_[id].left = begin;
        nodes_[id].right = end;
        return id;
    }

    Eigen::Vector3d lo = points_.row(order_[begin]);
    Eigen::Vector3d hi = lo;
    for (int i = begin + 1; i < end; ++i) {
        lo = lo.cwiseMin(points_.row(order_[i]).transpose());
        hi = hi.cwiseMax(points_.row(order_[i]).transpose());
    }
    int axis = 0;
    (hi - lo).maxCoeff(&axis);

    const int mid = begin + (end - begin) / 2;
    std::nth_element(order_.begin() + begin, order_.begin() + mid, order_.begin() + end,
                     [&](int a, int b) {
                         double ca = points_(a, axis), cb = points_(b, axis);
                         return ca != cb ? ca < cb : a < b;
                     });

    nodes_[id].axis = axis;
    nodes_[id].split = points_(order_[mid], axis);
    const int left = build(begin, mid);
    const int right = build(mid, end);
    nodes_[id].left = left;
    nodes_[id].right = right;
    return id;
}

std::vector<Neighbor> KdTree::knn(const Eigen::Vector3d& query, int k) const {
    std::vector<Neighbor> out;
    if (k <= 0 || root_ < 0) return out;
    std::priority_queue<HeapEntry> heap;  // top = current worst (dist2, index)
    knn_walk(root_, query, std::size_t(k), heap);
    out.resize(heap.size());
    for (int i = int(heap.size()) - 1; i >= 0; --i) {
        out[i] = {heap.top().second, std::sqrt(heap.top().first)};
        heap.pop();
    }
    return out;
}

void KdTree::knn_walk(int id, const Eigen::Vector3d& q, std::size_t k,
                      std::priority_queue<HeapEntry>& heap) const {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
        for (int i = node.left; i < node.right; ++i) {
            int p = order_[i];
            HeapEntry e{(points_.row(p).transpose() - q).squaredNorm(), p};
            if (heap.size() < k) {
                heap.push(e);
            } else if (e < heap.top()) {
                heap.pop();
                heap.push(e);
            }
        }
        return;
    }
    double diff = q[node.axis] - node.split;
    int near = diff < 0 ? node.left : node.right;
    int far = diff < 0 ? node.right : node.left;
    knn_walk(near, q, k, heap);
    // <= so an equal-distance, lower-index point across the plane still wins
    if (heap.size() < k || diff * diff <= heap.top().first) knn_walk(far, q, k, heap);
}

std::vector<int> KdTree::radius_indices(const Eigen::Vector3d& query,
                                        double radius) const {
    std::vector<int> out;
    if (root_ < 0 || radius < 0.0) return out;
    radius_walk(root_, query, radius, radius * radius, out);
    std::sort(out.begin(), out.end());
    return out;
}

void KdTree::radius_walk(int id, const Eigen::Vector3d& q, double radius, double r2,
                         std::vector<int>& out) const {
    const Node& node = nodes_[id];
    if (node.axis < 0) {
        for (int i = node.left; i < node.right; ++i) {
            int p = order_[i];
            if ((points_.row(p).transpose() - q).squaredNorm() <= r2) out.push_back(p);
        }
        return;
    }
    double diff = q[node.axis] - node.split;
    if (diff <= radius) radius_walk(node.left, q, radius, r2, out);
    if (-diff <= radius) radius_walk(node.right, q, radius, r2, out);
}

} // namespace ipd
