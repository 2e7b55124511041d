#pragma once

#include "ipd/mesh.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace ipd {

struct ClickTarget {
    int vertex = -1;  // >= 0 when the click names a vertex directly
    Eigen::Vector3d point = Eigen::Vector3d::Zero();  // otherwise a free 3D point
};

struct ClickSet {
    std::string model;
    std::vector<std::string> subject_ids;  // distinct
    std::vector<std::vector<ClickTarget>> subject_clicks;
};

struct GroundTruthPoint {
    int vertex = -1;
    int support = 0;  // clicks backing this representative
};

struct GroundTruth {
    std::string model;
    double sigma = 0.0;
    int consensus = 0;  // n
    std::vector<GroundTruthPoint> points;  // ascending vertex id
};

// Clusters clicks into ground-truth interest points:
//   1. snap free points to the nearest vertex (rejecting clicks farther than
//      10% of the diameter outside the bounding box, with a warning),
//   2. drop a subject's repeat clicks on one vertex,
//   3. connected components of the click graph with edges where geodesic
//      distance < 2 sigma d_M; components with fewer than n clicks dropped,
//   4. representative = medoid click (ties to the lower vertex id),
//   5. merge representatives closer than 2 sigma d_M to a fixed point.
// sigma must lie in (0, 0.1], n >= 1, and the click set must be nonempty.
GroundTruth cluster_clicks(const TriMesh& mesh, const ClickSet& clicks, double sigma,
                           int n, std::vector<std::string>* warnings = nullptr);

struct Representative {
    int vertex = -1;
    int support = 0;
    double medoid_cost = 0.0;
};

// The fixed-point merge step of cluster_clicks, exposed for direct testing:
// repeatedly take the closest pair under the threshold (ties by vertex ids)
// and keep the higher-support member (ties by medoid cost, then vertex id),
// adding the supports. distances(i, j) indexes the reps vector.
std::vector<Representative> merge_representatives(std::vector<Representative> reps,
                                                  const Eigen::MatrixXd& distances,
                                                  double threshold);

ClickSet read_clicks(std::istream& in);
ClickSet read_clicks_file(const std::string& path);
void write_clicks(const ClickSet& clicks, std::ostream& out);

GroundTruth read_ground_truth(std::istream& in);
GroundTruth read_ground_truth_file(const std::string& path);
void write_ground_truth(const GroundTruth& gt, std::ostream& out);
void write_ground_truth_file(const GroundTruth& gt, const std::string& path);

} // namespace ipd
