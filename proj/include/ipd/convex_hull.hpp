#pragma once

#include <Eigen/Core>

#include <vector>

namespace ipd {

// Indices of the points spanning the convex hull (a superset containing all
// true hull vertices; duplicates removed). Degenerate inputs fall back to a
// lower-dimensional hull or, as a last resort, to all distinct points.
std::vector<int> convex_hull_vertices(const Eigen::MatrixX3d& points);

} // namespace ipd
