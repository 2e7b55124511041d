#pragma once

#include "ipd/mesh.hpp"

#include <vector>

namespace ipd {

// Shortest path distances along mesh edges (Dijkstra). Unreachable vertices
// get +infinity. Throws MeshError when sources is empty or holds an index
// outside the mesh.
std::vector<double> geodesic_distances(const TriMesh& mesh,
                                       const std::vector<int>& sources);

inline std::vector<double> geodesic_distances(const TriMesh& mesh, int source) {
    return geodesic_distances(mesh, std::vector<int>{source});
}

// Pairwise distances among a vertex subset, row i = distances from subset[i].
// Runs one Dijkstra per subset vertex.
Eigen::MatrixXd geodesic_pairwise(const TriMesh& mesh, const std::vector<int>& subset);

} // namespace ipd
