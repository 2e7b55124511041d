#pragma once

#include "ipd/mesh.hpp"

#include <cstdint>
#include <vector>

namespace ipd {

struct CurvaturePair {
    double k1 = 0.0;  // k1 >= k2; positive on convex regions under outward normals
    double k2 = 0.0;
};

struct CurvatureResult {
    std::vector<CurvaturePair> principal;
    std::vector<std::uint8_t> deficient;  // 1 where the one-ring cannot support a tensor
};

// Principal curvatures from the one-ring tensor
//   M(v) = sum_i w_i * kappa_i * T_i T_i^T,
// kappa_i = 2 n·(v - x_i) / |x_i - v|^2, T_i the unit tangent-plane projection
// of x_i - v, w_i proportional to the area of faces incident to edge (v, x_i).
// The eigenvector closest to n is discarded; the remaining eigenvalues
// m_p >= m_q give k1 = 3 m_p - m_q and k2 = 3 m_q - m_p. Vertices with fewer
// than 3 ring neighbors or no valid normal get zeros and a deficient flag.
CurvatureResult principal_curvatures(const TriMesh& mesh, const VertexNormals& normals);

} // namespace ipd
