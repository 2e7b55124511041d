#pragma once

#include "ipd/kdtree.hpp"
#include "ipd/mesh.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace ipd {

inline constexpr int kAttributeCount = 43;

enum AttributeFlag : std::uint32_t {
    kFlagShortNeighborhood = 1u << 0,  // fewer neighbors than requested
    kFlagDeficientRing = 1u << 1,      // curvature tensor unavailable
    kFlagZeroNormal = 1u << 2,         // vertex normal undefined
    kFlagZeroTau = 1u << 3,            // all neighbors coincide with the vertex
    kFlagDegenerateScatter = 1u << 4,  // scatter matrix collapsed to zero
};

struct AttributeMatrix {
    std::string model;
    Eigen::MatrixXd values;  // one row per vertex, columns F1..F43
    std::vector<std::uint32_t> flags;
    double delta = 0.0;     // base DoG scale in mesh units (fraction * diameter)
    double diameter = 0.0;  // original mesh diameter
    int neighbors = 0;      // requested |nu(v)|

    int vertex_count() const { return int(values.rows()); }
};

struct ExtractOptions {
    int neighbors = 100;
    double delta_fraction = 0.003;  // delta as a fraction of the diameter
    int jobs = 1;
};

// k nearest to points.row(center), excluding the center index itself.
std::vector<Neighbor> knn_excluding(const KdTree& tree, const Eigen::MatrixX3d& points,
                                    int center, int k);

// S(v) = sum over nu of exp(-|x-v|^2 / (tau^2/2)) (x-v)(x-v)^T / |x-v|^2,
// tau = distance to the farthest member of nu. Zero-distance members are
// skipped; an all-coincident neighborhood gives the zero matrix.
Eigen::Matrix3d scatter_matrix(const Eigen::MatrixX3d& points, int v,
                               const std::vector<Neighbor>& nu);

// Eigenvalues of a scatter matrix, ascending, with tiny negative roundoff
// clamped to zero.
Eigen::Vector3d scatter_spectrum(const Eigen::Matrix3d& S);

// F1 = l1/l2, F2 = l1/l3, F3 = l2/l3, F4 = l2-l1, F5 = l3-l2. A fully
// degenerate spectrum (l3 = 0) gives F1=F2=F3=1; l2 = 0 alone gives F1=1.
Eigen::Matrix<double, 5, 1> eigen_features(const Eigen::Vector3d& lambda);

// G_{rho}(v): Gaussian-weighted mean of field over vertices within rho of v,
// weight exp(-|x-v|^2 / (2 rho^2)). The ball includes v itself.
double gaussian_weighted_average(const Eigen::MatrixX3d& points, const KdTree& tree,
                                 int v, double rho, const Eigen::VectorXd& field);

// Full 43-column extraction. Coordinates are divided by the mesh diameter
// first, so the result is invariant to rigid motion and uniform scale.
AttributeMatrix extract_all(const TriMesh& mesh, const std::string& model,
                            const ExtractOptions& opts = {});

void write_attributes_csv(const AttributeMatrix& m, std::ostream& out);
AttributeMatrix read_attributes_csv(std::istream& in);
void write_attributes_file(const AttributeMatrix& m, const std::string& path);
AttributeMatrix read_attributes_file(const std::string& path);

} // namespace ipd
