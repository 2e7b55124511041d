#include "ipd/attributes.hpp"

#include "ipd/curvature.hpp"
#include "ipd/parallel.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <sstream>

namespace ipd {

std::vector<Neighbor> knn_excluding(const KdTree& tree, const Eigen::MatrixX3d& points,
                                    int center, int k) {
    std::vector<Neighbor> nn = tree.knn(points.row(center), k + 1);
    std::vector<Neighbor> out;
    out.reserve(k);
    for (const Neighbor& nb : nn)
        if (nb.index != center) out.push_back(nb);
    if (int(out.size()) > k) out.resize(k);
    return out;
}

Eigen::Matrix3d scatter_matrix(const Eigen::MatrixX3d& points, int v,
                               const std::vector<Neighbor>& nu) {
    Eigen::Matrix3d S = Eigen::Matrix3d::Zero();
    if (nu.empty()) return S;
    double tau = 0.0;
    for (const Neighbor& nb : nu) tau = std::max(tau, nb.dist);
    if (tau <= 0.0) return S;
    const double inv_var = 2.0 / (tau * tau);  // 1 / (tau^2 / 2)
    Eigen::RowVector3d p = points.row(v);
    for (const Neighbor& nb : nu) {
        if (nb.dist <= 0.0) continue;
        Eigen::Vector3d d = points.row(nb.index) - p;
        double d2 = d.squaredNorm();
        if (d2 <= 0.0) continue;
        S += std::exp(-d2 * inv_var) / d2 * (d * d.transpose());
    }
    return S;
}

Eigen::Vector3d scatter_spectrum(const Eigen::Matrix3d& S) {
    Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(S, Eigen::EigenvaluesOnly);
    Eigen::Vector3d lambda = eig.eigenvalues();  // ascending
    // S is PSD by construction; tiny negatives are roundoff
    return lambda.cwiseMax(0.0);
}

Eigen::Matrix<double, 5, 1> eigen_features(const Eigen::Vector3d& lambda) {
    const double l1 = lambda[0], l2 = lambda[1], l3 = lambda[2];
    Eigen::Matrix<double, 5, 1> f;
    if (l3 <= 0.0) {
        f[0] = f[1] = f[2] = 1.0;
    } else if (l2 <= 0.0) {
        f[0] = 1.0;
        f[1] = l1 / l3;
        f[2] = l2 / l3;
    } else {
        f[0] = l1 / l2;
        f[1] = l1 / l3;
        f[2] = l2 / l3;
    }
    f[3] = l2 - l1;
    f[4] = l3 - l2;
    return f;
}

namespace {

// Neighborhood weights for one (vertex, radius) pair; shared by the public
// average and the batched DoG pass so both sum in the same order.
struct BallWeights {
    std::vector<int> index;
    std::vector<double> weight;
    double total = 0.0;
};

BallWeights ball_weights(const Eigen::MatrixX3d& points, const KdTree& tree, int v,
                         double rho) {
    BallWeights out;
    out.index = tree.radius_indices(points.row(v), rho);
    out.weight.reserve(out.index.size());
    const double inv_var = 1.0 / (2.0 * rho * rho);
    Eigen::RowVector3d p = points.row(v);
    for (int i : out.index) {
        double w = std::exp(-(points.row(i) - p).squaredNorm() * inv_var);
        out.weight.push_back(w);
        out.total += w;
    }
    return out;
}

double weighted_mean(const BallWeights& bw, const Eigen::Ref<const Eigen::VectorXd>& field) {
    double sum = 0.0;
    for (std::size_t i = 0; i < bw.index.size(); ++i)
        sum += bw.weight[i] * field[bw.index[i]];
    return sum / bw.total;
}

TriMesh normalized_copy(const TriMesh& mesh) {
    if (mesh.diameter <= 0.0)
        throw MeshError("attribute extraction needs a mesh with positive diameter");
    TriMesh out = mesh;
    out.vertices /= mesh.diameter;
    out.diameter = 1.0;
    return out;
}

} // namespace

double gaussian_weighted_average(const Eigen::MatrixX3d& points, const KdTree& tree,
                                 int v, double rho, const Eigen::VectorXd& field) {
    return weighted_mean(ball_weights(points, tree, v, rho), field);
}

AttributeMatrix extract_all(const TriMesh& mesh, const std::string& model,
                            const ExtractOptions& opts) {
    const int nv = mesh.vertex_count();
    AttributeMatrix out;
    out.model = model;
    out.values.setZero(nv, kAttributeCount);
    out.flags.assign(nv, 0);
    out.diameter = mesh.diameter;
    out.delta = opts.delta_fraction * mesh.diameter;
    out.neighbors = opts.neighbors;
    if (nv == 0) return out;

    const TriMesh norm = normalized_copy(mesh);
    const KdTree tree(norm.vertices);
    const VertexNormals normals = vertex_normals(norm);
    const CurvatureResult curv = principal_curvatures(norm, normals);

    Eigen::VectorXd mean_curv(nv);
    parallel_for(nv, opts.jobs, [&](int v) {
        std::uint32_t flags = 0;
        auto nu = knn_excluding(tree, norm.vertices, v, opts.neighbors);
        if (int(nu.size()) < opts.neighbors) flags |= kFlagShortNeighborhood;
        const double tau = nu.empty() ? 0.0 : nu.back().dist;

        Eigen::Matrix3d S = scatter_matrix(norm.vertices, v, nu);
        if (tau <= 0.0) flags |= kFlagZeroTau;
        if (S.isZero(0.0)) flags |= kFlagDegenerateScatter;
        out.values.block<1, 5>(v, 0) = eigen_features(scatter_spectrum(S)).transpose();

        if (tau > 0.0)
            out.values(v, 5) =
                double(nu.size()) / (4.0 / 3.0 * std::numbers::pi * tau * tau * tau);

        if (!normals.valid[v]) {
            flags |= kFlagZeroNormal;
        } else {
            double dot_sum = 0.0;
            int used = 0;
            Eigen::RowVector3d n = normals.normals.row(v);
            for (const Neighbor& nb : nu) {
                if (!normals.valid[nb.index]) continue;
                dot_sum += n.dot(normals.normals.row(nb.index));
                ++used;
            }
            if (used > 0) out.values(v, 6) = dot_sum / used;
        }

        if (curv.deficient[v]) flags |= kFlagDeficientRing;
        out.values(v, 7) = curv.principal[v].k1;
        out.values(v, 8) = curv.principal[v].k2;
        out.values(v, 9) = out.values(v, 7) * out.values(v, 8);
        mean_curv[v] = 0.5 * (out.values(v, 7) + out.values(v, 8));
        out.flags[v] = flags;
    });

    // DoG columns: for each scale pair, ten basic-attribute DoGs then the
    // mean-curvature DoG. Scales live in normalized units (diameter 1).
    const double d0 = opts.delta_fraction;
    const double scale_pair[3][2] = {{d0, 2 * d0}, {2 * d0, 4 * d0}, {4 * d0, 6 * d0}};
    Eigen::MatrixXd dog_fields(nv, 11);
    dog_fields.leftCols<10>() = out.values.leftCols<10>();
    dog_fields.col(10) = mean_curv;
    parallel_for(nv, opts.jobs, [&](int v) {
        for (int p = 0; p < 3; ++p) {
            BallWeights fine = ball_weights(norm.vertices, tree, v, scale_pair[p][0]);
            BallWeights coarse = ball_weights(norm.vertices, tree, v, scale_pair[p][1]);
            for (int j = 0; j < 11; ++j)
                out.values(v, 10 + 11 * p + j) =
                    std::abs(weighted_mean(coarse, dog_fields.col(j)) -
                             weighted_mean(fine, dog_fields.col(j)));
        }
    });
    return out;
}

void write_attributes_csv(const AttributeMatrix& m, std::ostream& out) {
    char buf[64];
    auto fmt = [&](double x) {
        std::snprintf(buf, sizeof buf, "%.17g", x);
        return std::string(buf);
    };
    out << "# ipd-attributes v1 delta=" << fmt(m.delta) << " diameter="
        << fmt(m.diameter) << " neighbors=" << m.neighbors << " model=" << m.model
        << '\n';
    out << "vertex";
    for (int j = 1; j <= kAttributeCount; ++j) out << ",F" << j;
    out << ",flags\n";
    for (int v = 0; v < m.vertex_count(); ++v) {
        out << v;
        for (int j = 0; j < kAttributeCount; ++j) out << ',' << fmt(m.values(v, j));
        out << ',' << m.flags[v] << '\n';
    }
}

AttributeMatrix read_attributes_csv(std::istream& in) {
    std::string line;
    int line_no = 1;
    if (!std::getline(in, line)) throw ParseError("empty attribute file", 0);
    const std::string magic = "# ipd-attributes v1 ";
    if (line.rfind(magic, 0) != 0)
        throw ParseError("not an ipd-attributes v1 file", line_no);

    AttributeMatrix m;
    try {
        std::string meta = line.substr(magic.size());
        auto grab = [&](const std::string& key) {
            auto pos = meta.find(key + "=");
            if (pos == std::string::npos)
                throw ParseError("missing " + key + " in attribute header", 1);
            return pos + key.size() + 1;
        };
        m.delta = std::stod(meta.substr(grab("delta")));
        m.diameter = std::stod(meta.substr(grab("diameter")));
        m.neighbors = std::stoi(meta.substr(grab("neighbors")));
        m.model = meta.substr(grab("model"));  // model is last; may contain spaces
    } catch (const std::invalid_argument&) {
        throw ParseError("malformed number in attribute header", 1);
    } catch (const std::out_of_range&) {
        throw ParseError("number out of range in attribute header", 1);
    }

    if (!std::getline(in, line)) throw ParseError("missing attribute column header", 1);
    ++line_no;
    {
        std::string expect = "vertex";
        for (int j = 1; j <= kAttributeCount; ++j) expect += ",F" + std::to_string(j);
        expect += ",flags";
        if (line != expect) throw ParseError("unexpected attribute columns", line_no);
    }

    std::vector<std::array<double, kAttributeCount>> rows;
    std::vector<std::uint32_t> flags;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            std::istringstream ls(line);
            std::string cell;
            if (!std::getline(ls, cell, ','))
                throw ParseError("malformed attribute row", line_no);
            if (std::stol(cell) != long(rows.size()))
                throw ParseError("vertex ids must be consecutive from 0", line_no);
            std::array<double, kAttributeCount> row;
            for (int j = 0; j < kAttributeCount; ++j) {
                if (!std::getline(ls, cell, ','))
                    throw ParseError("attribute row too short", line_no);
                row[j] = std::stod(cell);
            }
            if (!std::getline(ls, cell, ','))
                throw ParseError("attribute row missing flags", line_no);
            rows.push_back(row);
            flags.push_back(std::uint32_t(std::stoul(cell)));
        } catch (const std::invalid_argument&) {
            throw ParseError("malformed number in attribute row", line_no);
        } catch (const std::out_of_range&) {
            throw ParseError("number out of range in attribute row", line_no);
        }
    }

    m.values.resize(long(rows.size()), kAttributeCount);
    for (std::size_t v = 0; v < rows.size(); ++v)
        for (int j = 0; j < kAttributeCount; ++j) m.values(long(v), j) = rows[v][j];
    m.flags = std::move(flags);
    return m;
}

void write_attributes_file(const AttributeMatrix& m, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw MeshError("cannot write attribute file: " + path);
    write_attributes_csv(m, out);
    if (!out) throw MeshError("failed writing attribute file: " + path);
}

AttributeMatrix read_attributes_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MeshError("cannot open attribute file: " + path);
    try {
        return read_attributes_csv(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), e.line);
    }
}

} // namespace ipd
