#include "ipd/curvature.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>

namespace ipd {

namespace {

double face_area(const TriMesh& mesh, int f) {
    Eigen::Vector3d a = mesh.vertices.row(mesh.faces(f, 0));
    Eigen::Vector3d b = mesh.vertices.row(mesh.faces(f, 1));
    Eigen::Vector3d c = mesh.vertices.row(mesh.faces(f, 2));
    return 0.5 * (b - a).cross(c - a).norm();
}

bool face_has(const TriMesh& mesh, int f, int v) {
    return mesh.faces(f, 0) == v || mesh.faces(f, 1) == v || mesh.faces(f, 2) == v;
}

} // namespace

CurvatureResult principal_curvatures(const TriMesh& mesh,
                                     const VertexNormals& normals) {
    const int nv = mesh.vertex_count();
    CurvatureResult out;
    out.principal.assign(nv, {});
    out.deficient.assign(nv, 0);

    for (int v = 0; v < nv; ++v) {
        const auto& ring = mesh.ring[v];
        if (int(ring.size()) < 3 || !normals.valid[v]) {
            out.deficient[v] = 1;
            continue;
        }
        Eigen::Vector3d p = mesh.vertices.row(v);
        Eigen::Vector3d n = normals.normals.row(v);

        struct Term {
            Eigen::Vector3d tangent;
            double kappa;
            double weight;
        };
        std::vector<Term> terms;
        terms.reserve(ring.size());
        double weight_sum = 0.0;
        for (int u : ring) {
            Eigen::Vector3d d = mesh.vertices.row(u).transpose() - p;
            double d2 = d.squaredNorm();
            if (d2 <= 0.0) continue;
            Eigen::Vector3d t = d - n * n.dot(d);
            double tlen = t.norm();
            if (tlen <= 1e-14) continue;  // edge parallel to the normal
            double w = 0.0;
            for (int f : mesh.vertex_faces[v])
                if (face_has(mesh, f, u)) w += face_area(mesh, f);
            terms.push_back({t / tlen, -2.0 * n.dot(d) / d2, w});
            weight_sum += w;
        }
        if (int(terms.size()) < 3) {
            out.deficient[v] = 1;
            continue;
        }
        if (weight_sum <= 0.0) {
            // all incident faces degenerate; fall back to uniform weights
            for (auto& t : terms) t.weight = 1.0;
            weight_sum = double(terms.size());
        }

        Eigen::Matrix3d M = Eigen::Matrix3d::Zero();
        for (const auto& t : terms)
            M += (t.weight / weight_sum) * t.kappa * (t.tangent * t.tangent.transpose());

        Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> eig(M);
        int normal_slot = 0;
        double best = -1.0;
        for (int i = 0; i < 3; ++i) {
            double a = std::abs(eig.eigenvectors().col(i).dot(n));
            if (a > best) {
                best = a;
                normal_slot = i;
            }
        }
        double m[2];
        int j = 0;
        for (int i = 0; i < 3; ++i)
            if (i != normal_slot) m[j++] = eig.eigenvalues()[i];
        double mp = std::max(m[0], m[1]);
        double mq = std::min(m[0], m[1]);
        out.principal[v] = {3.0 * mp - mq, 3.0 * mq - mp};
    }
    return out;
}

} // namespace ipd
