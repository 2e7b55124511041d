#include "support/fixtures.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <numeric>
#include <utility>

namespace ipd {

namespace {

TriMesh to_mesh(const std::vector<Eigen::Vector3d>& verts,
                const std::vector<std::array<int, 3>>& faces) {
    Eigen::MatrixX3d V(verts.size(), 3);
    for (std::size_t i = 0; i < verts.size(); ++i) V.row(long(i)) = verts[i];
    Eigen::MatrixX3i F(faces.size(), 3);
    for (std::size_t i = 0; i < faces.size(); ++i)
        F.row(long(i)) << faces[i][0], faces[i][1], faces[i][2];
    return build_mesh(V, F);
}

// Unit icosphere as raw vertex directions plus faces; callers scale.
void icosphere_raw(int level, std::vector<Eigen::Vector3d>& verts,
                   std::vector<std::array<int, 3>>& faces) {
    const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
    verts = {{-1, phi, 0},  {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0},
             {0, -1, phi},  {0, 1, phi},  {0, -1, -phi}, {0, 1, -phi},
             {phi, 0, -1},  {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1}};
    for (auto& v : verts) v.normalize();
    faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
    for (int l = 0; l < level; ++l) {
        std::map<std::pair<int, int>, int> midpoint;
        auto mid = [&](int a, int b) {
            auto key = std::minmax(a, b);
            auto it = midpoint.find(key);
            if (it != midpoint.end()) return it->second;
            verts.push_back((verts[std::size_t(a)] + verts[std::size_t(b)]).normalized());
            int id = int(verts.size()) - 1;
            midpoint.emplace(key, id);
            return id;
        };
        std::vector<std::array<int, 3>> next;
        next.reserve(faces.size() * 4);
        for (const auto& f : faces) {
            int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({f[1], bc, ab});
            next.push_back({f[2], ca, bc});
            next.push_back({ab, bc, ca});
        }
        faces = std::move(next);
    }
}

} // namespace

TriMesh make_icosphere(int level, double radius) {
    std::vector<Eigen::Vector3d> verts;
    std::vector<std::array<int, 3>> faces;
    icosphere_raw(level, verts, faces);
    for (auto& v : verts) v *= radius;
    return to_mesh(verts, faces);
}

TriMesh make_plane_grid(int nx, int ny, double spacing) {
    std::vector<Eigen::Vector3d> verts;
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i)
            verts.push_back({i * spacing, j * spacing, 0.0});
    std::vector<std::array<int, 3>> faces;
    for (int j = 0; j + 1 < ny; ++j)
        for (int i = 0; i + 1 < nx; ++i) {
            int a = j * nx + i, b = a + 1, c = a + nx, d = c + 1;
            faces.push_back({a, b, d});
            faces.push_back({a, d, c});
        }
    return to_mesh(verts, faces);
}

TriMesh make_cylinder(int segments, int rows, double radius, double height) {
    std::vector<Eigen::Vector3d> verts;
    for (int j = 0; j < rows; ++j) {
        double z = -height / 2 + height * j / (rows - 1);
        for (int i = 0; i < segments; ++i) {
            double a = 2.0 * M_PI * i / segments;
            verts.push_back({radius * std::cos(a), radius * std::sin(a), z});
        }
    }
    std::vector<std::array<int, 3>> faces;
    for (int j = 0; j + 1 < rows; ++j)
        for (int i = 0; i < segments; ++i) {
            int i2 = (i + 1) % segments;
            int a = j * segments + i, b = j * segments + i2;
            int c = a + segments, d = b + segments;
            faces.push_back({a, b, d});
            faces.push_back({a, d, c});
        }
    return to_mesh(verts, faces);
}

TriMesh make_heightfield(int n, double extent, const std::function<double(double, double)>& f,
                         double jitter, std::uint64_t seed) {
    Rng rng(seed, 71);
    const double cell = 2.0 * extent / (n - 1);
    std::vector<Eigen::Vector3d> verts;
    for (int j = 0; j < n; ++j)
        for (int i = 0; i < n; ++i) {
            double x = -extent + cell * i;
            double y = -extent + cell * j;
            if (jitter > 0) {
                x += jitter * cell * (rng.uniform() - 0.5);
                y += jitter * cell * (rng.uniform() - 0.5);
            }
            verts.push_back({x, y, f(x, y)});
        }
    std::vector<std::array<int, 3>> faces;
    for (int j = 0; j + 1 < n; ++j)
        for (int i = 0; i + 1 < n; ++i) {
            int a = j * n + i, b = a + 1, c = a + n, d = c + 1;
            faces.push_back({a, b, d});
            faces.push_back({a, d, c});
        }
    return to_mesh(verts, faces);
}

TriMesh make_saddle(int n, double extent) {
    return make_heightfield(n, extent, [](double x, double y) { return x * x - y * y; });
}

TriMesh make_jittered_sphere(int level, double amount, std::uint64_t seed) {
    std::vector<Eigen::Vector3d> verts;
    std::vector<std::array<int, 3>> faces;
    icosphere_raw(level, verts, faces);
    Rng rng(seed, 72);
    for (auto& v : verts) v *= 1.0 + amount * rng.uniform();
    return to_mesh(verts, faces);
}

PlantedMesh make_bumpy_sphere(int level, double radius, int bump_count, double height,
                              double width, std::uint64_t seed) {
    std::vector<Eigen::Vector3d> verts;
    std::vector<std::array<int, 3>> faces;
    icosphere_raw(level, verts, faces);

    Rng rng(seed, 73);
    std::vector<int> order(verts.size());
    std::iota(order.begin(), order.end(), 0);
    rng.shuffle(order.data(), order.size());

    // Greedy separated centers: at least 4 * width radians apart so bumps
    // never overlap and each apex is a clean local extremum.
    std::vector<int> centers;
    for (int idx : order) {
        bool ok = true;
        for (int c : centers)
            if (std::acos(std::clamp(verts[std::size_t(idx)].dot(verts[std::size_t(c)]),
                                     -1.0, 1.0)) < 4.0 * width)
                ok = false;
        if (ok) centers.push_back(idx);
        if (int(centers.size()) == bump_count) break;
    }

    PlantedMesh out;
    for (std::size_t i = 0; i < verts.size(); ++i) {
        double factor = 1.0;
        for (int c : centers) {
            double angle = std::acos(
                std::clamp(verts[i].dot(verts[std::size_t(c)]), -1.0, 1.0));
            factor += height * std::exp(-(angle * angle) / (width * width));
        }
        verts[i] *= radius * factor;
    }
    out.mesh = to_mesh(verts, faces);
    out.bumps = centers;
    std::sort(out.bumps.begin(), out.bumps.end());
    return out;
}

Eigen::Matrix3d random_rotation(Rng& rng) {
    // Box-Muller pairs give a gaussian 4-vector; normalized, it is a
    // uniformly random unit quaternion.
    double q[4];
    for (int i = 0; i < 4; i += 2) {
        double u1 = 1.0 - rng.uniform();  // (0, 1]
        double u2 = rng.uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        q[i] = r * std::cos(2.0 * M_PI * u2);
        q[i + 1] = r * std::sin(2.0 * M_PI * u2);
    }
    Eigen::Quaterniond quat(q[0], q[1], q[2], q[3]);
    quat.normalize();
    return quat.toRotationMatrix();
}

TriMesh transformed(const TriMesh& mesh, const Eigen::Matrix3d& rotation, double scale,
                    const Eigen::Vector3d& translation) {
    Eigen::MatrixX3d V = (scale * (mesh.vertices * rotation.transpose())).rowwise() +
                         translation.transpose();
    return build_mesh(V, mesh.faces);
}

} // namespace ipd
