#pragma once

#include "ipd/mesh.hpp"
#include "ipd/rng.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace ipd {

// Subdivided icosahedron projected onto a sphere. Vertex counts by level:
// 12, 42, 162, 642, 2562. Faces wind outward.
TriMesh make_icosphere(int level, double radius = 1.0);

// nx * ny vertices in the z = 0 plane, triangulated per cell.
TriMesh make_plane_grid(int nx, int ny, double spacing = 1.0);

// Open tube (no caps), outward winding, rows stacked along z.
TriMesh make_cylinder(int segments, int rows, double radius, double height);

// n * n samples of z = f(x, y) over [-extent, extent]^2; optional uniform
// xy jitter (fraction of the cell size) to break grid symmetry.
TriMesh make_heightfield(int n, double extent, const std::function<double(double, double)>& f,
                         double jitter = 0.0, std::uint64_t seed = 0);

TriMesh make_saddle(int n, double extent);

// Icosphere with each vertex pushed radially by a seeded factor in
// [1, 1 + amount]; breaks every symmetry while staying star-shaped.
TriMesh make_jittered_sphere(int level, double amount, std::uint64_t seed);

struct PlantedMesh {
    TriMesh mesh;
    std::vector<int> bumps;  // apex vertex of each planted protrusion
};

// Sphere with well-separated smooth radial bumps, apexes recorded.
PlantedMesh make_bumpy_sphere(int level, double radius, int bump_count, double height,
                              double width, std::uint64_t seed);

// Uniformly random rotation matrix (quaternion method).
Eigen::Matrix3d random_rotation(Rng& rng);

// x -> scale * R * x + t, topology unchanged.
TriMesh transformed(const TriMesh& mesh, const Eigen::Matrix3d& rotation, double scale,
                    const Eigen::Vector3d& translation);

} // namespace ipd
