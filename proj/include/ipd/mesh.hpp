#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace ipd {

struct ParseError : std::runtime_error {
    ParseError(const std::string& what, int line_number)
        : std::runtime_error(what + " (line " + std::to_string(line_number) + ")"),
          line(line_number) {}
    int line;
};

struct MeshError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Indexed triangle mesh. Vertex order is load-bearing: ground truth and
// detections refer to vertices by index.
struct TriMesh {
    Eigen::MatrixX3d vertices;
    Eigen::MatrixX3i faces;
    double diameter = 0.0;

    // one-ring adjacency, ascending ids
    std::vector<std::vector<int>> ring;
    std::vector<std::vector<int>> vertex_faces;

    int vertex_count() const { return int(vertices.rows()); }
    int face_count() const { return int(faces.rows()); }
};

// Validates indices, rejects degenerate faces, builds adjacency and the
// diameter. Meshes with fewer than two distinct vertices get diameter 0.
TriMesh build_mesh(Eigen::MatrixX3d vertices, Eigen::MatrixX3i faces);

TriMesh parse_off(std::istream& in);
TriMesh parse_off_file(const std::string& path);
void write_off(const TriMesh& mesh, std::ostream& out);
std::string write_off_string(const TriMesh& mesh);

// Exact maximum pairwise distance. Brute force below 5000 points, convex
// hull above. Throws MeshError when fewer than two distinct points exist.
double compute_diameter(const Eigen::MatrixX3d& points);

struct VertexNormals {
    Eigen::MatrixX3d normals;         // unit where valid, zero otherwise
    std::vector<std::uint8_t> valid;  // 0 for isolated / all-degenerate vertices
};

// Area-weighted average of incident face normals.
VertexNormals vertex_normals(const TriMesh& mesh);

struct MeshStats {
    int vertices = 0;
    int faces = 0;
    int components = 0;
    int boundary_edges = 0;
    int nonmanifold_edges = 0;
    double diameter = 0.0;
};

MeshStats mesh_stats(const TriMesh& mesh);

} // namespace ipd
