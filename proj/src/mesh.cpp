#include "ipd/mesh.hpp"

#include "ipd/convex_hull.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>

namespace ipd {

namespace {

void sort_unique(std::vector<int>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
}

double pairwise_max_dist(const Eigen::MatrixX3d& pts, const std::vector<int>& ids) {
    double best = 0.0;
    for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
        Eigen::RowVector3d p = pts.row(ids[i]);
        for (std::size_t j = i + 1; j < ids.size(); ++j) {
            double d = (pts.row(ids[j]) - p).squaredNorm();
            if (d > best) best = d;
        }
    }
    return std::sqrt(best);
}

} // namespace

TriMesh build_mesh(Eigen::MatrixX3d vertices, Eigen::MatrixX3i faces) {
    const int nv = int(vertices.rows());
    for (int f = 0; f < faces.rows(); ++f) {
        for (int k = 0; k < 3; ++k) {
            int idx = faces(f, k);
            if (idx < 0 || idx >= nv)
                throw MeshError("face " + std::to_string(f) + " references vertex " +
                                std::to_string(idx) + " out of range [0, " +
                                std::to_string(nv) + ")");
        }
        if (faces(f, 0) == faces(f, 1) || faces(f, 1) == faces(f, 2) ||
            faces(f, 0) == faces(f, 2))
            throw MeshError("face " + std::to_string(f) + " is degenerate");
    }

    TriMesh mesh;
    mesh.vertices = std::move(vertices);
    mesh.faces = std::move(faces);
    mesh.ring.assign(nv, {});
    mesh.vertex_faces.assign(nv, {});
    for (int f = 0; f < mesh.faces.rows(); ++f) {
        for (int k = 0; k < 3; ++k) {
            int a = mesh.faces(f, k), b = mesh.faces(f, (k + 1) % 3);
            mesh.ring[a].push_back(b);
            mesh.ring[b].push_back(a);
            mesh.vertex_faces[a].push_back(f);
        }
    }
    for (int v = 0; v < nv; ++v) {
        sort_unique(mesh.ring[v]);
        sort_unique(mesh.vertex_faces[v]);
    }

    bool distinct = false;
    for (int v = 1; v < nv && !distinct; ++v)
        distinct = (mesh.vertices.row(v) != mesh.vertices.row(0));
    mesh.diameter = (nv >= 2 && distinct) ? compute_diameter(mesh.vertices) : 0.0;
    return mesh;
}

namespace {

// Pulls the next content line, skipping blanks and '#' comments.
bool next_line(std::istream& in, std::string& line, int& line_no) {
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::size_t pos = line.find('#');
        if (pos != std::string::npos) line.erase(pos);
        bool blank = true;
        for (char c : line)
            if (!std::isspace(static_cast<unsigned char>(c))) { blank = false; break; }
        if (!blank) return true;
    }
    return false;
}

} // namespace

TriMesh parse_off(std::istream& in) {
    std::string line;
    int line_no = 0;
    if (!next_line(in, line, line_no)) throw ParseError("empty OFF stream", line_no);

    {
        std::istringstream probe(line);
        std::string tok;
        probe >> tok;
        if (tok == "OFF") {
            std::string rest;
            if (probe >> rest) throw ParseError("unexpected tokens after OFF header", line_no);
            if (!next_line(in, line, line_no)) throw ParseError("missing counts line", line_no);
        } else if (tok == "COFF" || tok == "NOFF" || tok == "CNOFF") {
            throw ParseError("unsupported OFF variant '" + tok + "'", line_no);
        }
    }

    long nv = -1, nf = -1, ne = 0;
    {
        std::istringstream counts(line);
        if (!(counts >> nv >> nf) || nv < 0 || nf < 0)
            throw ParseError("malformed counts line '" + line + "'", line_no);
        counts >> ne; // edge count, ignored
    }

    Eigen::MatrixX3d vertices(nv, 3);
    for (long v = 0; v < nv; ++v) {
        if (!next_line(in, line, line_no))
            throw ParseError("expected " + std::to_string(nv) + " vertices, got " +
                                 std::to_string(v),
                             line_no);
        std::istringstream vs(line);
        double x, y, z;
        if (!(vs >> x >> y >> z))
            throw ParseError("malformed vertex line '" + line + "'", line_no);
        vertices.row(v) << x, y, z;
    }

    Eigen::MatrixX3i faces(nf, 3);
    for (long f = 0; f < nf; ++f) {
        if (!next_line(in, line, line_no))
            throw ParseError("expected " + std::to_string(nf) + " faces, got " +
                                 std::to_string(f),
                             line_no);
        std::istringstream fs(line);
        long arity = -1;
        if (!(fs >> arity)) throw ParseError("malformed face line '" + line + "'", line_no);
        if (arity != 3)
            throw ParseError("non-triangular face with " + std::to_string(arity) +
                                 " vertices",
                             line_no);
        long a, b, c;
        if (!(fs >> a >> b >> c))
            throw ParseError("malformed face line '" + line + "'", line_no);
        for (long idx : {a, b, c})
            if (idx < 0 || idx >= nv)
                throw ParseError("face index " + std::to_string(idx) +
                                     " out of range [0, " + std::to_string(nv) + ")",
                                 line_no);
        if (a == b || b == c || a == c)
            throw ParseError("degenerate face (repeated vertex index)", line_no);
        faces.row(f) << int(a), int(b), int(c);
    }

    return build_mesh(std::move(vertices), std::move(faces));
}

TriMesh parse_off_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MeshError("cannot open mesh file: " + path);
    try {
        return parse_off(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), e.line);
    }
}

void write_off(const TriMesh& mesh, std::ostream& out) {
    out << "OFF\n" << mesh.vertex_count() << ' ' << mesh.face_count() << " 0\n";
    char buf[96];
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        std::snprintf(buf, sizeof buf, "%.17g %.17g %.17g\n", mesh.vertices(v, 0),
                      mesh.vertices(v, 1), mesh.vertices(v, 2));
        out << buf;
    }
    for (int f = 0; f < mesh.face_count(); ++f)
        out << "3 " << mesh.faces(f, 0) << ' ' << mesh.faces(f, 1) << ' '
            << mesh.faces(f, 2) << '\n';
}

std::string write_off_string(const TriMesh& mesh) {
    std::ostringstream out;
    write_off(mesh, out);
    return out.str();
}

double compute_diameter(const Eigen::MatrixX3d& points) {
    const int n = int(points.rows());
    if (n < 2) throw MeshError("diameter undefined for fewer than 2 vertices");
    double d;
    if (n < 5000) {
        std::vector<int> all(n);
        std::iota(all.begin(), all.end(), 0);
        d = pairwise_max_dist(points, all);
    } else {
        d = pairwise_max_dist(points, convex_hull_vertices(points));
    }
    if (d <= 0.0) throw MeshError("diameter undefined: all vertices coincide");
    return d;
}

VertexNormals vertex_normals(const TriMesh& mesh) {
    const int nv = mesh.vertex_count();
    VertexNormals out;
    out.normals = Eigen::MatrixX3d::Zero(nv, 3);
    out.valid.assign(nv, 0);

    // face normals carry twice the face area; summing them area-weights
    Eigen::MatrixX3d face_normal(mesh.face_count(), 3);
    for (int f = 0; f < mesh.face_count(); ++f) {
        Eigen::Vector3d a = mesh.vertices.row(mesh.faces(f, 0));
        Eigen::Vector3d b = mesh.vertices.row(mesh.faces(f, 1));
        Eigen::Vector3d c = mesh.vertices.row(mesh.faces(f, 2));
        face_normal.row(f) = (b - a).cross(c - a);
    }
    for (int v = 0; v < nv; ++v) {
        Eigen::Vector3d sum = Eigen::Vector3d::Zero();
        for (int f : mesh.vertex_faces[v]) sum += face_normal.row(f);
        double len = sum.norm();
        if (len > 0.0) {
            out.normals.row(v) = sum / len;
            out.valid[v] = 1;
        }
    }
    return out;
}

MeshStats mesh_stats(const TriMesh& mesh) {
    MeshStats s;
    s.vertices = mesh.vertex_count();
    s.faces = mesh.face_count();
    s.diameter = mesh.diameter;

    std::vector<int> parent(s.vertices);
    std::iota(parent.begin(), parent.end(), 0);
    std::function<int(int)> find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::map<std::pair<int, int>, int> edge_faces;
    for (int f = 0; f < s.faces; ++f) {
        for (int k = 0; k < 3; ++k) {
            int a = mesh.faces(f, k), b = mesh.faces(f, (k + 1) % 3);
            parent[find(a)] = find(b);
            auto key = std::minmax(a, b);
            ++edge_faces[{key.first, key.second}];
        }
    }
    for (int v = 0; v < s.vertices; ++v)
        if (find(v) == v) ++s.components;
    for (const auto& [edge, count] : edge_faces) {
        if (count == 1) ++s.boundary_edges;
        if (count > 2) ++s.nonmanifold_edges;
    }
    return s;
}

} // namespace ipd
