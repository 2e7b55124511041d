#include "ipd/convex_hull.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <set>
#include <stdexcept>
#include <utility>
#include <vector>

namespace ipd {

namespace {

struct HullFailure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Face {
    std::array<int, 3> v;
    std::array<int, 3> nb;   // nb[e] is across edge (v[e], v[(e+1)%3])
    Eigen::Vector3d normal;
    double offset = 0.0;     // plane: normal.dot(x) = offset
    std::vector<int> outside;
    int far_index = -1;
    double far_dist = 0.0;
    bool alive = true;
};

double signed_dist(const Face& f, const Eigen::Vector3d& p) {
    return f.normal.dot(p) - f.offset;
}

void set_plane(Face& f, const Eigen::MatrixX3d& pts) {
    Eigen::Vector3d a = pts.row(f.v[0]), b = pts.row(f.v[1]), c = pts.row(f.v[2]);
    f.normal = (b - a).cross(c - a);
    double len = f.normal.norm();
    if (len > 0) f.normal /= len;
    f.offset = f.normal.dot(a);
}

std::vector<int> distinct_indices(const Eigen::MatrixX3d& pts) {
    std::vector<int> out;
    std::set<std::array<double, 3>> seen;
    for (int i = 0; i < pts.rows(); ++i) {
        std::array<double, 3> key{pts(i, 0), pts(i, 1), pts(i, 2)};
        if (seen.insert(key).second) out.push_back(i);
    }
    return out;
}

// Andrew monotone chain on points projected into the plane spanned by (e1, e2).
std::vector<int> planar_hull(const Eigen::MatrixX3d& pts, const Eigen::Vector3d& origin,
                             const Eigen::Vector3d& e1, const Eigen::Vector3d& e2) {
    struct P2 {
        double x, y;
        int id;
    };
    std::vector<P2> p(pts.rows());
    for (int i = 0; i < pts.rows(); ++i) {
        Eigen::Vector3d d = pts.row(i).transpose() - origin;
        p[i] = {d.dot(e1), d.dot(e2), i};
    }
    std::sort(p.begin(), p.end(), [](const P2& a, const P2& b) {
        if (a.x != b.x) return a.x < b.x;
        if (a.y != b.y) return a.y < b.y;
        return a.id < b.id;
    });
    p.erase(std::unique(p.begin(), p.end(),
                        [](const P2& a, const P2& b) { return a.x == b.x && a.y == b.y; }),
            p.end());
    if (p.size() <= 2) {
        std::vector<int> out;
        for (auto& q : p) out.push_back(q.id);
        return out;
    }
    auto cross = [](const P2& o, const P2& a, const P2& b) {
        return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);
    };
    std::vector<P2> hull(2 * p.size());
    std::size_t k = 0;
    for (std::size_t i = 0; i < p.size(); ++i) {
        while (k >= 2 && cross(hull[k - 2], hull[k - 1], p[i]) <= 0) --k;
        hull[k++] = p[i];
    }
    for (std::size_t i = p.size() - 1, t = k + 1; i-- > 0;) {
        while (k >= t && cross(hull[k - 2], hull[k - 1], p[i]) <= 0) --k;
        hull[k++] = p[i];
    }
    std::vector<int> out;
    for (std::size_t i = 0; i + 1 < k; ++i) out.push_back(hull[i].id);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<int> quickhull(const Eigen::MatrixX3d& pts) {
    const int n = int(pts.rows());
    Eigen::Vector3d lo = pts.colwise().minCoeff();
    Eigen::Vector3d hi = pts.colwise().maxCoeff();
    const double diag = (hi - lo).norm();
    if (diag == 0.0) return {0};
    const double eps = 1e-9 * diag;

    // initial pair: farthest among the six axis extremes
    std::array<int, 6> ext{};
    for (int axis = 0; axis < 3; ++axis) {
        int imin = 0, imax = 0;
        for (int i = 1; i < n; ++i) {
            if (pts(i, axis) < pts(imin, axis)) imin = i;
            if (pts(i, axis) > pts(imax, axis)) imax = i;
        }
        ext[2 * axis] = imin;
        ext[2 * axis + 1] = imax;
    }
    int i0 = ext[0], i1 = ext[1];
    double best = -1.0;
    for (int a = 0; a < 6; ++a)
        for (int b = a + 1; b < 6; ++b) {
            double d = (pts.row(ext[a]) - pts.row(ext[b])).squaredNorm();
            if (d > best) {
                best = d;
                i0 = ext[a];
                i1 = ext[b];
            }
        }

    // third point: farthest from the line
    Eigen::Vector3d p0 = pts.row(i0), p1 = pts.row(i1);
    Eigen::Vector3d axis_dir = (p1 - p0).normalized();
    int i2 = -1;
    best = eps;
    for (int i = 0; i < n; ++i) {
        Eigen::Vector3d d = pts.row(i).transpose() - p0;
        double dist = (d - d.dot(axis_dir) * axis_dir).norm();
        if (dist > best) {
            best = dist;
            i2 = i;
        }
    }
    if (i2 < 0) {
        // collinear: extremes of the projection are the only candidates
        int jmin = 0, jmax = 0;
        double tmin = 0, tmax = 0;
        for (int i = 0; i < n; ++i) {
            double t = (pts.row(i).transpose() - p0).dot(axis_dir);
            if (i == 0 || t < tmin) { tmin = t; jmin = i; }
            if (i == 0 || t > tmax) { tmax = t; jmax = i; }
        }
        if (jmin == jmax) return {jmin};
        std::vector<int> out{jmin, jmax};
        std::sort(out.begin(), out.end());
        return out;
    }

    // fourth point: farthest from the plane
    Eigen::Vector3d p2 = pts.row(i2);
    Eigen::Vector3d pn = (p1 - p0).cross(p2 - p0).normalized();
    int i3 = -1;
    best = eps;
    for (int i = 0; i < n; ++i) {
        double dist = std::abs(pn.dot(pts.row(i).transpose() - p0));
        if (dist > best) {
            best = dist;
            i3 = i;
        }
    }
    if (i3 < 0) {
        Eigen::Vector3d e1 = axis_dir;
        Eigen::Vector3d e2 = pn.cross(e1).normalized();
        return planar_hull(pts, p0, e1, e2);
    }

    Eigen::Vector3d interior =
        (pts.row(i0) + pts.row(i1) + pts.row(i2) + pts.row(i3)) / 4.0;

    std::vector<Face> faces;
    // orient_out: flip so the interior lands on the negative side. Cone faces
    // built from a visible face's directed edge are already outward and must
    // not be second-guessed near coplanarity.
    auto make_face = [&](int a, int b, int c, bool orient_out) {
        Face f;
        f.v = {a, b, c};
        set_plane(f, pts);
        if (orient_out && signed_dist(f, interior) > 0) {
            std::swap(f.v[1], f.v[2]);
            set_plane(f, pts);
        }
        f.nb = {-1, -1, -1};
        faces.push_back(std::move(f));
        return int(faces.size()) - 1;
    };
    make_face(i0, i1, i2, true);
    make_face(i0, i1, i3, true);
    make_face(i0, i2, i3, true);
    make_face(i1, i2, i3, true);

    // adjacency by undirected edge
    auto link_all = [&](const std::vector<int>& ids) {
        std::map<std::pair<int, int>, std::pair<int, int>> open; // edge -> (face, slot)
        for (int fid : ids) {
            Face& f = faces[fid];
            for (int e = 0; e < 3; ++e) {
                if (f.nb[e] >= 0) continue;
                int a = f.v[e], b = f.v[(e + 1) % 3];
                auto key = std::minmax(a, b);
                auto it = open.find({key.first, key.second});
                if (it == open.end()) {
                    open[{key.first, key.second}] = {fid, e};
                } else {
                    f.nb[e] = it->second.first;
                    faces[it->second.first].nb[it->second.second] = fid;
                    open.erase(it);
                }
            }
        }
        if (!open.empty()) throw HullFailure("hull adjacency not closed");
    };
    link_all({0, 1, 2, 3});

    auto assign_outside = [&](int point, const std::vector<int>& candidates) {
        for (int fid : candidates) {
            Face& f = faces[fid];
            if (!f.alive) continue;
            double d = signed_dist(f, pts.row(point));
            if (d > eps) {
                f.outside.push_back(point);
                if (d > f.far_dist) {
                    f.far_dist = d;
                    f.far_index = point;
                }
                return;
            }
        }
    };
    {
        std::vector<int> initial{0, 1, 2, 3};
        for (int i = 0; i < n; ++i) assign_outside(i, initial);
    }

    std::vector<int> pending{0, 1, 2, 3};
    long iterations = 0;
    const long cap = 4L * n + 64;
    while (!pending.empty()) {
        int seed = pending.back();
        pending.pop_back();
        Face& sf = faces[seed];
        if (!sf.alive || sf.outside.empty()) continue;
        if (++iterations > cap) throw HullFailure("hull iteration cap exceeded");

        const int apex = sf.far_index;
        const Eigen::Vector3d ap = pts.row(apex);

        // visible region, flood-filled from the seed
        std::vector<int> visible;
        std::vector<int> stack{seed};
        std::set<int> seen{seed};
        while (!stack.empty()) {
            int fid = stack.back();
            stack.pop_back();
            visible.push_back(fid);
            for (int e = 0; e < 3; ++e) {
                int g = faces[fid].nb[e];
                if (g < 0 || !faces[g].alive || seen.count(g)) continue;
                if (signed_dist(faces[g], ap) > eps) {
                    seen.insert(g);
                    stack.push_back(g);
                }
            }
        }

        struct HorizonEdge {
            int a, b, across;
        };
        std::vector<HorizonEdge> horizon;
        for (int fid : visible) {
            const Face& f = faces[fid];
            for (int e = 0; e < 3; ++e) {
                int g = f.nb[e];
                if (g >= 0 && !seen.count(g))
                    horizon.push_back({f.v[e], f.v[(e + 1) % 3], g});
            }
        }
        if (horizon.empty()) throw HullFailure("empty horizon");

        std::vector<int> orphans;
        for (int fid : visible) {
            faces[fid].alive = false;
            for (int p : faces[fid].outside)
                if (p != apex) orphans.push_back(p);
            faces[fid].outside.clear();
        }

        std::vector<int> created;
        for (const auto& he : horizon) {
            int nf = make_face(he.a, he.b, apex, false);
            created.push_back(nf);
            // stitch to the surviving neighbor across the horizon
            Face& g = faces[he.across];
            for (int e = 0; e < 3; ++e) {
                int ga = g.v[e], gb = g.v[(e + 1) % 3];
                if ((ga == he.a && gb == he.b) || (ga == he.b && gb == he.a)) {
                    g.nb[e] = nf;
                    Face& f = faces[nf];
                    for (int e2 = 0; e2 < 3; ++e2) {
                        int fa = f.v[e2], fb = f.v[(e2 + 1) % 3];
                        if ((fa == he.a && fb == he.b) || (fa == he.b && fb == he.a))
                            f.nb[e2] = he.across;
                    }
                }
            }
        }
        link_all(created);

        for (int p : orphans) assign_outside(p, created);
        for (int nf : created)
            if (!faces[nf].outside.empty()) pending.push_back(nf);
    }

    std::set<int> verts;
    for (const Face& f : faces)
        if (f.alive) verts.insert(f.v.begin(), f.v.end());
    if (verts.empty()) throw HullFailure("no faces survived");
    return {verts.begin(), verts.end()};
}

} // namespace

std::vector<int> convex_hull_vertices(const Eigen::MatrixX3d& points) {
    const int n = int(points.rows());
    if (n == 0) return {};
    if (n <= 4) return distinct_indices(points);
    try {
        return quickhull(points);
    } catch (const HullFailure&) {
        return distinct_indices(points);
    }
}

} // namespace ipd
