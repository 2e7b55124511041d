#include "ipd/groundtruth.hpp"

#include "ipd/geodesic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ipd {

namespace {

int nearest_vertex(const TriMesh& mesh, const Eigen::Vector3d& p) {
    int best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int v = 0; v < mesh.vertex_count(); ++v) {
        double d2 = (mesh.vertices.row(v).transpose() - p).squaredNorm();
        if (d2 < best_d2) {
            best_d2 = d2;
            best = v;
        }
    }
    return best;
}

struct Click {
    int subject;
    int vertex;
};

int find_root(std::vector<int>& parent, int x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
}

} // namespace

std::vector<Representative> merge_representatives(std::vector<Representative> reps,
                                                  const Eigen::MatrixXd& distances,
                                                  double threshold) {
    std::vector<char> alive(reps.size(), 1);
    while (true) {
        int bi = -1, bj = -1;
        double best = threshold;
        for (std::size_t i = 0; i < reps.size(); ++i) {
            if (!alive[i]) continue;
            for (std::size_t j = i + 1; j < reps.size(); ++j) {
                if (!alive[j]) continue;
                double d = distances(long(i), long(j));
                int lo = std::min(reps[i].vertex, reps[j].vertex);
                int hi = std::max(reps[i].vertex, reps[j].vertex);
                bool closer = d < best;
                if (!closer && bi >= 0 && d == best) {
                    int blo = std::min(reps[bi].vertex, reps[bj].vertex);
                    int bhi = std::max(reps[bi].vertex, reps[bj].vertex);
                    closer = lo < blo || (lo == blo && hi < bhi);
                }
                if (closer) {
                    best = d;
                    bi = int(i);
                    bj = int(j);
                }
            }
        }
        if (bi < 0) break;
        const Representative& a = reps[bi];
        const Representative& b = reps[bj];
        bool keep_a = a.support != b.support
                          ? a.support > b.support
                          : (a.medoid_cost != b.medoid_cost
                                 ? a.medoid_cost < b.medoid_cost
                                 : a.vertex < b.vertex);
        int keep = keep_a ? bi : bj, drop = keep_a ? bj : bi;
        reps[keep].support += reps[drop].support;
        alive[drop] = 0;
    }
    std::vector<Representative> out;
    for (std::size_t i = 0; i < reps.size(); ++i)
        if (alive[i]) out.push_back(reps[i]);
    return out;
}

GroundTruth cluster_clicks(const TriMesh& mesh, const ClickSet& clicks, double sigma,
                           int n, std::vector<std::string>* warnings) {
    if (!(sigma > 0.0 && sigma <= 0.1))
        throw std::invalid_argument("sigma must lie in (0, 0.1]");
    if (n < 1) throw std::invalid_argument("consensus n must be >= 1");
    if (clicks.subject_ids.size() != clicks.subject_clicks.size())
        throw std::invalid_argument("click set subject arrays disagree");
    {
        std::set<std::string> ids(clicks.subject_ids.begin(), clicks.subject_ids.end());
        if (ids.size() != clicks.subject_ids.size())
            throw std::invalid_argument("subject ids must be distinct");
    }
    std::size_t total = 0;
    for (const auto& list : clicks.subject_clicks) total += list.size();
    if (total == 0) throw std::invalid_argument("click set is empty");

    GroundTruth gt;
    gt.model = clicks.model;
    gt.sigma = sigma;
    gt.consensus = n;

    const Eigen::Vector3d lo = mesh.vertices.colwise().minCoeff();
    const Eigen::Vector3d hi = mesh.vertices.colwise().maxCoeff();
    const double slack = 0.1 * mesh.diameter;
    const double threshold = 2.0 * sigma * mesh.diameter;

    std::vector<Click> snapped;
    for (std::size_t s = 0; s < clicks.subject_clicks.size(); ++s) {
        std::set<int> seen;  // a subject's repeat clicks on one vertex count once
        for (const ClickTarget& target : clicks.subject_clicks[s]) {
            int v;
            if (target.vertex >= 0) {
                if (target.vertex >= mesh.vertex_count())
                    throw std::invalid_argument(
                        "click vertex " + std::to_string(target.vertex) +
                        " out of range for model " + clicks.model);
                v = target.vertex;
            } else {
                bool outside = false;
                for (int k = 0; k < 3; ++k)
                    outside |= target.point[k] < lo[k] - slack ||
                               target.point[k] > hi[k] + slack;
                if (outside) {
                    if (warnings) {
                        char buf[160];
                        std::snprintf(buf, sizeof buf,
                                      "subject %s: click (%g, %g, %g) lies outside the "
                                      "mesh bounds; dropped (unit mismatch?)",
                                      clicks.subject_ids[s].c_str(), target.point[0],
                                      target.point[1], target.point[2]);
                        warnings->push_back(buf);
                    }
                    continue;
                }
                v = nearest_vertex(mesh, target.point);
            }
            if (seen.insert(v).second) snapped.push_back({int(s), v});
        }
    }
    if (snapped.empty()) return gt;

    std::vector<int> distinct;
    for (const Click& c : snapped) distinct.push_back(c.vertex);
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    std::map<int, int> slot;
    for (std::size_t i = 0; i < distinct.size(); ++i) slot[distinct[i]] = int(i);
    const Eigen::MatrixXd dist = geodesic_pairwise(mesh, distinct);

    std::vector<int> parent(snapped.size());
    for (std::size_t i = 0; i < parent.size(); ++i) parent[i] = int(i);
    for (std::size_t i = 0; i < snapped.size(); ++i)
        for (std::size_t j = i + 1; j < snapped.size(); ++j)
            if (dist(slot[snapped[i].vertex], slot[snapped[j].vertex]) < threshold)
                parent[find_root(parent, int(i))] = find_root(parent, int(j));

    std::map<int, std::vector<int>> clusters;  // root -> click indices
    for (std::size_t i = 0; i < snapped.size(); ++i)
        clusters[find_root(parent, int(i))].push_back(int(i));

    std::vector<Representative> reps;
    for (const auto& [root, members] : clusters) {
        if (int(members.size()) < n) continue;
        int best_vertex = -1;
        double best_cost = std::numeric_limits<double>::infinity();
        for (int ci : members) {
            double cost = 0.0;
            for (int cj : members)
                cost += dist(slot[snapped[ci].vertex], slot[snapped[cj].vertex]);
            if (cost < best_cost ||
                (cost == best_cost && snapped[ci].vertex < best_vertex)) {
                best_cost = cost;
                best_vertex = snapped[ci].vertex;
            }
        }
        reps.push_back({best_vertex, int(members.size()), best_cost});
    }

    Eigen::MatrixXd rep_dist(reps.size(), reps.size());
    for (std::size_t i = 0; i < reps.size(); ++i)
        for (std::size_t j = 0; j < reps.size(); ++j)
            rep_dist(long(i), long(j)) = dist(slot[reps[i].vertex], slot[reps[j].vertex]);
    reps = merge_representatives(std::move(reps), rep_dist, threshold);

    for (const Representative& r : reps) gt.points.push_back({r.vertex, r.support});
    std::sort(gt.points.begin(), gt.points.end(),
              [](const GroundTruthPoint& a, const GroundTruthPoint& b) {
                  return a.vertex < b.vertex;
              });
    return gt;
}

namespace {

bool content_line(std::istream& in, std::string& line, int& line_no) {
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        if (line[0] == '#') continue;
        return true;
    }
    return false;
}

} // namespace

ClickSet read_clicks(std::istream& in) {
    std::string line;
    int line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty click file", 0);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "# ipd-clicks v1") throw ParseError("not an ipd-clicks v1 file", 1);

    ClickSet out;
    long declared_subjects = -1;
    while (content_line(in, line, line_no)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "model") {
            if (!(ls >> out.model)) throw ParseError("model line needs an id", line_no);
        } else if (tag == "subjects") {
            if (!(ls >> declared_subjects) || declared_subjects < 0)
                throw ParseError("malformed subjects count", line_no);
        } else if (tag == "subject") {
            std::string id;
            if (!(ls >> id)) throw ParseError("subject line needs an id", line_no);
            for (const std::string& existing : out.subject_ids)
                if (existing == id)
                    throw ParseError("duplicate subject id '" + id + "'", line_no);
            out.subject_ids.push_back(id);
            out.subject_clicks.emplace_back();
        } else if (tag == "v") {
            if (out.subject_ids.empty())
                throw ParseError("click before any subject line", line_no);
            ClickTarget t;
            if (!(ls >> t.vertex) || t.vertex < 0)
                throw ParseError("malformed vertex click", line_no);
            out.subject_clicks.back().push_back(t);
        } else if (tag == "p") {
            if (out.subject_ids.empty())
                throw ParseError("click before any subject line", line_no);
            ClickTarget t;
            if (!(ls >> t.point[0] >> t.point[1] >> t.point[2]))
                throw ParseError("malformed point click", line_no);
            out.subject_clicks.back().push_back(t);
        } else {
            throw ParseError("unknown click record '" + tag + "'", line_no);
        }
    }
    if (out.model.empty()) throw ParseError("click file names no model", line_no);
    if (declared_subjects >= 0 && declared_subjects != long(out.subject_ids.size()))
        throw ParseError("subject count does not match subject records", line_no);
    return out;
}

ClickSet read_clicks_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MeshError("cannot open click file: " + path);
    try {
        return read_clicks(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), e.line);
    }
}

void write_clicks(const ClickSet& clicks, std::ostream& out) {
    out << "# ipd-clicks v1\n";
    out << "model " << clicks.model << '\n';
    out << "subjects " << clicks.subject_ids.size() << '\n';
    char buf[128];
    for (std::size_t s = 0; s < clicks.subject_ids.size(); ++s) {
        out << "subject " << clicks.subject_ids[s] << '\n';
        for (const ClickTarget& t : clicks.subject_clicks[s]) {
            if (t.vertex >= 0) {
                out << "v " << t.vertex << '\n';
            } else {
                std::snprintf(buf, sizeof buf, "p %.17g %.17g %.17g\n", t.point[0],
                              t.point[1], t.point[2]);
                out << buf;
            }
        }
    }
}

GroundTruth read_ground_truth(std::istream& in) {
    std::string line;
    int line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty ground truth file", 0);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "# ipd-groundtruth v1")
        throw ParseError("not an ipd-groundtruth v1 file", 1);

    GroundTruth gt;
    bool have_params = false;
    while (content_line(in, line, line_no)) {
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        if (tag == "model") {
            if (!(ls >> gt.model)) throw ParseError("model line needs an id", line_no);
            continue;
        }
        if (tag == "params") {
            if (!(ls >> gt.sigma >> gt.consensus))
                throw ParseError("malformed params line", line_no);
            have_params = true;
            continue;
        }
        double sigma;
        try {
            sigma = std::stod(tag);  // record lines start with sigma
        } catch (const std::exception&) {
            throw ParseError("unknown ground truth record '" + tag + "'", line_no);
        }
        int n, vertex, support;
        if (!(ls >> n >> vertex >> support))
            throw ParseError("malformed ground truth record", line_no);
        if (have_params && (sigma != gt.sigma || n != gt.consensus))
            throw ParseError("mixed (sigma, n) in one ground truth file", line_no);
        gt.sigma = sigma;
        gt.consensus = n;
        have_params = true;
        gt.points.push_back({vertex, support});
    }
    if (gt.model.empty()) throw ParseError("ground truth file names no model", line_no);
    return gt;
}

GroundTruth read_ground_truth_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MeshError("cannot open ground truth file: " + path);
    try {
        return read_ground_truth(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), e.line);
    } catch (const std::invalid_argument&) {
        throw ParseError(path + ": malformed ground truth record", 0);
    }
}

void write_ground_truth(const GroundTruth& gt, std::ostream& out) {
    out << "# ipd-groundtruth v1\n";
    out << "model " << gt.model << '\n';
    char buf[128];
    std::snprintf(buf, sizeof buf, "params %.17g %d\n", gt.sigma, gt.consensus);
    out << buf;
    for (const GroundTruthPoint& p : gt.points) {
        std::snprintf(buf, sizeof buf, "%.17g %d %d %d\n", gt.sigma, gt.consensus,
                      p.vertex, p.support);
        out << buf;
    }
}

void write_ground_truth_file(const GroundTruth& gt, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw MeshError("cannot write ground truth file: " + path);
    write_ground_truth(gt, out);
    if (!out) throw MeshError("failed writing ground truth file: " + path);
}

} // namespace ipd
