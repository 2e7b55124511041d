#include "ipd/detector.hpp"

#include "ipd/geodesic.hpp"
#include "ipd/hash.hpp"
#include "ipd/kdtree.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ipd {

std::vector<int> build_labels(int vertex_count, const std::vector<GroundTruth>& cells,
                              const LabelingPolicy& policy) {
    if (policy.sigmas.empty() || policy.n_lo < 1 || policy.n_hi < policy.n_lo)
        throw std::invalid_argument("labeling policy grid is empty");
    std::vector<int> labels(vertex_count, 0);
    std::string gaps;
    for (double sigma : policy.sigmas) {
        for (int n = policy.n_lo; n <= policy.n_hi; ++n) {
            const GroundTruth* cell = nullptr;
            for (const GroundTruth& gt : cells)
                if (gt.sigma == sigma && gt.consensus == n) {
                    cell = &gt;
                    break;
                }
            if (!cell) {
                char buf[64];
                std::snprintf(buf, sizeof buf, " (sigma=%g, n=%d)", sigma, n);
                gaps += buf;
                continue;
            }
            for (const GroundTruthPoint& p : cell->points) {
                if (p.vertex < 0 || p.vertex >= vertex_count)
                    throw std::invalid_argument(
                        "ground truth vertex " + std::to_string(p.vertex) +
                        " out of range");
                labels[p.vertex] = 1;
            }
        }
    }
    if (!gaps.empty())
        throw std::invalid_argument("missing ground truth cells:" + gaps);
    return labels;
}

double compute_psi(const std::vector<const TriMesh*>& meshes,
                   const std::vector<std::vector<int>>& gt_vertices,
                   std::vector<std::string>* warnings) {
    if (meshes.size() != gt_vertices.size())
        throw std::invalid_argument("compute_psi: input lengths disagree");
    double sum = 0.0;
    long count = 0;
    for (std::size_t m = 0; m < meshes.size(); ++m) {
        const std::vector<int>& verts = gt_vertices[m];
        if (int(verts.size()) < 2) {
            if (warnings)
                warnings->push_back("model " + std::to_string(m) +
                                    " has fewer than 2 ground-truth vertices; skipped "
                                    "in psi");
            continue;
        }
        Eigen::MatrixXd dist = geodesic_pairwise(*meshes[m], verts);
        for (long i = 0; i < dist.rows(); ++i) {
            double nearest = std::numeric_limits<double>::infinity();
            for (long j = 0; j < dist.cols(); ++j)
                if (j != i) nearest = std::min(nearest, dist(i, j));
            sum += nearest;
            ++count;
        }
    }
    if (count == 0)
        throw std::invalid_argument(
            "psi undefined: no training model has 2+ ground-truth vertices");
    return sum / double(count);
}

DetectionResult nms(const std::vector<NmsCandidate>& candidates, const TriMesh& mesh,
                    double radius) {
    if (!(radius > 0.0)) throw std::invalid_argument("nms radius must be positive");
    DetectionResult result;
    result.radius = radius;

    std::vector<NmsCandidate> live;
    for (const NmsCandidate& cand : candidates) {
        if (cand.vertex < 0 || cand.vertex >= mesh.vertex_count())
            throw std::invalid_argument("nms candidate vertex out of range");
        if (cand.probability > 0.5) live.push_back(cand);
    }
    if (live.empty()) return result;

    Eigen::MatrixX3d positions(live.size(), 3);
    for (std::size_t i = 0; i < live.size(); ++i)
        positions.row(long(i)) = mesh.vertices.row(live[i].vertex);
    KdTree tree(positions);

    for (std::size_t i = 0; i < live.size(); ++i) {
        bool keep = true, tie = false;
        for (int j : tree.radius_indices(positions.row(long(i)), radius)) {
            if (j == int(i)) continue;
            if (live[j].probability > live[i].probability) {
                keep = false;
                break;
            }
            if (live[j].probability == live[i].probability) {
                tie = true;
                if (live[j].vertex < live[i].vertex) {
                    keep = false;
                    break;
                }
            }
        }
        if (keep) result.detections.push_back({live[i].vertex, live[i].probability, tie});
    }
    std::sort(result.detections.begin(), result.detections.end(),
              [](const Detection& a, const Detection& b) {
                  if (a.probability != b.probability)
                      return a.probability > b.probability;
                  return a.vertex < b.vertex;
              });
    return result;
}

PipelineResult run_pipeline(const std::vector<ModelData>& train_models,
                            const std::vector<ModelData>& test_models,
                            const PipelineOptions& opts) {
    PipelineResult result;

    auto check_model = [](const ModelData& m) {
        if (!m.mesh || !m.attributes)
            throw std::invalid_argument("pipeline model '" + m.id +
                                        "' lacks mesh or attributes");
        if (m.attributes->values.cols() != kAttributeCount)
            throw std::invalid_argument("model '" + m.id +
                                        "' has a stale attribute schema");
        if (m.attributes->vertex_count() != m.mesh->vertex_count())
            throw std::invalid_argument("model '" + m.id +
                                        "' attribute rows do not match the mesh");
    };

    long total_positive = 0;
    TrainingSet training;
    {
        long rows = 0;
        for (const ModelData& m : train_models) {
            check_model(m);
            if (int(m.labels.size()) != m.mesh->vertex_count())
                throw std::invalid_argument("model '" + m.id +
                                            "' labels do not match the mesh");
            rows += m.mesh->vertex_count();
        }
        training.features.resize(rows, kAttributeCount);
        training.labels.reserve(std::size_t(rows));
        training.row_model.reserve(std::size_t(rows));
        training.row_vertex.reserve(std::size_t(rows));
        long at = 0;
        for (const ModelData& m : train_models) {
            const int nv = m.mesh->vertex_count();
            training.features.middleRows(at, nv) = m.attributes->values;
            for (int v = 0; v < nv; ++v) {
                training.labels.push_back(m.labels[v]);
                training.row_model.push_back(m.id);
                training.row_vertex.push_back(v);
                total_positive += m.labels[v];
            }
            at += nv;
        }
    }
    for (const ModelData& m : test_models) check_model(m);

    if (total_positive == 0) {
        // nothing to learn: every test model gets an empty detection set
        result.warnings.push_back(
            "training labels are all negative; emitting empty detections");
        for (const ModelData& m : test_models) {
            DetectionResult d;
            d.model = m.id;
            d.c = opts.c;
            d.seed = opts.train.seed;
            d.config_hash = opts.config_hash;
            result.detections.push_back(std::move(d));
        }
        return result;
    }

    std::vector<const TriMesh*> meshes;
    std::vector<std::vector<int>> gt_vertices;
    for (const ModelData& m : train_models) {
        meshes.push_back(m.mesh);
        std::vector<int> verts;
        for (int v = 0; v < int(m.labels.size()); ++v)
            if (m.labels[v] == 1) verts.push_back(v);
        gt_vertices.push_back(std::move(verts));
    }
    result.psi = compute_psi(meshes, gt_vertices, &result.warnings);

    result.forest = train_forest(training, opts.train);
    const std::uint64_t forest_hash = fnv1a(forest_to_json(result.forest));

    for (const ModelData& m : test_models) {
        Eigen::VectorXd proba =
            predict_proba_all(result.forest, m.attributes->values, opts.train.jobs);
        std::vector<NmsCandidate> candidates;
        for (int v = 0; v < m.mesh->vertex_count(); ++v)
            if (proba[v] > 0.5) candidates.push_back({v, proba[v]});
        DetectionResult d = nms(candidates, *m.mesh, opts.c * result.psi);
        d.model = m.id;
        d.c = opts.c;
        d.psi = result.psi;
        d.seed = opts.train.seed;
        d.forest_hash = forest_hash;
        d.config_hash = opts.config_hash;
        result.detections.push_back(std::move(d));
    }
    return result;
}

void write_detections(const DetectionResult& result, std::ostream& out) {
    char buf[128];
    out << "# ipd-detections v1\n";
    out << "model " << result.model << '\n';
    std::snprintf(buf, sizeof buf, "c %.17g\n", result.c);
    out << buf;
    std::snprintf(buf, sizeof buf, "psi %.17g\n", result.psi);
    out << buf;
    std::snprintf(buf, sizeof buf, "radius %.17g\n", result.radius);
    out << buf;
    out << "seed " << result.seed << '\n';
    std::snprintf(buf, sizeof buf, "forest %016llx\n",
                  (unsigned long long)result.forest_hash);
    out << buf;
    std::snprintf(buf, sizeof buf, "config %016llx\n",
                  (unsigned long long)result.config_hash);
    out << buf;
    for (const Detection& d : result.detections)
        if (d.tie) out << "tie " << d.vertex << '\n';
    for (const Detection& d : result.detections) {
        std::snprintf(buf, sizeof buf, "%d %.17g\n", d.vertex, d.probability);
        out << buf;
    }
}

DetectionResult read_detections(std::istream& in) {
    std::string line;
    int line_no = 0;
    if (!std::getline(in, line)) throw ParseError("empty detection file", 0);
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "# ipd-detections v1")
        throw ParseError("not an ipd-detections v1 file", 1);

    DetectionResult result;
    std::set<int> ties;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ls(line);
        std::string tag;
        ls >> tag;
        auto need = [&](bool ok) {
            if (!ok) throw ParseError("malformed detection record", line_no);
        };
        if (tag == "model") {
            need(bool(ls >> result.model));
        } else if (tag == "c") {
            need(bool(ls >> result.c));
        } else if (tag == "psi") {
            need(bool(ls >> result.psi));
        } else if (tag == "radius") {
            need(bool(ls >> result.radius));
        } else if (tag == "seed") {
            need(bool(ls >> result.seed));
        } else if (tag == "forest") {
            std::string hex;
            need(bool(ls >> hex));
            result.forest_hash = std::stoull(hex, nullptr, 16);
        } else if (tag == "config") {
            std::string hex;
            need(bool(ls >> hex));
            result.config_hash = std::stoull(hex, nullptr, 16);
        } else if (tag == "tie") {
            int v;
            need(bool(ls >> v));
            ties.insert(v);
        } else {
            Detection d;
            try {
                d.vertex = std::stoi(tag);
            } catch (const std::exception&) {
                throw ParseError("unknown detection record '" + tag + "'", line_no);
            }
            need(bool(ls >> d.probability));
            d.tie = ties.count(d.vertex) > 0;
            result.detections.push_back(d);
        }
    }
    if (result.model.empty()) throw ParseError("detection file names no model", line_no);
    return result;
}

void write_detections_file(const DetectionResult& result, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw MeshError("cannot write detection file: " + path);
    write_detections(result, out);
    if (!out) throw MeshError("failed writing detection file: " + path);
}

DetectionResult read_detections_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MeshError("cannot open detection file: " + path);
    try {
        return read_detections(in);
    } catch (const ParseError& e) {
        throw ParseError(path + ": " + e.what(), e.line);
    }
}

} // namespace ipd
