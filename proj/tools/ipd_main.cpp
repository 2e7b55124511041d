#include <CLI11.hpp>
#include <json.hpp>

#include "ipd/attributes.hpp"
#include "ipd/config.hpp"
#include "ipd/detector.hpp"
#include "ipd/evaluation.hpp"
#include "ipd/forest.hpp"
#include "ipd/groundtruth.hpp"
#include "ipd/hash.hpp"
#include "ipd/mesh.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace ipd;

namespace {

struct Cli {
    std::string config_path;
    std::uint64_t seed = 0;
    bool seed_set = false;
    int jobs = 0;  // 0: one worker per hardware thread
    bool force = false;
};

RunConfig load_config(const Cli& cli) {
    RunConfig cfg = read_config_file(cli.config_path);
    if (cli.seed_set) cfg.seed = cli.seed;
    return cfg;
}

// Creates the output tree and records the exact configuration this run used.
std::uint64_t prepare_output(const RunConfig& cfg) {
    fs::create_directories(cfg.output_dir);
    write_config_file(cfg, (fs::path(cfg.output_dir) / "config.resolved.json").string());
    return config_hash(cfg);
}

std::string hex16(std::uint64_t h) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)h);
    return buf;
}

struct ModelFile {
    std::string id;
    fs::path mesh;
};

std::vector<ModelFile> list_models(const std::string& dir) {
    if (!fs::is_directory(dir))
        throw std::invalid_argument("mesh directory not found: " + dir);
    std::vector<ModelFile> out;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".off")
            out.push_back({entry.path().stem().string(), entry.path()});
    std::sort(out.begin(), out.end(),
              [](const ModelFile& a, const ModelFile& b) { return a.id < b.id; });
    return out;
}

std::string cell_name(double sigma, int n) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "s%g_n%d", sigma, n);
    return buf;
}

fs::path attributes_path(const RunConfig& cfg, const std::string& id) {
    return fs::path(cfg.output_dir) / "attributes" / (id + ".csv");
}

fs::path gt_path(const RunConfig& cfg, const std::string& id, double sigma, int n) {
    return fs::path(cfg.output_dir) / "groundtruth" /
           (id + "_" + cell_name(sigma, n) + ".gt");
}

fs::path detections_path(const RunConfig& cfg, const std::string& id) {
    return fs::path(cfg.output_dir) / "detections" / (id + ".det");
}

// Consensus values cluster-gt must cover: the label policy range plus the
// evaluation grid.
std::set<int> consensus_values(const RunConfig& cfg) {
    std::set<int> ns(cfg.eval_consensus.begin(), cfg.eval_consensus.end());
    for (int n = cfg.label_n_lo; n <= cfg.label_n_hi; ++n) ns.insert(n);
    return ns;
}

bool attributes_current(const fs::path& csv, const fs::path& mesh, const RunConfig& cfg) {
    std::error_code ec;
    if (!fs::exists(csv, ec)) return false;
    auto mesh_time = fs::last_write_time(mesh, ec);
    if (ec) return false;
    auto csv_time = fs::last_write_time(csv, ec);
    if (ec || csv_time < mesh_time) return false;
    std::ifstream in(csv);
    std::string line;
    if (!std::getline(in, line)) return false;
    double delta = 0, diameter = 0;
    int neighbors = 0;
    if (std::sscanf(line.c_str(), "# ipd-attributes v1 delta=%lg diameter=%lg neighbors=%d",
                    &delta, &diameter, &neighbors) != 3)
        return false;
    if (neighbors != cfg.neighbors || !(diameter > 0)) return false;
    return std::abs(delta / diameter - cfg.delta_fraction) <= 1e-9 * cfg.delta_fraction;
}

void check_attrs(const AttributeMatrix& a, const TriMesh& mesh, const RunConfig& cfg,
                 const std::string& id) {
    if (a.values.rows() != mesh.vertex_count())
        throw std::invalid_argument("attributes for " + id +
                                    " do not match the mesh; rerun attributes");
    bool same_delta = a.diameter > 0 &&
                      std::abs(a.delta / a.diameter - cfg.delta_fraction) <=
                          1e-9 * cfg.delta_fraction;
    if (a.neighbors != cfg.neighbors || !same_delta)
        throw std::invalid_argument("attributes for " + id +
                                    " were built with different settings; rerun attributes");
}

int cmd_attributes(const Cli& cli) {
    RunConfig cfg = load_config(cli);
    prepare_output(cfg);
    std::vector<ModelFile> models = list_models(cfg.mesh_dir);
    if (models.empty()) {
        std::cerr << "warning: no .off meshes in " << cfg.mesh_dir << "\n";
        return 0;
    }
    fs::create_directories(fs::path(cfg.output_dir) / "attributes");
    ExtractOptions opts;
    opts.neighbors = cfg.neighbors;
    opts.delta_fraction = cfg.delta_fraction;
    opts.jobs = cli.jobs;
    int failures = 0;
    for (const ModelFile& m : models) {
        fs::path out = attributes_path(cfg, m.id);
        if (!cli.force && attributes_current(out, m.mesh, cfg)) {
            std::cout << m.id << ": up to date\n";
            continue;
        }
        try {
            TriMesh mesh = parse_off_file(m.mesh.string());
            AttributeMatrix attrs = extract_all(mesh, m.id, opts);
            write_attributes_file(attrs, out.string());
            std::cout << m.id << ": " << attrs.vertex_count() << " vertices\n";
        } catch (const std::exception& e) {
            std::cerr << m.mesh.string() << ": " << e.what() << "\n";
            ++failures;
        }
    }
    return failures ? 1 : 0;
}

int cmd_cluster_gt(const Cli& cli) {
    RunConfig cfg = load_config(cli);
    prepare_output(cfg);
    std::vector<ModelFile> models = list_models(cfg.mesh_dir);
    if (models.empty()) throw std::invalid_argument("no .off meshes in " + cfg.mesh_dir);
    if (cfg.clicks_dir.empty())
        throw std::invalid_argument("clicks_dir is required for cluster-gt");

    std::vector<std::string> missing;
    for (const ModelFile& m : models) {
        fs::path p = fs::path(cfg.clicks_dir) / (m.id + ".clicks");
        if (!fs::exists(p)) missing.push_back(p.string());
    }
    if (!missing.empty()) {
        std::cerr << "missing click files:\n";
        for (const std::string& p : missing) std::cerr << "  " << p << "\n";
        return 1;
    }

    fs::create_directories(fs::path(cfg.output_dir) / "groundtruth");
    std::set<int> ns = consensus_values(cfg);
    for (const ModelFile& m : models) {
        TriMesh mesh = parse_off_file(m.mesh.string());
        ClickSet clicks =
            read_clicks_file((fs::path(cfg.clicks_dir) / (m.id + ".clicks")).string());
        int cells = 0;
        for (double sigma : cfg.sigmas)
            for (int n : ns) {
                std::vector<std::string> warnings;
                GroundTruth gt = cluster_clicks(mesh, clicks, sigma, n, &warnings);
                for (const std::string& w : warnings)
                    std::cerr << "warning: " << m.id << ": " << w << "\n";
                write_ground_truth_file(gt, gt_path(cfg, m.id, sigma, n).string());
                ++cells;
            }
        std::cout << m.id << ": " << cells << " ground-truth cells\n";
    }
    return 0;
}

struct LoadedModel {
    std::string id;
    TriMesh mesh;
    AttributeMatrix attrs;
    std::vector<int> labels;
};

// Mesh + attributes + policy-grid labels for every model, keyed by id.
std::map<std::string, LoadedModel> load_models(const RunConfig& cfg,
                                               const std::vector<ModelFile>& models,
                                               bool with_labels) {
    std::map<std::string, LoadedModel> out;
    std::vector<std::string> missing;
    for (const ModelFile& m : models) {
        LoadedModel lm;
        lm.id = m.id;
        lm.mesh = parse_off_file(m.mesh.string());
        fs::path ap = attributes_path(cfg, m.id);
        if (!fs::exists(ap)) {
            missing.push_back(ap.string());
            continue;
        }
        lm.attrs = read_attributes_file(ap.string());
        check_attrs(lm.attrs, lm.mesh, cfg, m.id);
        if (with_labels) {
            std::vector<GroundTruth> cells;
            for (double sigma : cfg.sigmas)
                for (int n = cfg.label_n_lo; n <= cfg.label_n_hi; ++n) {
                    fs::path gp = gt_path(cfg, m.id, sigma, n);
                    if (!fs::exists(gp)) {
                        missing.push_back(gp.string());
                        continue;
                    }
                    cells.push_back(read_ground_truth_file(gp.string()));
                }
            LabelingPolicy policy{cfg.sigmas, cfg.label_n_lo, cfg.label_n_hi};
            if (missing.empty())
                lm.labels = build_labels(lm.mesh.vertex_count(), cells, policy);
        }
        out.emplace(m.id, std::move(lm));
    }
    if (!missing.empty()) {
        std::string msg = "missing upstream artifacts:";
        for (const std::string& p : missing) msg += "\n  " + p;
        throw std::invalid_argument(msg);
    }
    return out;
}

fs::path folds_manifest_path(const RunConfig& cfg) {
    return fs::path(cfg.output_dir) / "folds.json";
}

struct FoldEntry {
    std::vector<std::string> train, test;
    double psi = 0.0;
    std::string forest;  // relative to output_dir; empty when nothing was learnable
};

void write_folds_manifest(const RunConfig& cfg, std::uint64_t hash,
                          const std::vector<FoldEntry>& folds) {
    nlohmann::json j;
    j["format"] = "ipd-folds";
    j["version"] = 1;
    j["config"] = hex16(hash);
    j["seed"] = cfg.seed;
    j["folds"] = nlohmann::json::array();
    for (const FoldEntry& f : folds) {
        nlohmann::json e;
        e["train"] = f.train;
        e["test"] = f.test;
        e["psi"] = f.psi;
        if (f.forest.empty())
            e["forest"] = nullptr;
        else
            e["forest"] = f.forest;
        j["folds"].push_back(e);
    }
    std::ofstream out(folds_manifest_path(cfg));
    if (!out) throw MeshError("cannot write " + folds_manifest_path(cfg).string());
    out << j.dump(2) << '\n';
}

std::vector<FoldEntry> read_folds_manifest(const RunConfig& cfg, std::uint64_t hash) {
    fs::path path = folds_manifest_path(cfg);
    if (!fs::exists(path))
        throw std::invalid_argument(path.string() + " not found; run train first");
    std::ifstream in(path);
    nlohmann::json j;
    try {
        in >> j;
        if (j.at("format") != "ipd-folds" || j.at("version") != 1)
            throw std::invalid_argument(path.string() + ": unsupported fold manifest");
        std::string stamp = j.at("config").get<std::string>();
        if (stamp != hex16(hash))
            throw std::invalid_argument(path.string() + ": built under config " + stamp +
                                        " but current config is " + hex16(hash) +
                                        "; rerun train");
        std::vector<FoldEntry> folds;
        for (const auto& e : j.at("folds")) {
            FoldEntry f;
            f.train = e.at("train").get<std::vector<std::string>>();
            f.test = e.at("test").get<std::vector<std::string>>();
            f.psi = e.at("psi").get<double>();
            if (!e.at("forest").is_null()) f.forest = e.at("forest").get<std::string>();
            folds.push_back(std::move(f));
        }
        return folds;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(path.string() + ": " + e.what());
    }
}

int cmd_train(const Cli& cli) {
    RunConfig cfg = load_config(cli);
    std::uint64_t hash = prepare_output(cfg);
    std::vector<ModelFile> models = list_models(cfg.mesh_dir);
    if (models.empty()) throw std::invalid_argument("no .off meshes in " + cfg.mesh_dir);
    std::vector<std::string> ids;
    for (const ModelFile& m : models) ids.push_back(m.id);
    std::vector<std::vector<std::string>> folds = assign_folds(cfg, ids);
    std::map<std::string, LoadedModel> loaded = load_models(cfg, models, true);

    fs::create_directories(fs::path(cfg.output_dir) / "forests");
    std::vector<FoldEntry> manifest;
    for (std::size_t k = 0; k < folds.size(); ++k) {
        FoldEntry entry;
        entry.test = folds[k];
        std::set<std::string> test_set(folds[k].begin(), folds[k].end());
        for (const std::string& id : ids)
            if (!test_set.count(id)) entry.train.push_back(id);

        TrainingSet ts;
        long rows = 0;
        for (const std::string& id : entry.train)
            rows += loaded.at(id).mesh.vertex_count();
        ts.features.resize(rows, kAttributeCount);
        long r = 0;
        long positives = 0;
        for (const std::string& id : entry.train) {
            const LoadedModel& lm = loaded.at(id);
            for (int v = 0; v < lm.mesh.vertex_count(); ++v, ++r) {
                ts.features.row(r) = lm.attrs.values.row(v);
                ts.labels.push_back(lm.labels[std::size_t(v)]);
                ts.row_model.push_back(id);
                ts.row_vertex.push_back(v);
                positives += lm.labels[std::size_t(v)];
            }
        }

        if (positives == 0) {
            std::cerr << "warning: fold " << k
                      << " has no positive training labels; nothing to learn\n";
            manifest.push_back(std::move(entry));
            continue;
        }

        std::vector<const TriMesh*> train_meshes;
        std::vector<std::vector<int>> train_gt;
        for (const std::string& id : entry.train) {
            const LoadedModel& lm = loaded.at(id);
            std::vector<int> gt;
            for (int v = 0; v < lm.mesh.vertex_count(); ++v)
                if (lm.labels[std::size_t(v)] == 1) gt.push_back(v);
            train_meshes.push_back(&lm.mesh);
            train_gt.push_back(std::move(gt));
        }
        std::vector<std::string> warnings;
        entry.psi = compute_psi(train_meshes, train_gt, &warnings);
        for (const std::string& w : warnings)
            std::cerr << "warning: fold " << k << ": " << w << "\n";

        TrainOptions topts;
        topts.tree_count = cfg.trees;
        topts.node_features = cfg.node_features;
        topts.ratio = cfg.ratio;
        topts.seed = cfg.seed;
        topts.jobs = cli.jobs;
        RandomForestModel forest = train_forest(ts, topts);
        std::string rel = "forests/fold" + std::to_string(k) + ".json";
        write_forest_file(forest, (fs::path(cfg.output_dir) / rel).string());
        entry.forest = rel;
        std::cout << "fold " << k << ": " << rows << " rows, " << positives
                  << " positive, psi " << entry.psi << "\n";
        manifest.push_back(std::move(entry));
    }
    write_folds_manifest(cfg, hash, manifest);
    return 0;
}

int cmd_detect(const Cli& cli) {
    RunConfig cfg = load_config(cli);
    std::uint64_t hash = prepare_output(cfg);
    std::vector<FoldEntry> folds = read_folds_manifest(cfg, hash);
    std::vector<ModelFile> models = list_models(cfg.mesh_dir);
    std::map<std::string, LoadedModel> loaded = load_models(cfg, models, false);

    fs::create_directories(fs::path(cfg.output_dir) / "detections");
    for (std::size_t k = 0; k < folds.size(); ++k) {
        const FoldEntry& fold = folds[k];
        RandomForestModel forest;
        std::uint64_t forest_hash = 0;
        if (!fold.forest.empty()) {
            forest = read_forest_file((fs::path(cfg.output_dir) / fold.forest).string());
            forest_hash = fnv1a(forest_to_json(forest));
        }
        for (const std::string& id : fold.test) {
            auto it = loaded.find(id);
            if (it == loaded.end())
                throw std::invalid_argument("fold manifest names unknown model: " + id);
            const LoadedModel& lm = it->second;
            DetectionResult result;
            if (fold.forest.empty()) {
                std::cerr << "warning: " << id << ": fold " << k
                          << " learned nothing; writing empty detections\n";
                result.model = id;
                result.c = cfg.nms_c;
            } else {
                Eigen::VectorXd probs =
                    predict_proba_all(forest, lm.attrs.values, cli.jobs);
                std::vector<NmsCandidate> candidates;
                for (int v = 0; v < lm.mesh.vertex_count(); ++v)
                    if (probs[v] > 0.5) candidates.push_back({v, probs[v]});
                result = nms(candidates, lm.mesh, cfg.nms_c * fold.psi);
                result.model = id;
                result.c = cfg.nms_c;
                result.psi = fold.psi;
            }
            result.seed = cfg.seed;
            result.forest_hash = forest_hash;
            result.config_hash = hash;
            write_detections_file(result, detections_path(cfg, id).string());
            std::cout << id << ": " << result.detections.size() << " detections\n";
        }
    }
    return 0;
}

int cmd_eval(const Cli& cli) {
    RunConfig cfg = load_config(cli);
    std::uint64_t hash = prepare_output(cfg);
    std::vector<FoldEntry> folds = read_folds_manifest(cfg, hash);
    std::vector<ModelFile> models = list_models(cfg.mesh_dir);

    std::map<std::string, TriMesh> meshes;
    for (const ModelFile& m : models) meshes.emplace(m.id, parse_off_file(m.mesh.string()));

    std::map<std::string, std::vector<int>> det_vertices;
    std::vector<std::string> missing;
    for (const FoldEntry& fold : folds)
        for (const std::string& id : fold.test) {
            fs::path dp = detections_path(cfg, id);
            if (!fs::exists(dp)) {
                missing.push_back(dp.string());
                continue;
            }
            DetectionResult det = read_detections_file(dp.string());
            std::vector<int> vs;
            for (const Detection& d : det.detections) vs.push_back(d.vertex);
            det_vertices.emplace(id, std::move(vs));
        }
    if (!missing.empty()) {
        std::string msg = "missing detection files:";
        for (const std::string& p : missing) msg += "\n  " + p;
        throw std::invalid_argument(msg);
    }

    fs::create_directories(fs::path(cfg.output_dir) / "curves");
    std::vector<double> r_grid = resolved_r_grid(cfg);
    std::vector<EvalCurve> means;
    std::vector<CrossvalCurve> cross;
    for (double sigma : cfg.sigmas)
        for (int n : cfg.eval_consensus) {
            std::vector<EvalCurve> fold_curves;
            for (std::size_t k = 0; k < folds.size(); ++k) {
                std::vector<ModelEvalInput> inputs;
                for (const std::string& id : folds[k].test) {
                    auto mit = meshes.find(id);
                    if (mit == meshes.end())
                        throw std::invalid_argument("fold manifest names unknown model: " + id);
                    fs::path gp = gt_path(cfg, id, sigma, n);
                    if (!fs::exists(gp))
                        throw std::invalid_argument("missing ground truth: " + gp.string());
                    GroundTruth gt = read_ground_truth_file(gp.string());
                    ModelEvalInput input;
                    input.mesh = &mit->second;
                    input.detections = det_vertices.at(id);
                    for (const GroundTruthPoint& p : gt.points)
                        input.gt.push_back(p.vertex);
                    inputs.push_back(std::move(input));
                }
                EvalCurve curve = sweep_model_set(inputs, sigma, n, r_grid);
                curve.config_hash = hash;
                curve.seed = cfg.seed;
                fold_curves.push_back(curve);
                write_curve_csv_file(curve,
                                     (fs::path(cfg.output_dir) / "curves" /
                                      ("fold" + std::to_string(k) + "_" +
                                       cell_name(sigma, n) + ".csv"))
                                         .string());
            }
            CrossvalCurve cv = crossval_aggregate(fold_curves);
            cv.mean.config_hash = hash;
            cv.mean.seed = cfg.seed;
            write_curve_csv_file(cv.mean, (fs::path(cfg.output_dir) / "curves" /
                                           ("curve_" + cell_name(sigma, n) + ".csv"))
                                              .string());
            std::cout << "curve " << cell_name(sigma, n) << ": auc_iou "
                      << cv.mean.auc_iou << "\n";
            means.push_back(cv.mean);
            cross.push_back(cv);
        }

    std::ofstream summary(fs::path(cfg.output_dir) / "curves" / "summary.txt");
    if (!summary) throw MeshError("cannot write eval summary");
    summary << "# config " << hex16(hash) << " seed " << cfg.seed << "\n";
    write_eval_summary(means, summary);
    for (std::size_t i = 0; i < cross.size(); ++i) {
        char line[200];
        std::snprintf(line, sizeof line,
                      "foldmean sigma=%.17g n=%d auc_iou=%.17g auc_fne=%.17g auc_fpe=%.17g\n",
                      means[i].sigma, means[i].consensus, cross[i].fold_auc_iou,
                      cross[i].fold_auc_fne, cross[i].fold_auc_fpe);
        summary << line;
    }
    return 0;
}

int cmd_curves(const Cli& cli) {
    RunConfig cfg = load_config(cli);
    prepare_output(cfg);
    std::vector<EvalCurve> curves;
    std::vector<std::string> missing;
    for (double sigma : cfg.sigmas)
        for (int n : cfg.eval_consensus) {
            fs::path p = fs::path(cfg.output_dir) / "curves" /
                         ("curve_" + cell_name(sigma, n) + ".csv");
            if (!fs::exists(p)) {
                missing.push_back(p.string());
                continue;
            }
            curves.push_back(read_curve_csv_file(p.string()));
        }
    if (!missing.empty()) {
        std::string msg = "missing curve files (run eval first):";
        for (const std::string& p : missing) msg += "\n  " + p;
        throw std::invalid_argument(msg);
    }
    fs::path out = fs::path(cfg.output_dir) / "curves" / "curves.svg";
    std::ofstream svg(out);
    if (!svg) throw MeshError("cannot write " + out.string());
    svg << curves_svg(curves);
    std::cout << out.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mesh interest point pipeline"};
    app.require_subcommand(1);
    app.fallthrough();

    Cli cli;
    app.add_option("--config", cli.config_path, "run configuration file")->required();
    auto* seed_opt = app.add_option("--seed", cli.seed, "override the config seed");
    app.add_option("--jobs", cli.jobs, "worker threads (0 = all cores)");
    app.add_flag("--force", cli.force, "recompute outputs that look up to date");

    auto* attributes = app.add_subcommand("attributes", "extract per-vertex attributes");
    auto* cluster = app.add_subcommand("cluster-gt", "cluster clicks into ground truth");
    auto* train = app.add_subcommand("train", "train per-fold forests");
    auto* detect = app.add_subcommand("detect", "score and suppress test vertices");
    auto* eval = app.add_subcommand("eval", "sweep matching tolerances into curves");
    auto* curves = app.add_subcommand("curves", "render curve CSVs as SVG");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) ? 1 : 0;
    }
    cli.seed_set = seed_opt->count() > 0;

    try {
        if (attributes->parsed()) return cmd_attributes(cli);
        if (cluster->parsed()) return cmd_cluster_gt(cli);
        if (train->parsed()) return cmd_train(cli);
        if (detect->parsed()) return cmd_detect(cli);
        if (eval->parsed()) return cmd_eval(cli);
        if (curves->parsed()) return cmd_curves(cli);
    } catch (const ParseError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const MeshError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const ForestError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::invalid_argument& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 2;
    }
    return 2;
}
