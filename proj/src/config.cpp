#include "ipd/config.hpp"

#include "ipd/evaluation.hpp"
#include "ipd/hash.hpp"
#include "ipd/mesh.hpp"
#include "ipd/rng.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <stdexcept>

namespace ipd {

namespace {

const char* kKnownKeys[] = {
    "mesh_dir",   "clicks_dir",    "output_dir", "delta_fraction", "neighbors",
    "trees",      "node_features", "ratio",      "seed",           "nms_c",
    "folds",      "fold_count",    "sigmas",     "label_n_lo",     "label_n_hi",
    "eval_consensus", "r_grid"};

void reject_unknown_keys(const nlohmann::json& j) {
    for (auto it = j.begin(); it != j.end(); ++it) {
        bool known = false;
        for (const char* k : kKnownKeys)
            if (it.key() == k) {
                known = true;
                break;
            }
        if (!known) throw std::invalid_argument("unknown config key: " + it.key());
    }
}

void validate(const RunConfig& cfg) {
    if (cfg.mesh_dir.empty()) throw std::invalid_argument("mesh_dir is required");
    if (cfg.output_dir.empty()) throw std::invalid_argument("output_dir is required");
    if (!(cfg.delta_fraction > 0.0))
        throw std::invalid_argument("delta_fraction must be positive");
    if (cfg.neighbors < 1) throw std::invalid_argument("neighbors must be >= 1");
    if (cfg.trees < 1) throw std::invalid_argument("trees must be >= 1");
    if (cfg.node_features < 0)
        throw std::invalid_argument("node_features must be >= 0");
    if (!(cfg.ratio > 0.0)) throw std::invalid_argument("ratio must be positive");
    if (!(cfg.nms_c > 0.0)) throw std::invalid_argument("nms_c must be positive");
    if (cfg.folds.empty() && cfg.fold_count < 2)
        throw std::invalid_argument("fold_count must be >= 2");
    if (cfg.sigmas.empty()) throw std::invalid_argument("sigmas must be nonempty");
    for (double s : cfg.sigmas)
        if (!(s > 0.0) || s > 0.1)
            throw std::invalid_argument("sigma values must lie in (0, 0.1]");
    if (cfg.label_n_lo < 1) throw std::invalid_argument("label_n_lo must be >= 1");
    if (cfg.label_n_hi < cfg.label_n_lo)
        throw std::invalid_argument("label_n_hi must be >= label_n_lo");
    if (cfg.eval_consensus.empty())
        throw std::invalid_argument("eval_consensus must be nonempty");
    for (int n : cfg.eval_consensus)
        if (n < 1) throw std::invalid_argument("eval_consensus values must be >= 1");
    for (std::size_t i = 0; i < cfg.r_grid.size(); ++i) {
        if (cfg.r_grid[i] < 0.0)
            throw std::invalid_argument("r_grid values must be >= 0");
        if (i > 0 && cfg.r_grid[i] <= cfg.r_grid[i - 1])
            throw std::invalid_argument("r_grid must strictly ascend");
    }
}

} // namespace

RunConfig config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw std::invalid_argument("config must be a JSON object");
    reject_unknown_keys(j);
    RunConfig cfg;
    try {
        cfg.mesh_dir = j.at("mesh_dir").get<std::string>();
        cfg.output_dir = j.at("output_dir").get<std::string>();
        if (j.contains("clicks_dir")) cfg.clicks_dir = j["clicks_dir"].get<std::string>();
        if (j.contains("delta_fraction")) cfg.delta_fraction = j["delta_fraction"].get<double>();
        if (j.contains("neighbors")) cfg.neighbors = j["neighbors"].get<int>();
        if (j.contains("trees")) cfg.trees = j["trees"].get<int>();
        if (j.contains("node_features")) cfg.node_features = j["node_features"].get<int>();
        if (j.contains("ratio")) cfg.ratio = j["ratio"].get<double>();
        if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
        if (j.contains("nms_c")) cfg.nms_c = j["nms_c"].get<double>();
        if (j.contains("folds"))
            cfg.folds = j["folds"].get<std::vector<std::vector<std::string>>>();
        if (j.contains("fold_count")) cfg.fold_count = j["fold_count"].get<int>();
        if (j.contains("sigmas")) cfg.sigmas = j["sigmas"].get<std::vector<double>>();
        if (j.contains("label_n_lo")) cfg.label_n_lo = j["label_n_lo"].get<int>();
        if (j.contains("label_n_hi")) cfg.label_n_hi = j["label_n_hi"].get<int>();
        if (j.contains("eval_consensus"))
            cfg.eval_consensus = j["eval_consensus"].get<std::vector<int>>();
        if (j.contains("r_grid")) cfg.r_grid = j["r_grid"].get<std::vector<double>>();
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("bad config value: ") + e.what());
    }
    validate(cfg);
    return cfg;
}

nlohmann::json config_to_json(const RunConfig& cfg) {
    nlohmann::json j;
    j["mesh_dir"] = cfg.mesh_dir;
    j["clicks_dir"] = cfg.clicks_dir;
    j["output_dir"] = cfg.output_dir;
    j["delta_fraction"] = cfg.delta_fraction;
    j["neighbors"] = cfg.neighbors;
    j["trees"] = cfg.trees;
    j["node_features"] = cfg.node_features;
    j["ratio"] = cfg.ratio;
    j["seed"] = cfg.seed;
    j["nms_c"] = cfg.nms_c;
    j["folds"] = cfg.folds;
    j["fold_count"] = cfg.fold_count;
    j["sigmas"] = cfg.sigmas;
    j["label_n_lo"] = cfg.label_n_lo;
    j["label_n_hi"] = cfg.label_n_hi;
    j["eval_consensus"] = cfg.eval_consensus;
    j["r_grid"] = cfg.r_grid;
    return j;
}

RunConfig read_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::invalid_argument("cannot open config file: " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
    try {
        return config_from_json(j);
    } catch (const std::invalid_argument& e) {
        throw std::invalid_argument(path + ": " + e.what());
    }
}

void write_config_file(const RunConfig& cfg, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw MeshError("cannot write config file: " + path);
    out << config_to_json(cfg).dump(2) << '\n';
    if (!out) throw MeshError("failed writing config file: " + path);
}

std::uint64_t config_hash(const RunConfig& cfg) {
    return fnv1a(config_to_json(cfg).dump());
}

std::vector<double> resolved_r_grid(const RunConfig& cfg) {
    return cfg.r_grid.empty() ? default_r_grid() : cfg.r_grid;
}

std::vector<std::vector<std::string>> assign_folds(const RunConfig& cfg,
                                                   const std::vector<std::string>& models) {
    if (models.empty()) throw std::invalid_argument("no models to assign to folds");
    if (!cfg.folds.empty()) {
        std::set<std::string> pool(models.begin(), models.end());
        if (pool.size() != models.size())
            throw std::invalid_argument("duplicate model ids");
        if (cfg.folds.size() < 2)
            throw std::invalid_argument("need at least 2 folds");
        std::set<std::string> seen;
        for (const auto& fold : cfg.folds) {
            if (fold.empty()) throw std::invalid_argument("empty fold in config");
            for (const std::string& m : fold) {
                if (!pool.count(m))
                    throw std::invalid_argument("fold lists unknown model: " + m);
                if (!seen.insert(m).second)
                    throw std::invalid_argument("model in multiple folds: " + m);
            }
        }
        if (seen.size() != pool.size())
            for (const std::string& m : models)
                if (!seen.count(m))
                    throw std::invalid_argument("model missing from folds: " + m);
        return cfg.folds;
    }
    if (cfg.fold_count > int(models.size()))
        throw std::invalid_argument("fold_count exceeds model count");
    std::vector<std::string> shuffled(models);
    std::sort(shuffled.begin(), shuffled.end());
    Rng rng(cfg.seed, rng_stream::kFoldAssignment);
    rng.shuffle(shuffled.data(), shuffled.size());
    std::vector<std::vector<std::string>> folds(std::size_t(cfg.fold_count));
    for (std::size_t i = 0; i < shuffled.size(); ++i)
        folds[i % folds.size()].push_back(shuffled[i]);
    for (auto& fold : folds) std::sort(fold.begin(), fold.end());
    return folds;
}

} // namespace ipd
