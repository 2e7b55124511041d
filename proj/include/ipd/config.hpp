#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

namespace ipd {

// Everything a pipeline run needs, loadable from one JSON file.  Fold
// membership may be listed explicitly; otherwise models are dealt into
// fold_count folds by a seeded shuffle.
struct RunConfig {
    std::string mesh_dir;
    std::string clicks_dir;
    std::string output_dir;
    double delta_fraction = 0.003;
    int neighbors = 100;
    int trees = 100;
    int node_features = 5;
    double ratio = 1.0;
    std::uint64_t seed = 0;
    double nms_c = 5.0;
    std::vector<std::vector<std::string>> folds;  // empty: random assignment
    int fold_count = 3;
    std::vector<double> sigmas = {0.03, 0.05};
    int label_n_lo = 2;
    int label_n_hi = 8;
    std::vector<int> eval_consensus = {2, 8};
    std::vector<double> r_grid;  // empty: 0, 0.01, ..., 0.12
};

RunConfig config_from_json(const nlohmann::json& j);
nlohmann::json config_to_json(const RunConfig& cfg);

RunConfig read_config_file(const std::string& path);
void write_config_file(const RunConfig& cfg, const std::string& path);

// FNV-1a over the canonical serialization; stamped into every output file.
std::uint64_t config_hash(const RunConfig& cfg);

// Resolved grids (defaults filled in).
std::vector<double> resolved_r_grid(const RunConfig& cfg);

// Explicit folds validated against the model list, or a seeded random deal.
std::vector<std::vector<std::string>> assign_folds(const RunConfig& cfg,
                                                   const std::vector<std::string>& models);

} // namespace ipd
