#pragma once

#include "ipd/rng.hpp"

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

namespace ipd {

struct ForestError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TreeNode {
    int attribute = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    long count0 = 0;  // training rows per class at this node
    long count1 = 0;
    double p1 = 0.0;  // interest proportion, meaningful at leaves

    bool is_leaf() const { return attribute < 0; }
};

struct DecisionTree {
    std::vector<TreeNode> nodes;  // node 0 is the root
};

struct RandomForestModel {
    int attribute_count = 0;  // p
    int node_features = 0;    // m
    int tree_count = 0;       // T
    std::uint64_t seed = 0;
    int schema_version = 1;
    std::vector<DecisionTree> trees;
};

struct TrainingSet {
    Eigen::MatrixXd features;
    std::vector<int> labels;             // 0 = non-interest, 1 = interest
    std::vector<std::string> row_model;  // stable per-row identity, for
    std::vector<int> row_vertex;         // order-independent sampling

    int row_count() const { return int(features.rows()); }
};

// g(parent) - nL/n g(left) - nR/n g(right) with g = 1 - sum p_c^2.
// Throws if the parent is empty or the children do not sum to it.
double gini_gain(const std::array<long, 2>& parent, const std::array<long, 2>& left,
                 const std::array<long, 2>& right);

// Row positions sorted by (model, vertex) identity, so sampling does not
// depend on input row order.
std::vector<int> stable_order(const TrainingSet& data);

// The once-per-run positive pool: n = max(1, positives/2) distinct positive
// rows. Draws from rng; row order comes from stable_order.
std::vector<int> select_positive_pool(const TrainingSet& data, Rng& rng);

// Per-tree sample: |pool| positives with replacement from the pool, then
// round(ratio * |pool|) negatives with replacement from all negatives.
std::vector<int> balanced_bootstrap(const TrainingSet& data,
                                    const std::vector<int>& positive_pool,
                                    double ratio, Rng& rng);

// Classic bootstrap over all rows, for the unbalanced ablation.
std::vector<int> plain_bootstrap(const TrainingSet& data, Rng& rng);

// Node-level audit record: which rows and attribute subset a node saw.
struct NodeTrace {
    int node = -1;
    std::vector<int> rows;
    std::vector<int> attributes;
};

// Unpruned tree over the given rows. At each node: draw m attributes without
// replacement, enumerate midpoints between consecutive distinct values, keep
// the split maximizing Gini gain (ties: lowest attribute, lowest threshold).
// Stops at purity, single row, or no positive gain.
DecisionTree grow_tree(const TrainingSet& data, const std::vector<int>& rows, int m,
                       Rng& rng, std::vector<NodeTrace>* trace = nullptr);

struct TrainOptions {
    int tree_count = 100;
    int node_features = 0;  // 0 means floor(sqrt(p))
    double ratio = 1.0;     // negatives per positive in each bootstrap
    std::uint64_t seed = 0;
    int jobs = 1;
    bool balanced = true;  // false switches to plain_bootstrap (ablation)
};

RandomForestModel train_forest(const TrainingSet& data, const TrainOptions& opts);

// Mean leaf interest proportion over trees.
double predict_proba(const RandomForestModel& model,
                     const Eigen::Ref<const Eigen::RowVectorXd>& row);

// Majority vote of per-tree leaf-majority labels; ties go to non-interest.
int predict_label(const RandomForestModel& model,
                  const Eigen::Ref<const Eigen::RowVectorXd>& row);

Eigen::VectorXd predict_proba_all(const RandomForestModel& model,
                                  const Eigen::MatrixXd& rows, int jobs = 1);

std::string forest_to_json(const RandomForestModel& model);
RandomForestModel forest_from_json(const std::string& text);
void write_forest_file(const RandomForestModel& model, const std::string& path);
RandomForestModel read_forest_file(const std::string& path);

} // namespace ipd
