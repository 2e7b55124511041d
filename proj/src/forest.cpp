#include "ipd/forest.hpp"

#include "ipd/parallel.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>

namespace ipd {

namespace {

double gini(const std::array<long, 2>& counts) {
    const double n = double(counts[0] + counts[1]);
    const double p0 = counts[0] / n, p1 = counts[1] / n;
    return 1.0 - (p0 * p0 + p1 * p1);
}

void check_training_set(const TrainingSet& data) {
    const int n = data.row_count();
    if (int(data.labels.size()) != n || int(data.row_model.size()) != n ||
        int(data.row_vertex.size()) != n)
        throw ForestError("training set field lengths disagree");
    for (int i = 0; i < n; ++i)
        if (data.labels[i] != 0 && data.labels[i] != 1)
            throw ForestError("labels must be 0 or 1");
    if (!data.features.allFinite())
        throw ForestError("training features must be finite");
}

std::vector<int> sample_attributes(int p, int m, Rng& rng) {
    std::vector<int> all(p);
    std::iota(all.begin(), all.end(), 0);
    for (int i = 0; i < m; ++i) {
        int j = i + int(rng.below(std::uint64_t(p - i)));
        std::swap(all[i], all[j]);
    }
    all.resize(m);
    return all;
}

} // namespace

double gini_gain(const std::array<long, 2>& parent, const std::array<long, 2>& left,
                 const std::array<long, 2>& right) {
    const long n = parent[0] + parent[1];
    if (n <= 0) throw ForestError("gini_gain: empty parent");
    if (left[0] + right[0] != parent[0] || left[1] + right[1] != parent[1])
        throw ForestError("gini_gain: children do not partition the parent");
    if (left[0] < 0 || left[1] < 0 || right[0] < 0 || right[1] < 0)
        throw ForestError("gini_gain: negative counts");
    const long nl = left[0] + left[1], nr = right[0] + right[1];
    double gain = gini(parent);
    if (nl > 0) gain -= double(nl) / double(n) * gini(left);
    if (nr > 0) gain -= double(nr) / double(n) * gini(right);
    return gain;
}

std::vector<int> stable_order(const TrainingSet& data) {
    std::vector<int> order(data.row_count());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        if (data.row_model[a] != data.row_model[b])
            return data.row_model[a] < data.row_model[b];
        if (data.row_vertex[a] != data.row_vertex[b])
            return data.row_vertex[a] < data.row_vertex[b];
        return a < b;
    });
    return order;
}

std::vector<int> select_positive_pool(const TrainingSet& data, Rng& rng) {
    std::vector<int> positives;
    for (int r : stable_order(data))
        if (data.labels[r] == 1) positives.push_back(r);
    if (positives.empty()) throw ForestError("no positive rows to pool");
    const int n = std::max(1, int(positives.size() / 2));
    for (int i = 0; i < n; ++i) {
        int j = i + int(rng.below(std::uint64_t(positives.size() - i)));
        std::swap(positives[i], positives[j]);
    }
    positives.resize(n);
    return positives;
}

std::vector<int> balanced_bootstrap(const TrainingSet& data,
                                    const std::vector<int>& positive_pool,
                                    double ratio, Rng& rng) {
    if (positive_pool.empty()) throw ForestError("empty positive pool");
    std::vector<int> negatives;
    for (int r : stable_order(data))
        if (data.labels[r] == 0) negatives.push_back(r);
    if (negatives.empty()) throw ForestError("no negative rows to sample");

    const int n = int(positive_pool.size());
    const int k = std::max(1, int(std::llround(ratio * n)));
    std::vector<int> rows;
    rows.reserve(std::size_t(n + k));
    for (int i = 0; i < n; ++i)
        rows.push_back(positive_pool[rng.below(std::uint64_t(n))]);
    for (int i = 0; i < k; ++i)
        rows.push_back(negatives[rng.below(negatives.size())]);
    return rows;
}

std::vector<int> plain_bootstrap(const TrainingSet& data, Rng& rng) {
    std::vector<int> order = stable_order(data);
    if (order.empty()) throw ForestError("empty training set");
    std::vector<int> rows(order.size());
    for (std::size_t i = 0; i < order.size(); ++i)
        rows[i] = order[rng.below(order.size())];
    return rows;
}

namespace {

struct GrowContext {
    const TrainingSet& data;
    int m;
    Rng& rng;
    DecisionTree& tree;
    std::vector<NodeTrace>* trace;
};

int grow_node(GrowContext& ctx, const std::vector<int>& rows) {
    const int id = int(ctx.tree.nodes.size());
    ctx.tree.nodes.push_back({});

    std::array<long, 2> counts{0, 0};
    for (int r : rows) ++counts[std::size_t(ctx.data.labels[r])];
    ctx.tree.nodes[id].count0 = counts[0];
    ctx.tree.nodes[id].count1 = counts[1];

    auto make_leaf = [&] {
        ctx.tree.nodes[id].p1 = double(counts[1]) / double(counts[0] + counts[1]);
        return id;
    };
    if (rows.size() <= 1 || counts[0] == 0 || counts[1] == 0) return make_leaf();

    const int p = int(ctx.data.features.cols());
    std::vector<int> attrs = sample_attributes(p, ctx.m, ctx.rng);
    if (ctx.trace) ctx.trace->push_back({id, rows, attrs});

    int best_attr = -1;
    double best_thr = 0.0, best_gain = 0.0;
    std::vector<std::pair<double, int>> vals(rows.size());
    for (int a : attrs) {
        for (std::size_t i = 0; i < rows.size(); ++i)
            vals[i] = {ctx.data.features(rows[i], a), ctx.data.labels[rows[i]]};
        std::sort(vals.begin(), vals.end());
        std::array<long, 2> left{0, 0};
        for (std::size_t i = 0; i + 1 < vals.size(); ++i) {
            ++left[std::size_t(vals[i].second)];
            if (vals[i].first == vals[i + 1].first) continue;
            double t = 0.5 * (vals[i].first + vals[i + 1].first);
            if (t >= vals[i + 1].first) t = vals[i].first;  // keep the cut between groups
            std::array<long, 2> right{counts[0] - left[0], counts[1] - left[1]};
            double gain = gini_gain(counts, left, right);
            bool better = gain > best_gain;
            if (!better && best_attr >= 0 && gain == best_gain)
                better = a < best_attr || (a == best_attr && t < best_thr);
            if (better) {
                best_attr = a;
                best_thr = t;
                best_gain = gain;
            }
        }
    }
    if (best_attr < 0) return make_leaf();

    std::vector<int> left_rows, right_rows;
    for (int r : rows)
        (ctx.data.features(r, best_attr) <= best_thr ? left_rows : right_rows)
            .push_back(r);

    ctx.tree.nodes[id].attribute = best_attr;
    ctx.tree.nodes[id].threshold = best_thr;
    const int left_id = grow_node(ctx, left_rows);
    const int right_id = grow_node(ctx, right_rows);
    ctx.tree.nodes[id].left = left_id;
    ctx.tree.nodes[id].right = right_id;
    return id;
}

} // namespace

DecisionTree grow_tree(const TrainingSet& data, const std::vector<int>& rows, int m,
                       Rng& rng, std::vector<NodeTrace>* trace) {
    if (rows.empty()) throw ForestError("grow_tree: no rows");
    const int p = int(data.features.cols());
    if (p < 1) throw ForestError("grow_tree: no attributes");
    DecisionTree tree;
    GrowContext ctx{data, std::clamp(m, 1, p), rng, tree, trace};
    grow_node(ctx, rows);
    return tree;
}

RandomForestModel train_forest(const TrainingSet& data, const TrainOptions& opts) {
    check_training_set(data);
    if (opts.tree_count < 1) throw ForestError("tree count must be >= 1");
    const int p = int(data.features.cols());
    if (p < 1) throw ForestError("training set has no attributes");
    long pos = 0, neg = 0;
    for (int label : data.labels) (label == 1 ? pos : neg) += 1;
    if (opts.balanced && (pos == 0 || neg == 0))
        throw ForestError("balanced training needs both classes present");
    if (!opts.balanced && pos + neg == 0) throw ForestError("empty training set");

    RandomForestModel model;
    model.attribute_count = p;
    model.node_features =
        opts.node_features > 0
            ? std::min(opts.node_features, p)
            : std::max(1, int(std::floor(std::sqrt(double(p)))));
    model.tree_count = opts.tree_count;
    model.seed = opts.seed;
    model.trees.resize(std::size_t(opts.tree_count));

    std::vector<int> pool;
    if (opts.balanced) {
        Rng pool_rng(opts.seed, rng_stream::kPositivePool);
        pool = select_positive_pool(data, pool_rng);
    }

    parallel_for(opts.tree_count, opts.jobs, [&](int t) {
        Rng rng(opts.seed, rng_stream::tree(std::uint64_t(t)));
        std::vector<int> rows = opts.balanced
                                    ? balanced_bootstrap(data, pool, opts.ratio, rng)
                                    : plain_bootstrap(data, rng);
        model.trees[std::size_t(t)] = grow_tree(data, rows, model.node_features, rng);
    });
    return model;
}

namespace {

const TreeNode& leaf_for(const DecisionTree& tree,
                         const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    int id = 0;
    while (!tree.nodes[std::size_t(id)].is_leaf()) {
        const TreeNode& node = tree.nodes[std::size_t(id)];
        id = row[node.attribute] <= node.threshold ? node.left : node.right;
    }
    return tree.nodes[std::size_t(id)];
}

void check_row(const RandomForestModel& model,
               const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    if (int(row.size()) != model.attribute_count)
        throw ForestError("feature width " + std::to_string(row.size()) +
                          " does not match model attribute count " +
                          std::to_string(model.attribute_count));
}

} // namespace

double predict_proba(const RandomForestModel& model,
                     const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    check_row(model, row);
    double sum = 0.0;
    for (const DecisionTree& tree : model.trees) sum += leaf_for(tree, row).p1;
    return sum / double(model.trees.size());
}

int predict_label(const RandomForestModel& model,
                  const Eigen::Ref<const Eigen::RowVectorXd>& row) {
    check_row(model, row);
    long votes = 0;
    for (const DecisionTree& tree : model.trees) {
        const TreeNode& leaf = leaf_for(tree, row);
        if (leaf.count1 > leaf.count0) ++votes;
    }
    return 2 * votes > long(model.trees.size()) ? 1 : 0;
}

Eigen::VectorXd predict_proba_all(const RandomForestModel& model,
                                  const Eigen::MatrixXd& rows, int jobs) {
    Eigen::VectorXd out(rows.rows());
    parallel_for(int(rows.rows()), jobs,
                 [&](int i) { out[i] = predict_proba(model, rows.row(i)); });
    return out;
}

std::string forest_to_json(const RandomForestModel& model) {
    nlohmann::json j;
    j["format"] = "ipd-forest";
    j["version"] = 1;
    j["p"] = model.attribute_count;
    j["m"] = model.node_features;
    j["T"] = model.tree_count;
    j["seed"] = model.seed;
    j["schema"] = model.schema_version;
    nlohmann::json trees = nlohmann::json::array();
    for (const DecisionTree& tree : model.trees) {
        nlohmann::json t;
        auto& attr = t["attr"] = nlohmann::json::array();
        auto& thr = t["thr"] = nlohmann::json::array();
        auto& left = t["left"] = nlohmann::json::array();
        auto& right = t["right"] = nlohmann::json::array();
        auto& n0 = t["n0"] = nlohmann::json::array();
        auto& n1 = t["n1"] = nlohmann::json::array();
        for (const TreeNode& node : tree.nodes) {
            attr.push_back(node.attribute);
            thr.push_back(node.threshold);
            left.push_back(node.left);
            right.push_back(node.right);
            n0.push_back(node.count0);
            n1.push_back(node.count1);
        }
        trees.push_back(std::move(t));
    }
    j["trees"] = std::move(trees);
    return j.dump();
}

RandomForestModel forest_from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ForestError(std::string("forest model is not valid JSON: ") + e.what());
    }
    try {
        if (j.at("format") != "ipd-forest") throw ForestError("not an ipd-forest file");
        if (j.at("version") != 1)
            throw ForestError("unsupported ipd-forest version");
        RandomForestModel model;
        model.attribute_count = j.at("p").get<int>();
        model.node_features = j.at("m").get<int>();
        model.tree_count = j.at("T").get<int>();
        model.seed = j.at("seed").get<std::uint64_t>();
        model.schema_version = j.at("schema").get<int>();
        for (const auto& t : j.at("trees")) {
            const auto& attr = t.at("attr");
            const auto& thr = t.at("thr");
            const auto& left = t.at("left");
            const auto& right = t.at("right");
            const auto& n0 = t.at("n0");
            const auto& n1 = t.at("n1");
            const std::size_t size = attr.size();
            if (size == 0 || thr.size() != size || left.size() != size ||
                right.size() != size || n0.size() != size || n1.size() != size)
                throw ForestError("malformed tree arrays");
            DecisionTree tree;
            tree.nodes.resize(size);
            for (std::size_t i = 0; i < size; ++i) {
                TreeNode& node = tree.nodes[i];
                node.attribute = attr[i].get<int>();
                node.threshold = thr[i].get<double>();
                node.left = left[i].get<int>();
                node.right = right[i].get<int>();
                node.count0 = n0[i].get<long>();
                node.count1 = n1[i].get<long>();
                if (node.is_leaf()) {
                    if (node.left != -1 || node.right != -1)
                        throw ForestError("leaf with children");
                    if (node.count0 < 0 || node.count1 < 0 ||
                        node.count0 + node.count1 == 0)
                        throw ForestError("leaf with invalid counts");
                    node.p1 = double(node.count1) / double(node.count0 + node.count1);
                } else {
                    if (node.attribute >= model.attribute_count)
                        throw ForestError("split attribute out of range");
                    if (!std::isfinite(node.threshold))
                        throw ForestError("split threshold not finite");
                    // children always follow their parent, which rules out cycles
                    if (node.left <= int(i) || node.left >= int(size) ||
                        node.right <= int(i) || node.right >= int(size))
                        throw ForestError("tree child indices out of order");
                }
            }
            model.trees.push_back(std::move(tree));
        }
        if (int(model.trees.size()) != model.tree_count)
            throw ForestError("tree count does not match T");
        return model;
    } catch (const nlohmann::json::exception& e) {
        throw ForestError(std::string("malformed forest model: ") + e.what());
    }
}

void write_forest_file(const RandomForestModel& model, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw ForestError("cannot write model file: " + path);
    out << forest_to_json(model) << '\n';
    if (!out) throw ForestError("failed writing model file: " + path);
}

RandomForestModel read_forest_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ForestError("cannot open model file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return forest_from_json(buf.str());
}

} // namespace ipd
