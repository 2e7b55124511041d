#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "ipd/forest.hpp"
#include "support/oracles.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numbers>
#include <set>

using namespace ipd;

namespace {

TrainingSet random_set(int n, int p, Rng& rng, double positive_share = 0.5) {
    TrainingSet data;
    data.features.resize(n, p);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) data.features(i, j) = rng.uniform();
    data.labels.resize(std::size_t(n));
    data.row_model.resize(std::size_t(n));
    data.row_vertex.resize(std::size_t(n));
    for (int i = 0; i < n; ++i) {
        data.labels[std::size_t(i)] = rng.uniform() < positive_share ? 1 : 0;
        data.row_model[std::size_t(i)] = "m" + std::to_string(i % 3);
        data.row_vertex[std::size_t(i)] = i;
    }
    return data;
}

TrainingSet permuted(const TrainingSet& data, Rng& rng) {
    std::vector<int> perm(std::size_t(data.row_count()));
    for (std::size_t i = 0; i < perm.size(); ++i) perm[i] = int(i);
    rng.shuffle(perm.data(), perm.size());
    TrainingSet out;
    out.features.resize(data.features.rows(), data.features.cols());
    out.labels.resize(perm.size());
    out.row_model.resize(perm.size());
    out.row_vertex.resize(perm.size());
    for (std::size_t i = 0; i < perm.size(); ++i) {
        out.features.row(long(i)) = data.features.row(perm[i]);
        out.labels[i] = data.labels[std::size_t(perm[i])];
        out.row_model[i] = data.row_model[std::size_t(perm[i])];
        out.row_vertex[i] = data.row_vertex[std::size_t(perm[i])];
    }
    return out;
}

// two interleaved half-moons with uniform jitter, plus noise columns
void fill_moons(TrainingSet& data, int n, int noise_cols, Rng& rng, double jitter) {
    data.features.resize(n, 2 + noise_cols);
    data.labels.resize(std::size_t(n));
    data.row_model.resize(std::size_t(n));
    data.row_vertex.resize(std::size_t(n));
    for (int i = 0; i < n; ++i) {
        int label = i % 2;
        double t = std::numbers::pi * rng.uniform();
        double x, y;
        if (label == 0) {
            x = std::cos(t);
            y = std::sin(t);
        } else {
            x = 1.0 - std::cos(t);
            y = 0.5 - std::sin(t);
        }
        data.features(i, 0) = x + jitter * (2.0 * rng.uniform() - 1.0);
        data.features(i, 1) = y + jitter * (2.0 * rng.uniform() - 1.0);
        for (int j = 2; j < 2 + noise_cols; ++j) data.features(i, j) = rng.uniform();
        data.labels[std::size_t(i)] = label;
        data.row_model[std::size_t(i)] = "moons";
        data.row_vertex[std::size_t(i)] = i;
    }
}

std::set<int> index_set(const std::vector<int>& v) { return {v.begin(), v.end()}; }

} // namespace

TEST_CASE("gini gain on worked examples") {
    CHECK(gini_gain({5, 5}, {5, 0}, {0, 5}) == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(gini_gain({4, 4}, {4, 4}, {0, 0}) == doctest::Approx(0.0).epsilon(1e-15));
    // parent {8,4}: g = 1 - (64 + 16) / 144 = 4/9; pure children take it all
    CHECK(gini_gain({8, 4}, {8, 0}, {0, 4}) == doctest::Approx(4.0 / 9.0).epsilon(1e-15));
    // half the positives split off cleanly
    double parent_g = 0.5;
    double left_g = 0.0, right_g = 1.0 - (4.0 / 36.0 + 16.0 / 36.0);
    CHECK(gini_gain({4, 4}, {0, 2}, {4, 2}) ==
          doctest::Approx(parent_g - 0.25 * left_g - 0.75 * right_g).epsilon(1e-15));
}

TEST_CASE("gini gain matches the hand formula on random triples") {
    Rng rng(3, 11);
    for (int trial = 0; trial < 300; ++trial) {
        std::array<long, 2> left{long(rng.below(50)), long(rng.below(50))};
        std::array<long, 2> right{long(rng.below(50)), long(rng.below(50))};
        std::array<long, 2> parent{left[0] + right[0], left[1] + right[1]};
        if (parent[0] + parent[1] == 0) continue;
        CHECK(gini_gain(parent, left, right) ==
              doctest::Approx(gini_gain_hand(parent, left, right)).epsilon(1e-12));
    }
}

TEST_CASE("gini gain rejects inconsistent counts") {
    CHECK_THROWS_AS(gini_gain({0, 0}, {0, 0}, {0, 0}), ForestError);
    CHECK_THROWS_AS(gini_gain({3, 3}, {1, 1}, {1, 1}), ForestError);
    CHECK_THROWS_AS(gini_gain({1, 1}, {2, 1}, {-1, 0}), ForestError);
}

TEST_CASE("stable_order sorts by model then vertex") {
    TrainingSet data;
    data.features.resize(4, 1);
    data.features.setZero();
    data.labels = {0, 1, 0, 1};
    data.row_model = {"b", "a", "a", "b"};
    data.row_vertex = {0, 5, 2, 1};
    std::vector<int> order = stable_order(data);
    CHECK(order == std::vector<int>{2, 1, 3, 0});
}

TEST_CASE("positive pool picks half the positives, at least one") {
    auto pool_of = [](int positives, int negatives) {
        TrainingSet data;
        int n = positives + negatives;
        data.features.resize(n, 1);
        data.features.setZero();
        for (int i = 0; i < n; ++i) {
            data.labels.push_back(i < positives ? 1 : 0);
            data.row_model.push_back("m");
            data.row_vertex.push_back(i);
        }
        Rng rng(9, rng_stream::kPositivePool);
        return std::pair(select_positive_pool(data, rng), data);
    };

    auto [pool7, data7] = pool_of(7, 3);
    CHECK(pool7.size() == 3);
    std::set<int> distinct(pool7.begin(), pool7.end());
    CHECK(distinct.size() == pool7.size());
    for (int r : pool7) CHECK(data7.labels[std::size_t(r)] == 1);

    CHECK(pool_of(1, 5).first.size() == 1);
    CHECK(pool_of(2, 5).first.size() == 1);
    CHECK(pool_of(100, 0).first.size() == 50);
}

TEST_CASE("positive pool is identity-stable under row shuffles") {
    Rng data_rng(15, 12);
    TrainingSet data = random_set(60, 3, data_rng);
    Rng shuffle_rng(16, 13);
    TrainingSet shuffled = permuted(data, shuffle_rng);

    Rng r1(42, rng_stream::kPositivePool), r2(42, rng_stream::kPositivePool);
    auto ids = [](const TrainingSet& d, const std::vector<int>& pool) {
        std::set<std::pair<std::string, int>> s;
        for (int r : pool)
            s.insert({d.row_model[std::size_t(r)], d.row_vertex[std::size_t(r)]});
        return s;
    };
    CHECK(ids(data, select_positive_pool(data, r1)) ==
          ids(shuffled, select_positive_pool(shuffled, r2)));

    TrainingSet no_pos = data;
    std::fill(no_pos.labels.begin(), no_pos.labels.end(), 0);
    Rng r3(42, rng_stream::kPositivePool);
    CHECK_THROWS_AS(select_positive_pool(no_pos, r3), ForestError);
}

TEST_CASE("balanced bootstrap draws pool positives then ratio negatives") {
    Rng data_rng(21, 14);
    TrainingSet data = random_set(80, 2, data_rng, 0.3);
    Rng pool_rng(7, rng_stream::kPositivePool);
    std::vector<int> pool = select_positive_pool(data, pool_rng);
    std::set<int> pool_set = index_set(pool);

    for (double ratio : {1.0, 0.1, 2.5}) {
        Rng rng(7, rng_stream::tree(0));
        std::vector<int> rows = balanced_bootstrap(data, pool, ratio, rng);
        int n = int(pool.size());
        int k = std::max(1, int(std::llround(ratio * n)));
        REQUIRE(int(rows.size()) == n + k);
        for (int i = 0; i < n; ++i) CHECK(pool_set.count(rows[std::size_t(i)]) == 1);
        for (int i = n; i < n + k; ++i)
            CHECK(data.labels[std::size_t(rows[std::size_t(i)])] == 0);
    }

    // same seed, same sample
    Rng a(7, rng_stream::tree(3)), b(7, rng_stream::tree(3));
    CHECK(balanced_bootstrap(data, pool, 1.0, a) == balanced_bootstrap(data, pool, 1.0, b));

    // every pool member shows up over many resamples
    std::set<int> seen;
    for (int t = 0; t < 200; ++t) {
        Rng rng(7, rng_stream::tree(std::uint64_t(t)));
        for (int i = 0; i < int(pool.size()); ++i)
            seen.insert(balanced_bootstrap(data, pool, 1.0, rng)[std::size_t(i)]);
    }
    CHECK(seen == pool_set);
}

TEST_CASE("plain bootstrap draws the full row count with replacement") {
    Rng data_rng(23, 15);
    TrainingSet data = random_set(50, 2, data_rng);
    Rng rng(5, rng_stream::tree(0));
    std::vector<int> rows = plain_bootstrap(data, rng);
    REQUIRE(rows.size() == 50);
    for (int r : rows) {
        CHECK(r >= 0);
        CHECK(r < 50);
    }
    Rng again(5, rng_stream::tree(0));
    CHECK(plain_bootstrap(data, again) == rows);
}

TEST_CASE("grow_tree memorizes distinct continuous data") {
    Rng rng(31, 16);
    TrainingSet data = random_set(200, 5, rng);
    for (int i = 0; i < 200; ++i)
        data.labels[std::size_t(i)] =
            (data.features(i, 0) <= 0.3) != (data.features(i, 1) <= 0.6) ? 1 : 0;

    std::vector<int> rows(200);
    for (int i = 0; i < 200; ++i) rows[std::size_t(i)] = i;
    Rng grow_rng(31, rng_stream::tree(0));
    DecisionTree tree = grow_tree(data, rows, 2, grow_rng);

    RandomForestModel one;
    one.attribute_count = 5;
    one.node_features = 2;
    one.tree_count = 1;
    one.trees = {tree};
    for (int i = 0; i < 200; ++i)
        CHECK(predict_label(one, data.features.row(i)) == data.labels[std::size_t(i)]);

    // internal counts always split exactly
    for (const TreeNode& node : tree.nodes) {
        if (node.is_leaf()) continue;
        const TreeNode& l = tree.nodes[std::size_t(node.left)];
        const TreeNode& r = tree.nodes[std::size_t(node.right)];
        CHECK(node.count0 == l.count0 + r.count0);
        CHECK(node.count1 == l.count1 + r.count1);
        CHECK(l.count0 + l.count1 > 0);
        CHECK(r.count0 + r.count1 > 0);
    }
}

TEST_CASE("every grown node agrees with the exhaustive split search") {
    Rng rng(37, 17);
    for (int trial = 0; trial < 5; ++trial) {
        TrainingSet data = random_set(60, 4, rng);
        // duplicated values make threshold handling interesting
        for (int i = 0; i < 60; ++i)
            for (int j = 0; j < 4; ++j)
                data.features(i, j) = std::floor(data.features(i, j) * 8.0) / 8.0;
        std::vector<int> rows(60);
        for (int i = 0; i < 60; ++i) rows[std::size_t(i)] = i;

        std::vector<NodeTrace> trace;
        Rng grow_rng(rng.next_u64(), rng_stream::tree(0));
        DecisionTree tree = grow_tree(data, rows, 2, grow_rng, &trace);

        for (const NodeTrace& t : trace) {
            SplitChoice want = best_split_oracle(data, t.rows, t.attributes);
            const TreeNode& node = tree.nodes[std::size_t(t.node)];
            if (node.is_leaf()) {
                CHECK(want.attr == -1);
            } else {
                CHECK(node.attribute == want.attr);
                CHECK(node.threshold == want.threshold);
            }
        }
    }
}

TEST_CASE("no positive gain leaves the node alone") {
    TrainingSet data;
    data.features.resize(3, 2);
    data.features << 1, 2, 1, 2, 1, 2;  // identical rows
    data.labels = {1, 0, 0};
    data.row_model = {"m", "m", "m"};
    data.row_vertex = {0, 1, 2};
    Rng rng(1, rng_stream::tree(0));
    DecisionTree tree = grow_tree(data, {0, 1, 2}, 2, rng);
    REQUIRE(tree.nodes.size() == 1);
    CHECK(tree.nodes[0].is_leaf());
    CHECK(tree.nodes[0].count0 == 2);
    CHECK(tree.nodes[0].count1 == 1);
    CHECK(tree.nodes[0].p1 == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("grow_tree validates its inputs") {
    TrainingSet data;
    data.features.resize(1, 1);
    data.features << 0.5;
    data.labels = {1};
    data.row_model = {"m"};
    data.row_vertex = {0};
    Rng rng(1, 1);
    CHECK_THROWS_AS(grow_tree(data, {}, 1, rng), ForestError);
    DecisionTree t = grow_tree(data, {0}, 1, rng);
    CHECK(t.nodes.size() == 1);
    CHECK(t.nodes[0].p1 == 1.0);
}

TEST_CASE("train_forest is deterministic and row-order blind") {
    Rng data_rng(41, 18);
    TrainingSet data = random_set(120, 4, data_rng, 0.4);
    TrainOptions opts;
    opts.tree_count = 9;
    opts.seed = 77;

    RandomForestModel a = train_forest(data, opts);
    RandomForestModel b = train_forest(data, opts);
    CHECK(forest_to_json(a) == forest_to_json(b));

    Rng shuffle_rng(43, 19);
    TrainingSet shuffled = permuted(data, shuffle_rng);
    RandomForestModel c = train_forest(shuffled, opts);
    CHECK(forest_to_json(a) == forest_to_json(c));

    opts.jobs = 4;
    RandomForestModel d = train_forest(data, opts);
    CHECK(forest_to_json(a) == forest_to_json(d));

    opts.jobs = 1;
    opts.seed = 78;
    RandomForestModel e = train_forest(data, opts);
    CHECK(forest_to_json(a) != forest_to_json(e));
}

TEST_CASE("a one-tree forest replays the documented streams") {
    Rng data_rng(47, 20);
    TrainingSet data = random_set(90, 3, data_rng, 0.35);
    TrainOptions opts;
    opts.tree_count = 1;
    opts.node_features = 2;
    opts.seed = 1234;
    RandomForestModel model = train_forest(data, opts);

    Rng pool_rng(1234, rng_stream::kPositivePool);
    std::vector<int> pool = select_positive_pool(data, pool_rng);
    Rng tree_rng(1234, rng_stream::tree(0));
    std::vector<int> rows = balanced_bootstrap(data, pool, 1.0, tree_rng);
    DecisionTree tree = grow_tree(data, rows, 2, tree_rng);

    REQUIRE(model.trees.size() == 1);
    REQUIRE(model.trees[0].nodes.size() == tree.nodes.size());
    for (std::size_t i = 0; i < tree.nodes.size(); ++i) {
        CHECK(model.trees[0].nodes[i].attribute == tree.nodes[i].attribute);
        CHECK(model.trees[0].nodes[i].threshold == tree.nodes[i].threshold);
        CHECK(model.trees[0].nodes[i].left == tree.nodes[i].left);
        CHECK(model.trees[0].nodes[i].right == tree.nodes[i].right);
        CHECK(model.trees[0].nodes[i].count0 == tree.nodes[i].count0);
        CHECK(model.trees[0].nodes[i].count1 == tree.nodes[i].count1);
    }
}

TEST_CASE("default node features is the square root rule") {
    Rng data_rng(53, 21);
    TrainingSet data = random_set(40, 10, data_rng, 0.4);
    TrainOptions opts;
    opts.tree_count = 2;
    RandomForestModel model = train_forest(data, opts);
    CHECK(model.node_features == 3);  // floor(sqrt(10))
    opts.node_features = 99;
    CHECK(train_forest(data, opts).node_features == 10);  // clamped to p
}

TEST_CASE("forest separates two moons") {
    Rng rng(59, 22);
    TrainingSet train;
    fill_moons(train, 300, 3, rng, 0.08);
    TrainingSet test;
    fill_moons(test, 200, 3, rng, 0.08);

    TrainOptions opts;
    opts.tree_count = 25;
    opts.seed = 5;
    RandomForestModel model = train_forest(train, opts);

    int correct = 0;
    for (int i = 0; i < test.row_count(); ++i) {
        double proba = predict_proba(model, test.features.row(i));
        CHECK(proba >= 0.0);
        CHECK(proba <= 1.0);
        if (predict_label(model, test.features.row(i)) == test.labels[std::size_t(i)])
            ++correct;
    }
    CHECK(correct >= 190);  // 0.95 on held-out points

    Eigen::VectorXd all = predict_proba_all(model, test.features, 3);
    for (int i = 0; i < test.row_count(); ++i)
        CHECK(all[i] == predict_proba(model, test.features.row(i)));
}

TEST_CASE("prediction ties resolve to non-interest") {
    RandomForestModel model;
    model.attribute_count = 1;
    model.node_features = 1;
    model.tree_count = 2;
    DecisionTree yes, no;
    yes.nodes.push_back({-1, 0.0, -1, -1, 1, 3, 0.75});
    no.nodes.push_back({-1, 0.0, -1, -1, 3, 1, 0.25});
    model.trees = {yes, no};

    Eigen::RowVectorXd row(1);
    row << 0.0;
    CHECK(predict_label(model, row) == 0);  // one vote each
    CHECK(predict_proba(model, row) == doctest::Approx(0.5).epsilon(1e-15));

    DecisionTree even;
    even.nodes.push_back({-1, 0.0, -1, -1, 2, 2, 0.5});
    model.trees = {even, even};
    CHECK(predict_label(model, row) == 0);  // leaf tie counts as non-interest
}

TEST_CASE("training input is validated") {
    Rng data_rng(61, 23);
    TrainingSet data = random_set(30, 2, data_rng, 0.5);
    TrainOptions opts;
    opts.tree_count = 2;

    TrainingSet bad = data;
    bad.labels[0] = 7;
    CHECK_THROWS_AS(train_forest(bad, opts), ForestError);

    bad = data;
    bad.features(0, 0) = std::nan("");
    CHECK_THROWS_AS(train_forest(bad, opts), ForestError);

    bad = data;
    bad.row_vertex.pop_back();
    CHECK_THROWS_AS(train_forest(bad, opts), ForestError);

    bad = data;
    std::fill(bad.labels.begin(), bad.labels.end(), 0);
    CHECK_THROWS_AS(train_forest(bad, opts), ForestError);
    std::fill(bad.labels.begin(), bad.labels.end(), 1);
    CHECK_THROWS_AS(train_forest(bad, opts), ForestError);

    RandomForestModel model = train_forest(data, opts);
    Eigen::RowVectorXd narrow(1);
    narrow << 0.5;
    CHECK_THROWS_AS(predict_proba(model, narrow), ForestError);
    CHECK_THROWS_AS(predict_label(model, narrow), ForestError);
}

TEST_CASE("forest json round-trips exactly") {
    Rng data_rng(67, 24);
    TrainingSet data = random_set(70, 3, data_rng, 0.4);
    TrainOptions opts;
    opts.tree_count = 5;
    opts.seed = 99;
    RandomForestModel model = train_forest(data, opts);

    std::string text = forest_to_json(model);
    RandomForestModel back = forest_from_json(text);
    CHECK(forest_to_json(back) == text);
    CHECK(back.attribute_count == model.attribute_count);
    CHECK(back.node_features == model.node_features);
    CHECK(back.seed == model.seed);

    Rng probe_rng(68, 25);
    for (int trial = 0; trial < 20; ++trial) {
        Eigen::RowVectorXd row(3);
        for (int j = 0; j < 3; ++j) row[j] = probe_rng.uniform();
        CHECK(predict_proba(back, row) == predict_proba(model, row));
        CHECK(predict_label(back, row) == predict_label(model, row));
    }
}

TEST_CASE("forest json rejects structural damage") {
    Rng data_rng(71, 26);
    TrainingSet data = random_set(40, 2, data_rng, 0.5);
    TrainOptions opts;
    opts.tree_count = 2;
    RandomForestModel model = train_forest(data, opts);
    nlohmann::json good = nlohmann::json::parse(forest_to_json(model));

    CHECK_THROWS_AS(forest_from_json("not json at all"), ForestError);

    nlohmann::json j = good;
    j["format"] = "something-else";
    CHECK_THROWS_AS(forest_from_json(j.dump()), ForestError);

    j = good;
    j["version"] = 2;
    CHECK_THROWS_AS(forest_from_json(j.dump()), ForestError);

    j = good;
    j["T"] = 5;  // trees array no longer matches
    CHECK_THROWS_AS(forest_from_json(j.dump()), ForestError);

    j = good;
    j["trees"][0]["thr"] = nlohmann::json::array();  // length mismatch
    CHECK_THROWS_AS(forest_from_json(j.dump()), ForestError);

    j = good;
    j["trees"][0]["attr"][0] = 99;  // split attribute beyond p
    CHECK_THROWS_AS(forest_from_json(j.dump()), ForestError);

    // a leaf that claims children
    j = good;
    for (auto& t : j["trees"])
        for (std::size_t i = 0; i < t["attr"].size(); ++i)
            if (t["attr"][i].get<int>() < 0) {
                t["left"][i] = 1;
                break;
            }
    CHECK_THROWS_AS(forest_from_json(j.dump()), ForestError);

    // a child pointing backwards
    j = good;
    bool damaged = false;
    for (auto& t : j["trees"]) {
        for (std::size_t i = 0; i < t["attr"].size() && !damaged; ++i)
            if (t["attr"][i].get<int>() >= 0) {
                t["left"][i] = 0;
                damaged = true;
            }
        if (damaged) break;
    }
    REQUIRE(damaged);
    CHECK_THROWS_AS(forest_from_json(j.dump()), ForestError);
}

TEST_CASE("forest files round-trip through disk") {
    Rng data_rng(73, 27);
    TrainingSet data = random_set(50, 2, data_rng, 0.4);
    TrainOptions opts;
    opts.tree_count = 3;
    RandomForestModel model = train_forest(data, opts);

    std::filesystem::path dir =
        std::filesystem::temp_directory_path() / "ipd-forest-test";
    std::filesystem::create_directories(dir);
    std::string path = (dir / "model.json").string();
    write_forest_file(model, path);
    RandomForestModel back = read_forest_file(path);
    CHECK(forest_to_json(back) == forest_to_json(model));
    std::filesystem::remove_all(dir);

    CHECK_THROWS_WITH_AS(read_forest_file("/nonexistent/model.json"),
                         doctest::Contains("/nonexistent/model.json"), ForestError);
}
