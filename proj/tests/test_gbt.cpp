#include "edf/gbt.hpp"
#include "edf/pinball.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <random>
#include <map>
#include <numeric>
#include <sstream>

using namespace edf;
using namespace edf::forecast;

namespace {

TabularData random_rows(std::size_t n, std::size_t d, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    TabularData t;
    t.n_features = d;
    for (std::size_t i = 0; i < n; ++i) {
        double y = 0.0;
        for (std::size_t f = 0; f < d; ++f) {
            const double v = u(rng);
            t.x.push_back(v);
            y += (f + 1.0) * v;
        }
        t.y.push_back(y + 0.3 * u(rng));
    }
    return t;
}

GbtConfig stump_config() {
    GbtConfig c;
    c.n_estimators = 1;
    c.max_depth = 1;
    c.min_samples_leaf = 1;
    return c;
}

features::FeatureMask first_columns(std::size_t d) {
    features::FeatureMask m;
    for (std::size_t i = 0; i < d; ++i) m.push_back(features::Column(i));
    return m;
}

double training_loss(const GbtEnsemble& e, const TabularData& t, double alpha) {
    std::vector<double> p;
    for (std::size_t i = 0; i < t.rows(); ++i) p.push_back(e.predict_row(t.row(i)));
    return pinball_loss(t.y, p, alpha);
}

}  // namespace

TEST_CASE("init is the empirical alpha-quantile") {
    CHECK(empirical_quantile({3, 1, 2, 5, 4}, 0.7) == 4.0);
    CHECK(empirical_quantile({3, 1, 2, 5, 4}, 0.5) == 3.0);
    CHECK(empirical_quantile({7}, 0.7) == 7.0);
    CHECK_THROWS_AS(empirical_quantile({}, 0.7), DataError);
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    for (int i = 0; i < 200; ++i) {
        std::vector<double> v(1 + rng() % 30);
        for (auto& x : v) x = u(rng);
        CHECK(empirical_quantile(v, 0.7) == oracle::alpha_quantile(v, 0.7));
    }
}

TEST_CASE("depth-1 single tree equals the brute-force stump") {
    std::mt19937_64 rng(2024);
    std::uniform_int_distribution<int> small(0, 5);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t d = 1 + trial % 3;
        TabularData t;
        t.n_features = d;
        for (std::size_t i = 0; i < 8; ++i) {
            for (std::size_t f = 0; f < d; ++f) t.x.push_back(trial % 2 ? small(rng) : std::ldexp(rng() % 1000, -7));
            t.y.push_back(std::ldexp(static_cast<double>(rng() % 64), -3));
        }
        const auto e = fit_gbt_ensemble(t, stump_config());
        const auto s = oracle::brute_force_stump(t.x, d, t.y, 0.7, 0.1);
        REQUIRE(e.trees.size() == 1);
        CHECK(e.init == s.init);
        const auto& root = e.trees[0].nodes[0];
        CHECK(root.is_leaf() == !s.split);
        if (s.split && !root.is_leaf()) {
            CHECK(static_cast<std::size_t>(root.feature) == s.feature);
            CHECK(root.threshold == s.threshold);
        }
        for (std::size_t i = 0; i < 8; ++i) CHECK(e.predict_row(t.row(i)) == s.predict(&t.x[i * d]));
    }
}

TEST_CASE("hand-checked stump") {
    TabularData t;
    t.n_features = 1;
    t.x = {1, 2, 3, 4};
    t.y = {0, 0, 10, 10};
    const auto e = fit_gbt_ensemble(t, stump_config());
    CHECK(e.init == 10.0);
    const auto& root = e.trees[0].nodes[0];
    REQUIRE_FALSE(root.is_leaf());
    CHECK(root.threshold == 2.0);
    CHECK(e.trees[0].nodes[static_cast<std::size_t>(root.left)].value == doctest::Approx(-0.3));
    CHECK(e.trees[0].nodes[static_cast<std::size_t>(root.right)].value == 0.0);
}

TEST_CASE("constant target is fitted exactly") {
    TabularData t;
    t.n_features = 2;
    std::mt19937_64 rng(1);
    for (int i = 0; i < 30; ++i) {
        t.x.push_back(static_cast<double>(rng() % 10));
        t.x.push_back(static_cast<double>(rng() % 10));
        t.y.push_back(2.5);
    }
    GbtConfig c;
    c.min_samples_leaf = 1;
    const auto e = fit_gbt_ensemble(t, c);
    for (std::size_t i = 0; i < t.rows(); ++i) CHECK(e.predict_row(t.row(i)) == 2.5);
    CHECK(training_loss(e, t, 0.7) == 0.0);
}

TEST_CASE("identical rows with differing targets still fit") {
    TabularData t;
    t.n_features = 1;
    t.x = {1, 1, 1, 1};
    t.y = {0, 1, 2, 3};
    const auto e = fit_gbt_ensemble(t, stump_config());
    CHECK(e.trees[0].nodes.size() == 1);
    CHECK_THROWS_AS(fit_gbt_ensemble(TabularData{1, {}, {}}, stump_config()), DataError);
}

TEST_CASE("fit is deterministic") {
    std::mt19937_64 rng(7);
    const auto t = random_rows(120, 3, rng);
    GbtConfig c;
    c.min_samples_leaf = 1;
    const auto a = fit_gbt(t, first_columns(3), c, 5);
    const auto b = fit_gbt(t, first_columns(3), c, 5);
    CHECK(a.parameters() == b.parameters());
}

TEST_CASE("training loss is non-increasing after the first stage on most datasets") {
    // Targets spread over tens of units so residuals stay well above the per-stage step.
    std::mt19937_64 rng(11);
    int monotone = 0;
    for (int trial = 0; trial < 100; ++trial) {
        auto t = random_rows(60, 1 + trial % 4, rng);
        for (auto& y : t.y) y *= 10.0;
        GbtConfig c;
        c.min_samples_leaf = 1;
        const auto e = fit_gbt_ensemble(t, c);
        std::vector<double> pred(t.rows(), e.init);
        double previous = 0.0;
        bool ok = true;
        for (std::size_t m = 0; m < e.trees.size(); ++m) {
            for (std::size_t i = 0; i < t.rows(); ++i) pred[i] += e.learning_rate * e.trees[m].evaluate(t.row(i));
            const double loss = pinball_loss(t.y, pred, c.alpha);
            if (m >= 1) ok = ok && loss <= previous + 1e-12;
            previous = loss;
        }
        monotone += ok;
    }
    CHECK(monotone >= 95);
}

TEST_CASE("boosting improves on the constant init") {
    std::mt19937_64 rng(13);
    const auto t = random_rows(200, 2, rng);
    GbtConfig c;
    c.min_samples_leaf = 5;
    const auto e = fit_gbt_ensemble(t, c);
    GbtEnsemble init_only{e.init, e.learning_rate, {}};
    CHECK(training_loss(e, t, 0.7) < 0.8 * training_loss(init_only, t, 0.7));
}

TEST_CASE("min_samples_leaf bounds every leaf") {
    std::mt19937_64 rng(17);
    const auto t = random_rows(150, 3, rng);
    GbtConfig c;
    c.n_estimators = 5;
    c.min_samples_leaf = 20;
    const auto e = fit_gbt_ensemble(t, c);
    for (const auto& tree : e.trees) {
        std::map<const TreeNode*, int> counts;
        for (std::size_t i = 0; i < t.rows(); ++i) {
            std::size_t n = 0;
            while (!tree.nodes[n].is_leaf()) {
                const auto& node = tree.nodes[n];
                n = static_cast<std::size_t>(t.row(i)[static_cast<std::size_t>(node.feature)] <= node.threshold
                                                 ? node.left
                                                 : node.right);
            }
            ++counts[&tree.nodes[n]];
        }
        for (const auto& [leaf, count] : counts) CHECK(count >= 20);
    }
}

TEST_CASE("predictions are finite, non-negative and denormalized") {
    std::mt19937_64 rng(19);
    auto t = random_rows(100, 2, rng);
    for (auto& y : t.y) y -= 3.0;  // many negative targets
    GbtConfig c;
    c.min_samples_leaf = 1;
    const auto m = fit_gbt(t, first_columns(2), c, 1);

    features::FeatureFrame frame;
    frame.evse_id = "E";
    frame.power_scale_kw = 11.0;
    const std::size_t rows = 10;
    frame.values.assign(rows * features::kColumnCount, 0.0);
    frame.index.resize(rows);
    for (std::size_t k = 0; k < rows; ++k) {
        frame.values[k * features::kColumnCount] = t.x[k * 2];
        frame.values[k * features::kColumnCount + 1] = t.x[k * 2 + 1];
    }
    std::vector<std::size_t> ks(rows);
    std::iota(ks.begin(), ks.end(), 0);
    const auto p = m.predict(frame, ks);
    for (std::size_t k = 0; k < rows; ++k) {
        CHECK(std::isfinite(p[k]));
        CHECK(p[k] >= 0.0);
        CHECK(p[k] == to_kw(m.predict_normalized(t.row(k)), 11.0));
    }
}

TEST_CASE("save and load round-trip bit-exactly") {
    std::mt19937_64 rng(23);
    const auto t = random_rows(80, 3, rng);
    GbtConfig c;
    c.min_samples_leaf = 3;
    const auto m = fit_gbt(t, first_columns(3), c, 9);
    features::NormalizationSpec norm;
    norm.nominal_power_kw["E"] = 11.0;
    std::stringstream s;
    save_model(s, m, norm);
    const auto loaded = load_model(s);
    CHECK(loaded.model->family() == "gbt");
    CHECK(loaded.model->parameters() == m.parameters());
    CHECK(loaded.normalization.nominal_power_kw == norm.nominal_power_kw);
    const auto& g = dynamic_cast<const GbtModel&>(*loaded.model);
    for (std::size_t i = 0; i < t.rows(); ++i) CHECK(g.predict_normalized(t.row(i)) == m.predict_normalized(t.row(i)));
}

TEST_CASE("configuration validation") {
    GbtConfig c;
    c.n_estimators = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.max_depth = 0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    c = {};
    c.learning_rate = 0.0;
    CHECK_THROWS_AS(c.validate(), ConfigError);
    CHECK_THROWS_AS(fit_gbt(TabularData{2, {1, 2}, {1}}, first_columns(3), GbtConfig{}, 0), DataError);
}
