#include "edf/metrics.hpp"
#include "edf/util.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <cmath>
#include <numbers>
#include <random>

using namespace edf;
using namespace edf::metrics;

namespace {

using Vec = std::vector<double>;

Vec random_vector(std::size_t n, std::mt19937_64& rng, double zero_share = 0.2) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    Vec v(n);
    for (auto& x : v) x = u(rng) < zero_share ? 0.0 : 20.0 * u(rng);
    return v;
}

bool close(double a, double b, double tol = 1e-12) { return std::abs(a - b) <= tol * std::max(1.0, std::abs(b)); }

}  // namespace

TEST_CASE("perfect forecasts") {
    const Vec y{1.0, 0.0, 3.5, 2.0};
    const Vec train{1, 2, 3, 4, 0, 5, 1, 2};
    CHECK(*mase(y, y, train, 2) == 0.0);
    CHECK(smape(y, y) == 0.0);
    CHECK(maape(y, y) == 0.0);
    CHECK(*wape(y, y) == 0.0);
    CHECK(rmse(y, y) == 0.0);
    CHECK(mae(y, y) == 0.0);
    CHECK(*r2(y, y) == 1.0);
}

TEST_CASE("hand-computed examples") {
    CHECK(smape(Vec{0.0}, Vec{5.0}) == 200.0);
    CHECK(smape(Vec{1.0}, Vec{3.0}) == doctest::Approx(100.0).epsilon(1e-15));
    CHECK(smape(Vec{0.0}, Vec{0.0}) == 0.0);
    CHECK(maape(Vec{1.0}, Vec{2.0}) == doctest::Approx(std::numbers::pi / 4).epsilon(1e-15));
    CHECK(maape(Vec{0.0}, Vec{1.0}) == doctest::Approx(std::numbers::pi / 2).epsilon(1e-15));

    const Vec y{2.0, 2.0}, yhat{1.0, 3.0};
    CHECK(*wape(y, yhat) == 0.5);
    CHECK(mae(y, yhat) == 1.0);
    CHECK(rmse(y, yhat) == 1.0);
    CHECK_FALSE(r2(y, yhat));

    const Vec z{1.0, 2.0, 6.0};
    CHECK(*r2(z, Vec(3, 3.0)) == doctest::Approx(0.0).epsilon(1e-15));
    CHECK_FALSE(wape(Vec{0.0, 0.0}, Vec{1.0, 1.0}));
}

TEST_CASE("mase of the seasonal naive continuation is near one on stationary periodic data") {
    std::mt19937_64 rng(12);
    std::normal_distribution<double> noise(0.0, 1.0);
    Vec series;
    for (std::size_t t = 0; t < 24 * 60; ++t) series.push_back(5.0 + 3.0 * std::sin(2.0 * std::numbers::pi * t / 24.0) + noise(rng));
    const Vec train(series.begin(), series.begin() + 24 * 45);
    const Vec y(series.begin() + 24 * 45, series.end());
    Vec naive;
    for (std::size_t t = 24 * 45; t < series.size(); ++t) naive.push_back(series[t - 24]);
    const auto m = mase(y, naive, train, 24);
    REQUIRE(m);
    CHECK(std::abs(*m - 1.0) <= 0.15);
}

TEST_CASE("mase is undefined on a period-m constant training series") {
    Vec train;
    for (int t = 0; t < 50; ++t) train.push_back(t % 2 ? 1.0 : 4.0);
    CHECK_FALSE(mase(Vec{1.0}, Vec{2.0}, train, 2));
    CHECK(mase(Vec{1.0}, Vec{2.0}, train, 1));
    CHECK_THROWS_AS(mase(Vec{1.0}, Vec{2.0}, Vec{1.0, 2.0}, 2), DataError);
}

TEST_CASE("every metric matches a naive re-implementation") {
    std::mt19937_64 rng(1);
    for (int trial = 0; trial < 300; ++trial) {
        const std::size_t n = 1 + rng() % 40;
        const auto y = random_vector(n, rng);
        const auto yhat = random_vector(n, rng);
        const auto train = random_vector(30 + rng() % 30, rng, 0.1);
        const std::size_t m = 1 + rng() % 24;

        const auto a = mase(y, yhat, train, m), b = oracle::mase(y, yhat, train, m);
        REQUIRE(a.has_value() == b.has_value());
        if (a) CHECK(close(*a, *b));
        CHECK(close(smape(y, yhat), oracle::smape(y, yhat)));
        CHECK(close(maape(y, yhat), oracle::maape(y, yhat)));
        const auto w = wape(y, yhat), wo = oracle::wape(y, yhat);
        REQUIRE(w.has_value() == wo.has_value());
        if (w) CHECK(close(*w, *wo));
        CHECK(close(rmse(y, yhat), oracle::rmse(y, yhat)));
        CHECK(close(mae(y, yhat), oracle::mean_abs(y, yhat)));
        const auto r = r2(y, yhat), ro = oracle::r2(y, yhat);
        REQUIRE(r.has_value() == ro.has_value());
        if (r) CHECK(close(*r, *ro));
    }
}

TEST_CASE("bounds and orderings on random inputs") {
    std::mt19937_64 rng(2);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = 1 + rng() % 30;
        const auto y = random_vector(n, rng, 0.3);
        const auto yhat = random_vector(n, rng, 0.3);
        const double s = smape(y, yhat), a = maape(y, yhat);
        CHECK(s >= 0.0);
        CHECK(s <= 200.0);
        CHECK(a >= 0.0);
        CHECK(a <= std::numbers::pi / 2 + 1e-15);
        CHECK(rmse(y, yhat) >= mae(y, yhat) - 1e-12);
        CHECK(mae(y, yhat) >= 0.0);
        if (const auto w = wape(y, yhat)) CHECK(*w >= 0.0);
        if (const auto r = r2(y, yhat)) CHECK(*r <= 1.0);
    }
}

TEST_CASE("bounds hold exactly when every term sits on them") {
    for (std::size_t n = 1; n <= 64; ++n) {
        CAPTURE(n);
        const Vec zeros(n, 0.0), ones(n, 1.0);
        CHECK(maape(zeros, ones) <= std::numbers::pi / 2);
        CHECK(maape(zeros, ones) == doctest::Approx(std::numbers::pi / 2).epsilon(1e-15));
        CHECK(smape(zeros, ones) <= 200.0);
        CHECK(smape(ones, zeros) <= 200.0);
    }
}

TEST_CASE("scale invariance") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> scale(0.01, 100.0);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 2 + rng() % 20;
        const auto y = random_vector(n, rng, 0.1);
        const auto yhat = random_vector(n, rng, 0.1);
        const auto train = random_vector(60, rng, 0.1);
        const double c = scale(rng);
        Vec cy = y, cyhat = yhat, ctrain = train;
        for (auto& v : cy) v *= c;
        for (auto& v : cyhat) v *= c;
        for (auto& v : ctrain) v *= c;
        CHECK(close(*mase(cy, cyhat, ctrain, 24), *mase(y, yhat, train, 24)));
        CHECK(close(smape(cy, cyhat), smape(y, yhat)));
        CHECK(close(maape(cy, cyhat), maape(y, yhat)));
        if (wape(y, yhat)) CHECK(close(*wape(cy, cyhat), *wape(y, yhat)));
        if (r2(y, yhat)) CHECK(close(*r2(cy, cyhat), *r2(y, yhat), 1e-11));
        CHECK(close(mae(cy, cyhat), c * mae(y, yhat)));
        CHECK(close(rmse(cy, cyhat), c * rmse(y, yhat)));
    }
}

TEST_CASE("metric input errors") {
    const Vec a{1.0, 2.0}, b{1.0}, empty;
    CHECK_THROWS_AS(smape(a, b), DataError);
    CHECK_THROWS_AS(rmse(empty, empty), DataError);
    CHECK_THROWS_AS(r2(a, b), DataError);
    CHECK_THROWS_AS(mase(a, b, Vec(30, 1.0), 2), DataError);
}

TEST_CASE("quantiles interpolate between closest ranks") {
    CHECK(quantile({1, 2, 3, 4}, 0.5) == 2.5);
    CHECK(quantile({4, 1, 3, 2}, 0.25) == 1.75);
    CHECK(quantile({4, 1, 3, 2}, 0.75) == 3.25);
    CHECK(quantile({7}, 0.25) == 7.0);
    CHECK(quantile({1, 9}, 0.0) == 1.0);
    CHECK(quantile({1, 9}, 1.0) == 9.0);
    CHECK_THROWS_AS(quantile({}, 0.5), DataError);
}

TEST_CASE("quantile report excludes undefined values") {
    const Vec train{1, 2, 3, 4, 5, 6, 7, 8};
    std::vector<EvseMetrics> per;
    per.push_back(evaluate("a", Vec{1.0, 2.0}, Vec{1.5, 2.5}, train, 2));
    const auto single = quantile_report("gbt", "all", per);
    const auto& m = single.at("mae");
    CHECK(*m.q25 == 0.5);
    CHECK(*m.q50 == 0.5);
    CHECK(*m.q75 == 0.5);
    CHECK(m.defined == 1);

    per.push_back(evaluate("b", Vec{1.0, 2.0}, Vec{2.0, 3.0}, train, 2));
    auto undefined = evaluate("c", Vec{0.0, 0.0}, Vec{0.0, 0.0}, Vec(8, 1.0), 2);
    CHECK_FALSE(undefined.get("mase"));
    CHECK_FALSE(undefined.get("wape"));
    CHECK_FALSE(undefined.get("r2"));
    const auto without = quantile_report("gbt", "all", per);
    per.push_back(undefined);
    const auto with = quantile_report("gbt", "all", per);
    CHECK(*with.at("mase").q50 == *without.at("mase").q50);
    CHECK(with.at("mase").undefined == 1);
    CHECK(with.at("mae").defined == 3);

    std::vector<EvseMetrics> only_undefined{undefined};
    const auto empty = quantile_report("gbt", "hub-0", only_undefined);
    CHECK_FALSE(empty.at("r2").q50);
    const auto j = empty.to_json();
    CHECK(j.dump().find("hub-0") != std::string::npos);
}
