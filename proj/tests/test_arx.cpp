#include "edf/arx.hpp"
#include "edf/seasonal.hpp"
#include "edf/workbench.hpp"

#include "doctest.h"
#include "oracles.hpp"

#include <cmath>
#include <random>
#include <sstream>

using namespace edf;
using namespace edf::forecast;

namespace {

ArxConfig plain(std::size_t order) {
    ArxConfig c;
    c.order = order;
    c.exogenous.clear();
    return c;
}

std::vector<double> in_sample(const ArxFit& fit, const std::vector<double>& y, const Eigen::MatrixXd& x) {
    std::vector<double> out;
    for (std::size_t t = fit.order; t < y.size(); ++t) {
        std::vector<double> history, exo;
        for (std::size_t j = 1; j <= fit.order; ++j) history.push_back(y[t - j]);
        for (Eigen::Index j = 0; j < x.cols(); ++j) exo.push_back(x(static_cast<Eigen::Index>(t), j));
        out.push_back(fit.predict(history, exo, t));
    }
    return out;
}

}  // namespace

TEST_CASE("noise-free AR(1) with a covariate is recovered exactly") {
    const std::size_t n = 80;
    std::vector<double> y{10.0};
    Eigen::MatrixXd x(n, 1);
    x(0, 0) = 0.0;
    for (std::size_t t = 1; t < n; ++t) {
        x(static_cast<Eigen::Index>(t), 0) = std::sin(static_cast<double>(t));
        y.push_back(0.8 * y.back() + 2.0 + 0.5 * x(static_cast<Eigen::Index>(t), 0));
    }
    const auto fit = fit_arx_series(y, x, plain(1));
    REQUIRE(fit.coefficients.size() == 3);
    CHECK(std::abs(fit.coefficients[0] - 0.8) <= 1e-9);
    CHECK(std::abs(fit.coefficients[1] - 0.5) <= 1e-9);
    CHECK(std::abs(fit.coefficients[2] - 2.0) <= 1e-9);
    CHECK_FALSE(fit.ridge_fallback);
}

TEST_CASE("constant series fits an intercept only") {
    const std::vector<double> y(40, 3.25);
    const auto fit = fit_arx_series(y, Eigen::MatrixXd(0, 0), plain(3));
    REQUIRE(fit.coefficients.size() == 4);
    for (std::size_t j = 0; j < 3; ++j) CHECK(fit.coefficients[j] == 0.0);
    CHECK(std::abs(fit.coefficients[3] - 3.25) <= 1e-12);
}

TEST_CASE("a copied covariate explains the series") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> noise(0.0, 1e-3);
    std::uniform_real_distribution<double> u(0.0, 5.0);
    const std::size_t n = 200;
    Eigen::MatrixXd x(n, 2);
    std::vector<double> y;
    for (std::size_t t = 0; t < n; ++t) {
        const auto r = static_cast<Eigen::Index>(t);
        x(r, 0) = u(rng);
        x(r, 1) = u(rng);
        y.push_back(x(r, 0) + noise(rng));
    }
    const auto fit = fit_arx_series(y, x, plain(2));
    const auto pred = in_sample(fit, y, x);
    const std::vector<double> observed(y.begin() + 2, y.end());
    const auto r2 = oracle::r2(observed, pred);
    REQUIRE(r2);
    CHECK(*r2 >= 0.999);
}

TEST_CASE("collinear covariates fall back to ridge") {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t n = 60;
    Eigen::MatrixXd x(n, 2);
    std::vector<double> y;
    for (std::size_t t = 0; t < n; ++t) {
        const auto r = static_cast<Eigen::Index>(t);
        x(r, 0) = u(rng);
        x(r, 1) = 2.0 * x(r, 0);
        y.push_back(3.0 * x(r, 0) + 0.1 * u(rng));
    }
    const auto fit = fit_arx_series(y, x, plain(1));
    CHECK(fit.ridge_fallback);
    for (double c : fit.coefficients) CHECK(std::isfinite(c));
    const auto pred = in_sample(fit, y, x);
    for (std::size_t i = 0; i < pred.size(); ++i) CHECK(std::abs(pred[i] - y[i + 1]) < 0.2);
}

TEST_CASE("seasonal dummies capture a periodic level") {
    ArxConfig c = plain(1);
    c.seasonal_dummies = true;
    c.seasonal_period = 3;
    std::vector<double> y{0.0};
    const double level[3] = {1.0, 4.0, -2.0};
    for (std::size_t t = 1; t < 60; ++t) y.push_back(0.5 * y.back() + level[t % 3]);
    const auto fit = fit_arx_series(y, Eigen::MatrixXd(0, 0), c);
    REQUIRE(fit.coefficients.size() == 4);
    CHECK(std::abs(fit.coefficients[0] - 0.5) <= 1e-9);
    CHECK(std::abs(fit.coefficients[1] - 3.0) <= 1e-9);
    CHECK(std::abs(fit.coefficients[2] + 3.0) <= 1e-9);
    CHECK(std::abs(fit.coefficients[3] - 1.0) <= 1e-9);
}

TEST_CASE("order and length validation") {
    const std::vector<double> y(40, 1.0);
    CHECK_THROWS_AS(fit_arx_series(y, Eigen::MatrixXd(0, 0), plain(0)), ConfigError);
    CHECK_THROWS_AS(fit_arx_series(y, Eigen::MatrixXd(0, 0), plain(11)), ConfigError);
    CHECK_NOTHROW(fit_arx_series(y, Eigen::MatrixXd(0, 0), plain(10)));
    CHECK_THROWS_AS(fit_arx_series(y, Eigen::MatrixXd(40, 30), plain(10)), DataError);
    CHECK_THROWS_AS(fit_arx_series(y, Eigen::MatrixXd(39, 1), plain(2)), DataError);
}

TEST_CASE("per-EVSE fit lowers the order on short blocks and round-trips") {
    workbench::ExperimentConfig cfg;
    cfg.data.evse = 3;
    cfg.data.days = 120;
    const auto data = workbench::prepare_data(cfg);
    const auto model = fit_arx(data.frames, ArxConfig{});
    CHECK(model.fits().size() == 3);
    const std::size_t train_bins = data.split.train_end;
    for (const auto& [id, fit] : model.fits()) CHECK(fit.order == std::min<std::size_t>(48, train_bins / 4));
    if (train_bins / 4 < 48) CHECK_FALSE(model.fit_info().note.empty());

    std::stringstream s;
    save_model(s, model, data.normalization);
    const auto loaded = load_model(s);
    CHECK(loaded.model->family() == "arx");
    CHECK(loaded.model->parameters() == model.parameters());
    for (const auto& frame : data.frames) {
        const auto rows = frame.rows_for(features::Role::Test);
        const auto p = model.predict(frame, rows);
        CHECK(loaded.model->predict(frame, rows) == p);
        for (double v : p) {
            CHECK(std::isfinite(v));
            CHECK(v >= 0.0);
        }
    }
    auto stranger = data.frames.front();
    stranger.evse_id = "not-fitted";
    CHECK_THROWS_AS(model.predict(stranger, stranger.rows_for(features::Role::Test)), DataError);
}

TEST_CASE("seasonal naive examples") {
    const std::vector<double> s{1, 2, 3, 4, 5, 6};
    CHECK(seasonal_naive(s, 2) == std::vector<double>{1, 2, 3, 4});
    CHECK(seasonal_naive(s, 5) == std::vector<double>{1});
    CHECK(seasonal_naive_at(s, 5, 2) == 4.0);
    CHECK(seasonal_naive_at(s, 2, 2) == 1.0);
    CHECK_THROWS_AS(seasonal_naive(s, 6), DataError);
    CHECK_THROWS_AS(seasonal_naive(s, 0), ConfigError);
    CHECK_THROWS_AS(seasonal_naive_at(s, 1, 2), DataError);
    CHECK_THROWS_AS(SeasonalNaiveModel(0), ConfigError);
}

TEST_CASE("seasonal naive model reads the observed demand one season back") {
    workbench::ExperimentConfig cfg;
    cfg.data.evse = 2;
    const auto data = workbench::prepare_data(cfg);
    const SeasonalNaiveModel model(24);
    CHECK(model.parameters().empty());
    for (const auto& frame : data.frames) {
        const auto rows = frame.rows_for(features::Role::Test);
        const auto p = model.predict(frame, rows);
        for (std::size_t i = 0; i < rows.size(); ++i) CHECK(p[i] == frame.demand_kw[rows[i] + 1 - 24]);
    }
}
