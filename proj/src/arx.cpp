#include "edf/arx.hpp"

#include "edf/util.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

namespace edf::forecast {

namespace {

constexpr double kRidgePenalty = 1e-8;

void fill_dummies(std::size_t t, std::size_t n_dummies, std::size_t period, double* out) {
    for (std::size_t j = 0; j < n_dummies; ++j) out[j] = 0.0;
    if (n_dummies > 0) {
        const std::size_t phase = t % period;
        if (phase > 0) out[phase - 1] = 1.0;
    }
}

}  // namespace

void ArxConfig::validate(std::size_t series_length) const {
    if (order == 0) throw ConfigError("arx: order must be at least 1");
    if (order > series_length / 4) {
        throw ConfigError("arx: order " + std::to_string(order) + " exceeds a quarter of the series length " +
                          std::to_string(series_length));
    }
    if (seasonal_dummies && seasonal_period < 2) throw ConfigError("arx: seasonal period must be at least 2");
}

double ArxFit::predict(std::span<const double> history, std::span<const double> exogenous, std::size_t t) const {
    if (history.size() < order || exogenous.size() != n_exogenous) throw DataError("arx: regressor shape mismatch");
    double y = coefficients.back();
    for (std::size_t j = 0; j < order; ++j) y += coefficients[j] * history[j];
    for (std::size_t j = 0; j < n_exogenous; ++j) y += coefficients[order + j] * exogenous[j];
    if (n_dummies > 0) {
        const std::size_t phase = t % (n_dummies + 1);
        if (phase > 0) y += coefficients[order + n_exogenous + phase - 1];
    }
    return y;
}

ArxFit fit_arx_series(std::span<const double> y, const Eigen::MatrixXd& exogenous, const ArxConfig& config) {
    const std::size_t n = y.size();
    const std::size_t p = config.order;
    config.validate(n);
    const auto q = static_cast<std::size_t>(exogenous.cols());
    if (q > 0 && static_cast<std::size_t>(exogenous.rows()) != n) throw DataError("arx: exogenous rows must match the series");
    const std::size_t n_dummies = config.seasonal_dummies ? config.seasonal_period - 1 : 0;
    const std::size_t cols = p + q + n_dummies + 1;
    if (n <= p + q + n_dummies + 1) throw DataError("arx: series too short for the requested regressors");

    const std::size_t m = n - p;
    Eigen::MatrixXd x(m, cols);
    Eigen::VectorXd target(m);
    std::vector<double> dummies(n_dummies);
    for (std::size_t r = 0; r < m; ++r) {
        const std::size_t t = r + p;
        for (std::size_t j = 0; j < p; ++j) x(r, j) = y[t - 1 - j];
        for (std::size_t j = 0; j < q; ++j) x(r, p + j) = exogenous(t, j);
        fill_dummies(t, n_dummies, config.seasonal_period, dummies.data());
        for (std::size_t j = 0; j < n_dummies; ++j) x(r, p + q + j) = dummies[j];
        x(r, cols - 1) = 1.0;
        target(r) = y[t];
    }

    std::vector<Eigen::Index> active;
    for (std::size_t c = 0; c + 1 < cols; ++c) {
        const auto column = x.col(c);
        if (column.maxCoeff() > column.minCoeff()) active.push_back(static_cast<Eigen::Index>(c));
    }
    active.push_back(static_cast<Eigen::Index>(cols - 1));
    Eigen::MatrixXd design(m, active.size());
    for (std::size_t i = 0; i < active.size(); ++i) design.col(i) = x.col(active[i]);

    ArxFit fit;
    fit.order = p;
    fit.n_exogenous = q;
    fit.n_dummies = n_dummies;
    fit.coefficients.assign(cols, 0.0);
    Eigen::VectorXd beta;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
    if (qr.rank() == design.cols()) {
        beta = qr.solve(target);
    } else {
        const Eigen::MatrixXd gram =
            design.transpose() * design + kRidgePenalty * Eigen::MatrixXd::Identity(design.cols(), design.cols());
        beta = gram.ldlt().solve(design.transpose() * target);
        fit.ridge_fallback = true;
    }
    for (std::size_t i = 0; i < active.size(); ++i) fit.coefficients[active[i]] = beta(i);
    if (!std::all_of(fit.coefficients.begin(), fit.coefficients.end(), [](double v) { return std::isfinite(v); })) {
        throw TrainingError("arx: non-finite coefficients");
    }
    return fit;
}

ArxModel::ArxModel(ArxConfig config, std::map<std::string, ArxFit> fits)
    : config_(std::move(config)), fits_(std::move(fits)) {}

nlohmann::ordered_json ArxModel::describe() const {
    nlohmann::ordered_json d;
    d["hyperparameters"] = {{"order", config_.order},
                            {"seasonal_dummies", config_.seasonal_dummies},
                            {"seasonal_period", config_.seasonal_period}};
    d["feature_columns"] = features::mask_names(config_.exogenous);
    auto evse = nlohmann::ordered_json::array();
    for (const auto& [id, fit] : fits_) {
        evse.push_back({{"evse_id", id}, {"order", fit.order}, {"ridge_fallback", fit.ridge_fallback}});
    }
    d["evse"] = std::move(evse);
    return d;
}

std::vector<double> ArxModel::parameters() const {
    std::vector<double> p;
    for (const auto& [id, fit] : fits_) p.insert(p.end(), fit.coefficients.begin(), fit.coefficients.end());
    return p;
}

std::vector<ParameterBlock> ArxModel::layout() const {
    std::vector<ParameterBlock> blocks;
    std::size_t offset = 0;
    for (const auto& [id, fit] : fits_) {
        blocks.push_back({id, offset, fit.coefficients.size()});
        offset += fit.coefficients.size();
    }
    return blocks;
}

void ArxModel::set_parameters(std::span<const double> params) {
    std::size_t expected = 0;
    for (const auto& [id, fit] : fits_) expected += fit.coefficients.size();
    if (params.size() != expected) throw DataError("arx: parameter vector has the wrong length");
    std::size_t pos = 0;
    for (auto& [id, fit] : fits_) {
        std::copy_n(params.begin() + static_cast<std::ptrdiff_t>(pos), fit.coefficients.size(), fit.coefficients.begin());
        pos += fit.coefficients.size();
    }
}

std::vector<double> ArxModel::predict(const features::FeatureFrame& frame, std::span<const std::size_t> rows) const {
    const auto it = fits_.find(frame.evse_id);
    if (it == fits_.end()) throw DataError("arx: no fit for EVSE '" + frame.evse_id + "'");
    const ArxFit& fit = it->second;
    std::vector<double> history(fit.order), exog(config_.exogenous.size());
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t k : rows) {
        if (k + 1 < fit.order || k >= frame.rows()) throw DataError("arx: row lacks the autoregressive history");
        for (std::size_t j = 0; j < fit.order; ++j) history[j] = frame.at(k - j, features::Column::DemandLag0);
        for (std::size_t j = 0; j < exog.size(); ++j) exog[j] = frame.at(k, config_.exogenous[j]);
        out.push_back(to_kw(fit.predict(history, exog, k + 1), frame.power_scale_kw));
    }
    return out;
}

std::unique_ptr<ArxModel> ArxModel::restore(const nlohmann::ordered_json& description, std::span<const double> params) {
    const auto& h = description.at("hyperparameters");
    ArxConfig cfg;
    cfg.order = h.at("order").get<std::size_t>();
    cfg.seasonal_dummies = h.at("seasonal_dummies").get<bool>();
    cfg.seasonal_period = h.at("seasonal_period").get<std::size_t>();
    cfg.exogenous = features::parse_mask(description.at("feature_columns").get<std::vector<std::string>>());
    std::map<std::string, ArxFit> fits;
    for (const auto& e : description.at("evse")) {
        ArxFit fit;
        fit.order = e.at("order").get<std::size_t>();
        fit.n_exogenous = cfg.exogenous.size();
        fit.n_dummies = cfg.seasonal_dummies ? cfg.seasonal_period - 1 : 0;
        fit.ridge_fallback = e.at("ridge_fallback").get<bool>();
        fit.coefficients.assign(fit.order + fit.n_exogenous + fit.n_dummies + 1, 0.0);
        fits.emplace(e.at("evse_id").get<std::string>(), std::move(fit));
    }
    auto model = std::make_unique<ArxModel>(cfg, std::move(fits));
    model->set_parameters(params);
    return model;
}

ArxModel fit_arx(std::span<const features::FeatureFrame> frames, const ArxConfig& config) {
    std::map<std::string, ArxFit> fits;
    std::string note;
    bool warning = false;
    std::uint64_t ops = 0;
    const auto started = std::chrono::steady_clock::now();
    for (const auto& frame : frames) {
        // Bin t of the training block; its covariates sit on row t-1.
        const std::size_t n = std::min(frame.split.train_end, frame.rows());
        ArxConfig local = config;
        if (local.order > n / 4) {
            local.order = std::max<std::size_t>(1, n / 4);
            note += (note.empty() ? "" : "; ") + frame.evse_id + ": order lowered to " + std::to_string(local.order);
        }
        std::vector<double> y(n);
        Eigen::MatrixXd exog = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(n),
                                                     static_cast<Eigen::Index>(config.exogenous.size()));
        for (std::size_t t = 0; t < n; ++t) {
            y[t] = frame.at(t, features::Column::DemandLag0);
            if (t == 0) continue;
            for (std::size_t j = 0; j < config.exogenous.size(); ++j) {
                exog(static_cast<Eigen::Index>(t), static_cast<Eigen::Index>(j)) = frame.at(t - 1, config.exogenous[j]);
            }
        }
        ArxFit fit = fit_arx_series(y, exog, local);
        warning = warning || fit.ridge_fallback;
        const std::uint64_t cols = fit.coefficients.size();
        ops += (n - fit.order) * cols * cols * 2 + cols * cols * cols;
        fits.emplace(frame.evse_id, std::move(fit));
    }
    ArxModel model(config, std::move(fits));
    FitInfo& info = model.mutable_fit_info();
    info.epochs_run = 1;
    info.ops = ops;
    info.epoch_ops = {ops};
    info.epoch_seconds = {std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()};
    info.warning = warning;
    info.note = note;
    return model;
}

}  // namespace edf::forecast
