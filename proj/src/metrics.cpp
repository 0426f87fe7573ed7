#include "edf/metrics.hpp"

#include "edf/util.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace edf::metrics {

namespace {

void check(std::span<const double> y, std::span<const double> yhat) {
    if (y.size() != yhat.size()) throw DataError("metric inputs differ in length");
    if (y.empty()) throw DataError("metric inputs are empty");
}

nlohmann::ordered_json optional_json(const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
}

}  // namespace

std::optional<double> mase(std::span<const double> y, std::span<const double> yhat, std::span<const double> train,
                           std::size_t m) {
    check(y, yhat);
    if (m == 0) throw ConfigError("seasonal lag must be positive");
    if (train.size() <= m) throw DataError("training series not longer than the seasonal lag");
    double scale = 0.0;
    for (std::size_t k = m; k < train.size(); ++k) scale += std::abs(train[k] - train[k - m]);
    scale /= static_cast<double>(train.size() - m);
    if (!(scale > 0.0)) return std::nullopt;
    return mae(y, yhat) / scale;
}

double smape(std::span<const double> y, std::span<const double> yhat) {
    check(y, yhat);
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double denom = std::abs(y[i]) + std::abs(yhat[i]);
        if (denom > 0.0) sum += 200.0 * std::abs(y[i] - yhat[i]) / denom;
    }
    // Each term is at most 200; the clamp only absorbs rounding in the sum.
    return std::min(sum / static_cast<double>(y.size()), 200.0);
}

double maape(std::span<const double> y, std::span<const double> yhat) {
    check(y, yhat);
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        const double err = std::abs(y[i] - yhat[i]);
        if (y[i] == 0.0) {
            sum += err == 0.0 ? 0.0 : std::numbers::pi / 2.0;
        } else {
            sum += std::atan(err / std::abs(y[i]));
        }
    }
    // Summing many pi/2 terms can round one ulp past the bound.
    return std::min(sum / static_cast<double>(y.size()), std::numbers::pi / 2.0);
}

std::optional<double> wape(std::span<const double> y, std::span<const double> yhat) {
    check(y, yhat);
    double err = 0.0, total = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        err += std::abs(y[i] - yhat[i]);
        total += std::abs(y[i]);
    }
    if (!(total > 0.0)) return std::nullopt;
    return err / total;
}

double rmse(std::span<const double> y, std::span<const double> yhat) {
    check(y, yhat);
    double ss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) ss += (y[i] - yhat[i]) * (y[i] - yhat[i]);
    return std::sqrt(ss / static_cast<double>(y.size()));
}

double mae(std::span<const double> y, std::span<const double> yhat) {
    check(y, yhat);
    double sum = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) sum += std::abs(y[i] - yhat[i]);
    return sum / static_cast<double>(y.size());
}

std::optional<double> r2(std::span<const double> y, std::span<const double> yhat) {
    check(y, yhat);
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= static_cast<double>(y.size());
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) {
        ss_res += (y[i] - yhat[i]) * (y[i] - yhat[i]);
        ss_tot += (y[i] - mean) * (y[i] - mean);
    }
    if (!(ss_tot > 0.0)) return std::nullopt;
    return 1.0 - ss_res / ss_tot;
}

std::optional<double> EvseMetrics::get(std::string_view metric) const {
    for (std::size_t i = 0; i < kMetricNames.size(); ++i) {
        if (kMetricNames[i] == metric) return values[i];
    }
    throw ConfigError("unknown metric '" + std::string(metric) + "'");
}

EvseMetrics evaluate(const std::string& evse_id, std::span<const double> y, std::span<const double> yhat,
                     std::span<const double> train, std::size_t m) {
    EvseMetrics e;
    e.evse_id = evse_id;
    e.n = y.size();
    e.values = {mase(y, yhat, train, m), smape(y, yhat), maape(y, yhat), wape(y, yhat),
                rmse(y, yhat),           mae(y, yhat),   r2(y, yhat)};
    return e;
}

double quantile(std::vector<double> values, double q) {
    if (values.empty()) throw DataError("quantile of an empty set");
    if (!(q >= 0.0 && q <= 1.0)) throw ConfigError("quantile level must lie in [0, 1]");
    std::sort(values.begin(), values.end());
    const double h = (static_cast<double>(values.size()) - 1.0) * q;
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const std::size_t hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (h - static_cast<double>(lo)) * (values[hi] - values[lo]);
}

const QuantileSummary& MetricsReport::at(std::string_view metric) const {
    for (const auto& s : summary) {
        if (s.metric == metric) return s;
    }
    throw ConfigError("unknown metric '" + std::string(metric) + "'");
}

nlohmann::ordered_json MetricsReport::to_json() const {
    nlohmann::ordered_json j;
    j["model"] = model;
    j["group"] = group;
    auto rows = nlohmann::ordered_json::array();
    for (const auto& e : per_evse) {
        nlohmann::ordered_json r;
        r["evse_id"] = e.evse_id;
        r["n"] = e.n;
        for (std::size_t i = 0; i < kMetricNames.size(); ++i) r[std::string(kMetricNames[i])] = optional_json(e.values[i]);
        rows.push_back(std::move(r));
    }
    j["per_evse"] = std::move(rows);
    nlohmann::ordered_json s;
    for (const auto& q : summary) {
        nlohmann::ordered_json block;
        block["q25"] = optional_json(q.q25);
        block["q50"] = optional_json(q.q50);
        block["q75"] = optional_json(q.q75);
        block["defined"] = q.defined;
        block["undefined"] = q.undefined;
        if (q.defined == 0) block["note"] = "undefined for every EVSE";
        s[q.metric] = std::move(block);
    }
    j["quantiles"] = std::move(s);
    return j;
}

MetricsReport quantile_report(std::string model, std::string group, std::vector<EvseMetrics> per_evse) {
    MetricsReport report;
    report.model = std::move(model);
    report.group = std::move(group);
    report.per_evse = std::move(per_evse);
    for (std::size_t i = 0; i < kMetricNames.size(); ++i) {
        QuantileSummary s;
        s.metric = std::string(kMetricNames[i]);
        std::vector<double> defined;
        for (const auto& e : report.per_evse) {
            if (e.values[i]) {
                defined.push_back(*e.values[i]);
            } else {
                ++s.undefined;
            }
        }
        s.defined = defined.size();
        if (!defined.empty()) {
            s.q25 = quantile(defined, 0.25);
            s.q50 = quantile(defined, 0.5);
            s.q75 = quantile(defined, 0.75);
        }
        report.summary.push_back(std::move(s));
    }
    return report;
}

}  // namespace edf::metrics
