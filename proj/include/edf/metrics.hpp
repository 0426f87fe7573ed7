#pragma once

#include "json.hpp"

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace edf::metrics {

/// Undefined values (zero denominators) are std::nullopt. Every function throws DataError on
/// empty or unequal inputs.

/// MAE of the forecast over the in-sample MAE of the lag-m naive forecast on `train`.
std::optional<double> mase(std::span<const double> y, std::span<const double> yhat, std::span<const double> train,
                           std::size_t m = 24);
/// 0–200 scale; terms with y = ŷ = 0 contribute 0.
double smape(std::span<const double> y, std::span<const double> yhat);
/// Radians; y = 0 with ŷ ≠ 0 contributes π/2.
double maape(std::span<const double> y, std::span<const double> yhat);
std::optional<double> wape(std::span<const double> y, std::span<const double> yhat);
double rmse(std::span<const double> y, std::span<const double> yhat);
double mae(std::span<const double> y, std::span<const double> yhat);
std::optional<double> r2(std::span<const double> y, std::span<const double> yhat);

inline constexpr std::array<std::string_view, 7> kMetricNames{"mase", "smape", "maape", "wape", "rmse", "mae", "r2"};

struct EvseMetrics {
    std::string evse_id;
    std::size_t n = 0;
    std::array<std::optional<double>, 7> values;  // kMetricNames order

    std::optional<double> get(std::string_view metric) const;
};

EvseMetrics evaluate(const std::string& evse_id, std::span<const double> y, std::span<const double> yhat,
                     std::span<const double> train, std::size_t m = 24);

/// Linear interpolation between closest ranks (h = (n−1)q). Throws DataError on empty input.
double quantile(std::vector<double> values, double q);

struct QuantileSummary {
    std::string metric;
    std::optional<double> q25, q50, q75;  // absent when every value is undefined
    std::size_t defined = 0;
    std::size_t undefined = 0;
};

struct MetricsReport {
    std::string model;
    std::string group;  // "all" or a hub label
    std::vector<EvseMetrics> per_evse;
    std::vector<QuantileSummary> summary;

    const QuantileSummary& at(std::string_view metric) const;
    nlohmann::ordered_json to_json() const;
};

/// Quantiles at 0.25/0.5/0.75 over the defined values of each metric.
MetricsReport quantile_report(std::string model, std::string group, std::vector<EvseMetrics> per_evse);

}  // namespace edf::metrics
