#pragma once

#include "edf/model.hpp"

#include <span>
#include <vector>

namespace edf::forecast {

/// Forecasts for positions m..n-1: element i is series[i], the value one season earlier.
/// Throws DataError when the series is not longer than m, ConfigError when m = 0.
std::vector<double> seasonal_naive(std::span<const double> series, std::size_t m);

/// Forecast for position k; throws DataError when k < m.
double seasonal_naive_at(std::span<const double> series, std::size_t k, std::size_t m);

class SeasonalNaiveModel final : public ForecastModel {
public:
    explicit SeasonalNaiveModel(std::size_t lag = 24);

    std::string family() const override { return "seasonal_naive"; }
    nlohmann::ordered_json describe() const override;
    std::vector<double> parameters() const override { return {}; }
    std::vector<ParameterBlock> layout() const override { return {}; }
    void set_parameters(std::span<const double> params) override;
    /// Row k forecasts bin k+1 with the observed kW of bin k+1-m.
    std::vector<double> predict(const features::FeatureFrame& frame,
                                std::span<const std::size_t> rows) const override;

    std::size_t lag() const { return lag_; }

private:
    std::size_t lag_;
};

}  // namespace edf::forecast
