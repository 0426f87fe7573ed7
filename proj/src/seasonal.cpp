#include "edf/seasonal.hpp"

#include "edf/util.hpp"

namespace edf::forecast {

std::vector<double> seasonal_naive(std::span<const double> series, std::size_t m) {
    if (m == 0) throw ConfigError("seasonal lag must be positive");
    if (series.size() <= m) throw DataError("series not longer than the seasonal lag");
    return {series.begin(), series.end() - static_cast<std::ptrdiff_t>(m)};
}

double seasonal_naive_at(std::span<const double> series, std::size_t k, std::size_t m) {
    if (m == 0) throw ConfigError("seasonal lag must be positive");
    if (k < m || k - m >= series.size()) throw DataError("position lacks a full season of history");
    return series[k - m];
}

SeasonalNaiveModel::SeasonalNaiveModel(std::size_t lag) : lag_(lag) {
    if (lag_ == 0) throw ConfigError("seasonal lag must be positive");
}

nlohmann::ordered_json SeasonalNaiveModel::describe() const {
    nlohmann::ordered_json d;
    d["hyperparameters"] = {{"lag", lag_}};
    d["feature_columns"] = nlohmann::ordered_json::array();
    return d;
}

void SeasonalNaiveModel::set_parameters(std::span<const double> params) {
    if (!params.empty()) throw DataError("seasonal naive has no parameters");
}

std::vector<double> SeasonalNaiveModel::predict(const features::FeatureFrame& frame,
                                                std::span<const std::size_t> rows) const {
    std::vector<double> out;
    out.reserve(rows.size());
    for (std::size_t k : rows) out.push_back(to_kw(seasonal_naive_at(frame.demand_kw, k + 1, lag_), 1.0));
    return out;
}

}  // namespace edf::forecast
