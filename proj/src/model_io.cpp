#include "edf/model.hpp"

#include "edf/arx.hpp"
#include "edf/fedxgb.hpp"
#include "edf/gbt.hpp"
#include "edf/rnn.hpp"
#include "edf/seasonal.hpp"
#include "edf/util.hpp"

#include <cmath>

namespace edf::forecast {

namespace {

constexpr const char* kFormat = "edf-model/1";

nlohmann::ordered_json normalization_json(const features::NormalizationSpec& spec) {
    nlohmann::ordered_json j;
    nlohmann::ordered_json nominal = nlohmann::ordered_json::object();
    for (const auto& [id, kw] : spec.nominal_power_kw) nominal[id] = kw;
    j["nominal_power_kw"] = std::move(nominal);
    j["fleet_nominal_max_kw"] = spec.fleet_nominal_max_kw;
    j["downtime_max"] = spec.downtime_max;
    j["sessions_max"] = spec.sessions_max;
    j["charge_hours_cap"] = spec.charge_hours_cap;
    return j;
}

features::NormalizationSpec normalization_from(const nlohmann::json& j) {
    features::NormalizationSpec spec;
    for (const auto& [id, kw] : j.at("nominal_power_kw").items()) spec.nominal_power_kw[id] = kw.get<double>();
    spec.fleet_nominal_max_kw = j.at("fleet_nominal_max_kw").get<double>();
    spec.downtime_max = j.at("downtime_max").get<double>();
    spec.sessions_max = j.at("sessions_max").get<double>();
    spec.charge_hours_cap = j.at("charge_hours_cap").get<double>();
    spec.validate();
    return spec;
}

}  // namespace

double to_kw(double normalized, double power_scale_kw) {
    const double kw = normalized * power_scale_kw;
    if (!std::isfinite(kw) || kw < 0.0) return 0.0;
    return kw;
}

void save_model(std::ostream& out, const ForecastModel& model, const features::NormalizationSpec& normalization) {
    nlohmann::ordered_json j;
    j["format"] = kFormat;
    j["family"] = model.family();
    j["description"] = model.describe();
    auto layout = nlohmann::ordered_json::array();
    for (const auto& b : model.layout()) layout.push_back({{"name", b.name}, {"offset", b.offset}, {"size", b.size}});
    j["layout"] = std::move(layout);
    j["normalization"] = normalization_json(normalization);
    j["parameters"] = model.parameters();
    out << j.dump() << '\n';
}

LoadedModel load_model(std::istream& in) {
    nlohmann::ordered_json j;
    try {
        j = nlohmann::ordered_json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("model file is not valid JSON: ") + e.what());
    }
    try {
        if (j.at("format").get<std::string>() != kFormat) throw DataError("unsupported model format");
        const auto family = j.at("family").get<std::string>();
        const auto& d = j.at("description");
        const auto params = j.at("parameters").get<std::vector<double>>();
        LoadedModel loaded;
        loaded.normalization = normalization_from(j.at("normalization"));
        if (family == "gbt") {
            loaded.model = GbtModel::restore(d, params);
        } else if (family == "gru" || family == "lstm" || family == "bigru" || family == "bilstm") {
            loaded.model = RnnModel::restore(d, params);
        } else if (family == "arx") {
            loaded.model = ArxModel::restore(d, params);
        } else if (family == "seasonal_naive") {
            loaded.model = std::make_unique<SeasonalNaiveModel>(d.at("hyperparameters").at("lag").get<std::size_t>());
        } else if (family == "fedxgb") {
            loaded.model = federation::FedXgbModel::restore(d, params);
        } else {
            throw DataError("unknown model family '" + family + "'");
        }
        return loaded;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed model file: ") + e.what());
    }
}

}  // namespace edf::forecast
