#include "edf/features.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

namespace edf::features {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kTwoPi = 2.0 * std::numbers::pi;

std::vector<double> shifted(const std::vector<double>& column, std::size_t lag) {
    std::vector<double> out(column.size(), kNaN);
    for (std::size_t k = lag; k < column.size(); ++k) out[k] = column[k - lag];
    return out;
}

}  // namespace

double activity_score(std::size_t downtime) {
    return std::exp(-static_cast<double>(downtime));
}

double log_delta(double p_k, double p_km1) {
    return std::log(p_k + kLogEpsilon) - std::log(p_km1 + kLogEpsilon);
}

CyclicalEncoding cyclical_encode(Timestamp ts) {
    const double hour_phase = kTwoPi * time::hour_of_day(ts) / 24.0;
    const double day_phase = kTwoPi * static_cast<double>(time::weekday_monday0(ts)) / 7.0;
    const double week_phase = kTwoPi * static_cast<double>(time::iso_week(ts) % 52) / 52.0;
    return {std::sin(hour_phase), std::cos(hour_phase), std::sin(day_phase),
            std::cos(day_phase),  std::sin(week_phase), std::cos(week_phase)};
}

std::vector<double> rolling_std(std::span<const double> values, std::size_t window) {
    if (window == 0) throw ConfigError("rolling window must be positive");
    std::vector<double> out(values.size(), 0.0);
    for (std::size_t k = 0; k < values.size(); ++k) {
        const std::size_t begin = k + 1 >= window ? k + 1 - window : 0;
        const std::size_t n = k + 1 - begin;
        if (n < 2) continue;
        // Shifting by the first element keeps constant windows at exactly zero.
        const double pivot = values[begin];
        double mean = 0.0;
        for (std::size_t i = begin; i <= k; ++i) mean += values[i] - pivot;
        mean /= static_cast<double>(n);
        double ss = 0.0;
        for (std::size_t i = begin; i <= k; ++i) {
            const double d = values[i] - pivot - mean;
            ss += d * d;
        }
        out[k] = std::sqrt(ss / static_cast<double>(n - 1));
    }
    return out;
}

std::vector<double> exponential_moving_average(std::span<const double> values, std::size_t window) {
    if (window == 0) throw ConfigError("rolling window must be positive");
    std::vector<double> out(values.size(), 0.0);
    if (values.empty()) return out;
    const double smoothing = 2.0 / (static_cast<double>(window) + 1.0);
    double ema = values[0];
    out[0] = ema;
    for (std::size_t k = 1; k < values.size(); ++k) {
        ema += smoothing * (values[k] - ema);
        out[k] = ema;
    }
    return out;
}

double linear_extrapolation(std::span<const double> trailing) {
    const std::size_t n = trailing.size();
    if (n < 2) return 0.0;
    const double t_mean = (static_cast<double>(n) - 1.0) / 2.0;
    double y_mean = 0.0;
    for (double y : trailing) y_mean += y;
    y_mean /= static_cast<double>(n);
    double sxy = 0.0;
    double sxx = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double dt = static_cast<double>(t) - t_mean;
        sxy += dt * (trailing[t] - y_mean);
        sxx += dt * dt;
    }
    const double slope = sxy / sxx;
    return std::max(0.0, y_mean + slope * (static_cast<double>(n) - t_mean));
}

std::vector<std::size_t> downtime_series(std::span<const double> values) {
    std::vector<std::size_t> out(values.size(), 0);
    std::ptrdiff_t last_active = -1;
    for (std::size_t k = 0; k < values.size(); ++k) {
        if (values[k] > 0.0) last_active = static_cast<std::ptrdiff_t>(k);
        out[k] = static_cast<std::size_t>(static_cast<std::ptrdiff_t>(k) - last_active);
        if (values[k] > 0.0) out[k] = 0;
    }
    return out;
}

RollingColumns rolling_features(std::span<const double> values, std::size_t window) {
    RollingColumns cols;
    cols.std_lag0 = rolling_std(values, window);
    cols.ema_lag0 = exponential_moving_average(values, window);
    cols.std_lag24 = shifted(cols.std_lag0, 24);
    cols.std_lag48 = shifted(cols.std_lag0, 48);
    cols.ema_lag24 = shifted(cols.ema_lag0, 24);
    cols.ema_lag48 = shifted(cols.ema_lag0, 48);
    return cols;
}

void NormalizationSpec::validate() const {
    const auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
    if (!positive(fleet_nominal_max_kw)) throw ConfigError("normalization: fleet nominal maximum must be positive");
    if (!positive(downtime_max)) throw ConfigError("normalization: downtime maximum must be positive");
    if (!positive(sessions_max)) throw ConfigError("normalization: sessions maximum must be positive");
    if (!positive(charge_hours_cap)) throw ConfigError("normalization: charge-hours cap must be positive");
    for (const auto& [id, kw] : nominal_power_kw) {
        if (!positive(kw)) throw ConfigError("normalization: nominal power of " + id + " must be positive");
    }
}

double NormalizationSpec::power_scale(const std::string& evse_id) const {
    const auto it = nominal_power_kw.find(evse_id);
    if (it == nominal_power_kw.end()) throw ConfigError("normalization: no nominal power for EVSE " + evse_id);
    return it->second;
}

NormalizationSpec compute_normalization(const std::vector<ingest::DemandSeries>& series,
                                        const std::map<std::string, ingest::EvseInfo>& info,
                                        const ingest::TemporalSplit& split) {
    NormalizationSpec spec;
    double downtime_max = 0.0;
    double sessions_max = 0.0;
    double fleet_max = 0.0;
    for (const auto& s : series) {
        const std::size_t train_end = std::min(split.train_end, s.size());
        double scale = 0.0;
        const auto it = info.find(s.evse_id);
        if (it != info.end() && it->second.nominal_power_kw > 0.0) {
            scale = it->second.nominal_power_kw;
        } else {
            for (std::size_t k = 0; k < train_end; ++k) scale = std::max(scale, s.values[k]);
        }
        spec.nominal_power_kw[s.evse_id] = scale;
        fleet_max = std::max(fleet_max, scale);

        const auto downtime = downtime_series(s.values);
        for (std::size_t k = 0; k < train_end; ++k) {
            downtime_max = std::max(downtime_max, static_cast<double>(downtime[k]));
            sessions_max = std::max(sessions_max, static_cast<double>(s.sessions_per_bin[k]));
        }
    }
    spec.fleet_nominal_max_kw = fleet_max;
    spec.downtime_max = std::max(1.0, downtime_max);
    spec.sessions_max = std::max(1.0, sessions_max);
    return spec;
}

const std::array<std::string_view, kColumnCount>& column_names() {
    static const std::array<std::string_view, kColumnCount> names{
        "hour_sin",         "hour_cos",        "day_sin",          "day_cos",
        "week_sin",         "week_cos",        "activity_score",   "downtime",
        "sessions",         "avg_charge_hours", "demand_lag0",     "demand_lag1",
        "demand_lag5",      "demand_lag48",    "rolling_std_lag0", "rolling_std_lag24",
        "rolling_std_lag48", "ema_lag0",       "ema_lag24",        "ema_lag48",
        "log_delta",        "linear_extrapolation", "nominal_power_norm"};
    return names;
}

FeatureMask arx_exogenous_mask() {
    return {Column::HourSin, Column::HourCos,       Column::DaySin,   Column::DayCos,        Column::WeekSin,
            Column::WeekCos, Column::ActivityScore, Column::Sessions, Column::AvgChargeHours};
}

FeatureMask gbt_feature_mask() {
    FeatureMask mask;
    for (std::size_t c = 0; c < kColumnCount; ++c) {
        if (static_cast<Column>(c) != Column::ActivityScore) mask.push_back(static_cast<Column>(c));
    }
    return mask;
}

FeatureMask rnn_feature_mask() {
    return {Column::HourSin,        Column::HourCos,       Column::DaySin,     Column::DayCos,
            Column::WeekSin,        Column::WeekCos,       Column::ActivityScore, Column::Downtime,
            Column::Sessions,       Column::AvgChargeHours, Column::DemandLag0, Column::LogDelta,
            Column::LinearExtrapolation};
}

FeatureMask parse_mask(const std::vector<std::string>& names) {
    FeatureMask mask;
    const auto& all = column_names();
    for (const auto& name : names) {
        const auto it = std::find(all.begin(), all.end(), name);
        if (it == all.end()) throw ConfigError("unknown feature column '" + name + "'");
        mask.push_back(static_cast<Column>(it - all.begin()));
    }
    return mask;
}

std::vector<std::string> mask_names(const FeatureMask& mask) {
    std::vector<std::string> names;
    for (Column c : mask) names.emplace_back(column_names()[static_cast<std::size_t>(c)]);
    return names;
}

Role FeatureFrame::role(std::size_t k) const {
    const std::size_t target_bin = k + 1;
    if (target_bin < split.train_end) return Role::Train;
    if (target_bin < split.valid_end) return Role::Validation;
    return Role::Test;
}

std::vector<std::size_t> FeatureFrame::rows_for(Role wanted) const {
    std::vector<std::size_t> out;
    for (std::size_t k = first_complete_row; k + 1 < rows(); ++k) {
        if (role(k) == wanted) out.push_back(k);
    }
    return out;
}

std::string FeatureFrame::hash() const {
    std::string bytes = evse_id;
    bytes.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(double));
    bytes.append(reinterpret_cast<const char*>(target.data()), target.size() * sizeof(double));
    return sha256_hex(bytes);
}

FeatureFrame build_feature_frame(const ingest::DemandSeries& series, const NormalizationSpec& spec,
                                 const ingest::TemporalSplit& split, const FrameOptions& options,
                                 const ingest::EvseInfo* info) {
    spec.validate();
    const std::size_t n = series.size();
    const std::size_t window = options.rolling_window;
    if (window < 2) throw ConfigError("rolling window must be at least 2");
    if (n <= 48 + window) throw DataError("series " + series.evse_id + " too short for 48-bin feature history");

    FeatureFrame frame;
    frame.evse_id = series.evse_id;
    if (info != nullptr) {
        frame.evse_model = info->evse_model;
        frame.location_key = format_double(info->location.lat) + "," + format_double(info->location.lon);
    }
    frame.split = split;
    frame.first_complete_row = 48;
    frame.demand_kw = series.values;
    frame.power_scale_kw = spec.power_scale(series.evse_id);
    frame.index.reserve(n);
    for (std::size_t k = 0; k < n; ++k) frame.index.push_back(series.bin_start(k));

    const double scale = frame.power_scale_kw;
    std::vector<double> normalized(n);
    for (std::size_t k = 0; k < n; ++k) normalized[k] = series.values[k] / scale;

    const auto downtime = downtime_series(series.values);
    const auto rolling = rolling_features(normalized, window);
    const double nominal_norm = scale / spec.fleet_nominal_max_kw;

    frame.values.assign(n * kColumnCount, kNaN);
    frame.target.assign(n, kNaN);
    for (std::size_t k = 0; k < n; ++k) {
        double* row = frame.values.data() + k * kColumnCount;
        auto set = [row](Column c, double v) { row[static_cast<std::size_t>(c)] = v; };
        const auto cyc = cyclical_encode(frame.index[k]);
        set(Column::HourSin, cyc.hour_sin);
        set(Column::HourCos, cyc.hour_cos);
        set(Column::DaySin, cyc.day_sin);
        set(Column::DayCos, cyc.day_cos);
        set(Column::WeekSin, cyc.week_sin);
        set(Column::WeekCos, cyc.week_cos);
        set(Column::ActivityScore, activity_score(downtime[k]));
        set(Column::Downtime, static_cast<double>(downtime[k]) / spec.downtime_max);
        set(Column::Sessions, static_cast<double>(series.sessions_per_bin[k]) / spec.sessions_max);
        set(Column::AvgChargeHours, series.avg_charge_hours_per_bin[k] / spec.charge_hours_cap);
        set(Column::DemandLag0, normalized[k]);
        if (k >= 1) set(Column::DemandLag1, normalized[k - 1]);
        if (k >= 5) set(Column::DemandLag5, normalized[k - 5]);
        if (k >= 48) set(Column::DemandLag48, normalized[k - 48]);
        set(Column::RollingStdLag0, rolling.std_lag0[k]);
        set(Column::RollingStdLag24, rolling.std_lag24[k]);
        set(Column::RollingStdLag48, rolling.std_lag48[k]);
        set(Column::EmaLag0, rolling.ema_lag0[k]);
        set(Column::EmaLag24, rolling.ema_lag24[k]);
        set(Column::EmaLag48, rolling.ema_lag48[k]);
        if (k >= 1) set(Column::LogDelta, log_delta(series.values[k], series.values[k - 1]));
        const std::size_t begin = k + 1 >= window ? k + 1 - window : 0;
        const double extrapolated =
            linear_extrapolation(std::span<const double>(normalized).subspan(begin, k + 1 - begin));
        set(Column::LinearExtrapolation, std::min(1.0, extrapolated));
        set(Column::NominalPower, nominal_norm);
        if (k + 1 < n) frame.target[k] = normalized[k + 1];
    }
    return frame;
}

void write_feature_frame(std::ostream& out, const FeatureFrame& frame) {
    out << "bin_start";
    for (auto name : column_names()) out << ',' << name;
    out << ",target\n";
    for (std::size_t k = 0; k < frame.rows(); ++k) {
        out << time::format_iso8601(frame.index[k]);
        for (double v : frame.row(k)) out << ',' << (std::isnan(v) ? std::string{} : format_double(v));
        out << ',' << (std::isnan(frame.target[k]) ? std::string{} : format_double(frame.target[k])) << '\n';
    }
}

}  // namespace edf::features
