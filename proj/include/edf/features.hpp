#pragma once

#include "edf/ingest.hpp"

#include <array>
#include <cstddef>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace edf::features {

inline constexpr double kLogEpsilon = 1e-9;

/// e^(-downtime); downtime counts bins since the last non-zero demand.
double activity_score(std::size_t downtime);

/// log(p_k + ε) − log(p_km1 + ε)
double log_delta(double p_k, double p_km1);

struct CyclicalEncoding {
    double hour_sin, hour_cos;
    double day_sin, day_cos;
    double week_sin, week_cos;
};

/// Phases 2π·hour/24, 2π·weekday/7 (Monday = 0), 2π·(ISO week mod 52)/52.
CyclicalEncoding cyclical_encode(Timestamp ts);

/// Trailing sample standard deviation; the first rows use the partial window and a single
/// observation yields 0.
std::vector<double> rolling_std(std::span<const double> values, std::size_t window);

/// EMA with smoothing 2/(window+1), seeded with the first value.
std::vector<double> exponential_moving_average(std::span<const double> values, std::size_t window);

/// Least-squares line through the trailing points, evaluated one step ahead and clipped at 0.
/// Fewer than two points give 0.
double linear_extrapolation(std::span<const double> trailing);

/// Bins since the last strictly positive value; before the first positive value the count
/// runs from the start of the series (k + 1).
std::vector<std::size_t> downtime_series(std::span<const double> values);

struct RollingColumns {
    std::vector<double> std_lag0, std_lag24, std_lag48;
    std::vector<double> ema_lag0, ema_lag24, ema_lag48;
};

/// Lagged columns are NaN where the shifted row does not exist.
RollingColumns rolling_features(std::span<const double> values, std::size_t window);

/// Scales shared by every feature frame. All maxima must be strictly positive.
struct NormalizationSpec {
    std::map<std::string, double> nominal_power_kw;  // per EVSE, divides every power feature
    double fleet_nominal_max_kw = 1.0;                // divides the nominal-power feature
    double downtime_max = 1.0;                        // train-set maximum
    double sessions_max = 1.0;                        // train-set maximum
    double charge_hours_cap = 48.0;

    void validate() const;
    double power_scale(const std::string& evse_id) const;
};

/// Nominal rating from metadata when present, otherwise the EVSE's largest training-block demand.
/// Count maxima come from training bins only and are floored at 1.
NormalizationSpec compute_normalization(const std::vector<ingest::DemandSeries>& series,
                                        const std::map<std::string, ingest::EvseInfo>& info,
                                        const ingest::TemporalSplit& split);

enum class Column : std::size_t {
    HourSin,
    HourCos,
    DaySin,
    DayCos,
    WeekSin,
    WeekCos,
    ActivityScore,
    Downtime,
    Sessions,
    AvgChargeHours,
    DemandLag0,
    DemandLag1,
    DemandLag5,
    DemandLag48,
    RollingStdLag0,
    RollingStdLag24,
    RollingStdLag48,
    EmaLag0,
    EmaLag24,
    EmaLag48,
    LogDelta,
    LinearExtrapolation,
    NominalPower,
};

inline constexpr std::size_t kColumnCount = 23;

/// Stable export order; index i names Column(i).
const std::array<std::string_view, kColumnCount>& column_names();

using FeatureMask = std::vector<Column>;

/// Exogenous regressors of the autoregressive baseline: calendar, activity, sessions, charge time.
FeatureMask arx_exogenous_mask();
/// Every column except the activity score.
FeatureMask gbt_feature_mask();
/// Time-dependent inputs for the recurrent models: everything except the explicit lags of
/// demand history (lag 1/5/48 and all rolling columns) and the static nominal power.
FeatureMask rnn_feature_mask();

FeatureMask parse_mask(const std::vector<std::string>& names);
std::vector<std::string> mask_names(const FeatureMask& mask);

enum class Role { Train, Validation, Test };

/// Engineered features for one EVSE, one row per bin. Row k predicts bin k+1.
struct FeatureFrame {
    std::string evse_id;
    std::string evse_model;    // categorical label for the recurrent models' embedding
    std::string location_key;  // "lat,lon"
    std::vector<Timestamp> index;
    std::vector<double> values;  // row-major, index.size() × kColumnCount; NaN where history is missing
    std::vector<double> target;  // normalized demand at k+1; NaN on the last row
    std::vector<double> demand_kw;
    double power_scale_kw = 1.0;
    std::size_t first_complete_row = 48;
    ingest::TemporalSplit split;

    std::size_t rows() const { return index.size(); }
    double at(std::size_t row, Column col) const { return values[row * kColumnCount + static_cast<std::size_t>(col)]; }
    std::span<const double> row(std::size_t k) const {
        return std::span<const double>(values).subspan(k * kColumnCount, kColumnCount);
    }
    /// Role of row k is decided by its target bin k+1.
    Role role(std::size_t k) const;
    /// Rows with complete history and a defined target, in ascending order.
    std::vector<std::size_t> rows_for(Role role) const;

    double denormalize(double normalized) const { return normalized * power_scale_kw; }
    std::string hash() const;
};

struct FrameOptions {
    std::size_t rolling_window = 5;
};

/// Throws ConfigError on non-positive normalization maxima and DataError on series that are too
/// short to carry the 48-bin history.
FeatureFrame build_feature_frame(const ingest::DemandSeries& series, const NormalizationSpec& spec,
                                 const ingest::TemporalSplit& split, const FrameOptions& options = {},
                                 const ingest::EvseInfo* info = nullptr);

/// Columnar text: bin_start, the columns in column_names() order, then target.
void write_feature_frame(std::ostream& out, const FeatureFrame& frame);

}  // namespace edf::features
