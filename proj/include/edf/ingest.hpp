#pragma once

#include "edf/util.hpp"

#include <cstddef>
#include <istream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace edf::ingest {

struct GeoPoint {
    double lat = 0.0;
    double lon = 0.0;

    auto operator<=>(const GeoPoint&) const = default;
};

/// One charging session between an EV and an EVSE.
struct EnergyTransaction {
    std::string evse_id;
    Timestamp t_start{};
    Timestamp t_end{};
    double energy_kwh = 0.0;
    double avg_power_kw = 0.0;  // energy_kwh / duration_hours
    std::string evse_model;
    GeoPoint location;
    double nominal_power_kw = 0.0;  // 0 when the source carries no nominal rating

    double duration_hours() const { return static_cast<double>((t_end - t_start).count()) / kSecondsPerHour; }
};

/// Builds a transaction and derives its average power.
EnergyTransaction make_transaction(std::string evse_id, Timestamp t_start, Timestamp t_end, double energy_kwh,
                                   std::string evse_model = {}, GeoPoint location = {},
                                   double nominal_power_kw = 0.0);

/// Maps logical fields to header names in the source file. Empty optional names are absent columns.
struct ColumnSchema {
    std::string evse_id = "evse_id";
    std::string t_start = "t_start";
    std::string t_end = "t_end";
    std::string energy_kwh = "energy_kwh";
    std::string evse_model = "evse_model";
    std::string lat = "lat";
    std::string lon = "lon";
    std::string nominal_power_kw = "nominal_power_kw";
    char delimiter = ',';
};

struct RejectedRow {
    std::size_t line = 0;  // 1-based, header is line 1
    std::string reason;
};

struct ParseResult {
    std::vector<EnergyTransaction> transactions;
    std::vector<RejectedRow> rejects;
};

/// Reads one transaction per row. Throws ConfigError when a mandatory column is missing.
ParseResult parse_transactions(std::istream& source, const ColumnSchema& schema = {});

struct CleaningRules {
    double max_energy_kwh = 200.0;
    double max_duration_hours = 48.0;
    std::size_t min_transactions_per_evse = 100;
};

struct DroppedTransaction {
    EnergyTransaction transaction;
    std::string reason;
};

struct CleaningResult {
    std::vector<EnergyTransaction> kept;
    std::vector<DroppedTransaction> dropped;
};

/// Drop reasons read "energy > 200 kWh", "duration > 48 h", "EVSE below 100 transactions" with the
/// configured thresholds substituted, plus "non-finite energy", "energy <= 0 kWh", "non-positive duration".
/// Applies record-level filters first, then the per-EVSE transaction-count filter.
/// Kept transactions retain their input order.
CleaningResult clean_transactions(const std::vector<EnergyTransaction>& txs, const CleaningRules& rules = {});

/// Static per-EVSE attributes gathered from its transactions.
struct EvseInfo {
    std::string evse_id;
    std::string evse_model;
    GeoPoint location;
    double nominal_power_kw = 0.0;
};

std::map<std::string, EvseInfo> collect_evse_info(const std::vector<EnergyTransaction>& txs);

/// Regular time series of average power per bin for one EVSE.
struct DemandSeries {
    std::string evse_id;
    Timestamp origin{};
    Seconds sr_freq{12 * 3600};
    std::vector<double> values;  // kW
    std::vector<std::size_t> sessions_per_bin;
    std::vector<double> avg_charge_hours_per_bin;

    std::size_t size() const { return values.size(); }
    Timestamp bin_start(std::size_t k) const { return origin + sr_freq * static_cast<long long>(k); }
    double bin_hours() const { return static_cast<double>(sr_freq.count()) / kSecondsPerHour; }
};

/// Earliest transaction start floored to midnight UTC.
Timestamp common_origin(const std::vector<EnergyTransaction>& txs);

/// Overlap-weighted aggregation onto the grid [origin, origin + n·sr_freq), where n covers the
/// latest transaction end across all EVSEs, so every series shares one axis. Result is ordered
/// by evse_id and independent of input order.
std::vector<DemandSeries> resample_demand(const std::vector<EnergyTransaction>& txs, Timestamp origin,
                                          Seconds sr_freq = Seconds{12 * 3600});

/// Contiguous train / validation / test blocks on the common axis.
struct TemporalSplit {
    std::size_t train_end = 0;  // [0, train_end)
    std::size_t valid_end = 0;  // [train_end, valid_end); test is [valid_end, length)
    std::size_t length = 0;
};

struct SplitRatios {
    double train = 0.7;
    double valid = 0.2;
};

TemporalSplit split_temporal(std::size_t axis_length, SplitRatios ratios = {});

void write_demand_series(std::ostream& out, const DemandSeries& series);
void write_transactions(std::ostream& out, const std::vector<EnergyTransaction>& txs);

/// Cleaning statistics as a JSON document.
std::string cleaning_report_json(const ParseResult& parsed, const CleaningResult& cleaned);

}  // namespace edf::ingest
