#include "edf/ingest.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>
#include <unordered_map>

namespace edf::ingest {

EnergyTransaction make_transaction(std::string evse_id, Timestamp t_start, Timestamp t_end, double energy_kwh,
                                   std::string evse_model, GeoPoint location, double nominal_power_kw) {
    EnergyTransaction tx;
    tx.evse_id = std::move(evse_id);
    tx.t_start = t_start;
    tx.t_end = t_end;
    tx.energy_kwh = energy_kwh;
    tx.evse_model = std::move(evse_model);
    tx.location = location;
    tx.nominal_power_kw = nominal_power_kw;
    const double hours = tx.duration_hours();
    tx.avg_power_kw = hours > 0.0 ? energy_kwh / hours : 0.0;
    return tx;
}

namespace {

struct ColumnIndex {
    std::ptrdiff_t evse_id = -1, t_start = -1, t_end = -1, energy = -1;
    std::ptrdiff_t model = -1, lat = -1, lon = -1, nominal = -1;
};

std::ptrdiff_t find_column(const std::vector<std::string>& header, const std::string& name) {
    if (name.empty()) return -1;
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (trim(header[i]) == name) return static_cast<std::ptrdiff_t>(i);
    }
    return -1;
}

std::string field(const std::vector<std::string>& row, std::ptrdiff_t col) {
    if (col < 0 || static_cast<std::size_t>(col) >= row.size()) return {};
    return trim(row[static_cast<std::size_t>(col)]);
}

}  // namespace

ParseResult parse_transactions(std::istream& source, const ColumnSchema& schema) {
    ParseResult result;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(source, line)) {
        ++line_no;
        if (!trim(line).empty()) break;
    }
    if (trim(line).empty()) return result;

    const auto header = split_delimited(line, schema.delimiter);
    ColumnIndex idx;
    idx.evse_id = find_column(header, schema.evse_id);
    idx.t_start = find_column(header, schema.t_start);
    idx.t_end = find_column(header, schema.t_end);
    idx.energy = find_column(header, schema.energy_kwh);
    idx.model = find_column(header, schema.evse_model);
    idx.lat = find_column(header, schema.lat);
    idx.lon = find_column(header, schema.lon);
    idx.nominal = find_column(header, schema.nominal_power_kw);
    const std::pair<std::ptrdiff_t, const std::string*> mandatory[] = {
        {idx.evse_id, &schema.evse_id}, {idx.t_start, &schema.t_start},
        {idx.t_end, &schema.t_end},     {idx.energy, &schema.energy_kwh}};
    for (const auto& [col, name] : mandatory) {
        if (col < 0) throw ConfigError("missing mandatory column '" + *name + "'");
    }

    while (std::getline(source, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto row = split_delimited(line, schema.delimiter);
        auto reject = [&](std::string reason) { result.rejects.push_back({line_no, std::move(reason)}); };

        const std::string id = field(row, idx.evse_id);
        if (id.empty()) {
            reject("missing evse id");
            continue;
        }
        const auto start = time::parse_iso8601(field(row, idx.t_start));
        if (!start) {
            reject("unparseable t_start");
            continue;
        }
        const auto end = time::parse_iso8601(field(row, idx.t_end));
        if (!end) {
            reject("unparseable t_end");
            continue;
        }
        const auto energy = parse_finite_double(field(row, idx.energy));
        if (!energy) {
            reject("non-numeric energy");
            continue;
        }
        if (*end <= *start) {
            reject("non-positive duration");
            continue;
        }
        GeoPoint location;
        if (idx.lat >= 0 || idx.lon >= 0) {
            const auto lat = parse_finite_double(field(row, idx.lat));
            const auto lon = parse_finite_double(field(row, idx.lon));
            if (!lat || !lon) {
                reject("non-numeric location");
                continue;
            }
            location = {*lat, *lon};
        }
        double nominal = 0.0;
        if (idx.nominal >= 0) {
            const std::string text = field(row, idx.nominal);
            if (!text.empty()) {
                const auto value = parse_finite_double(text);
                if (!value || *value < 0.0) {
                    reject("non-numeric nominal power");
                    continue;
                }
                nominal = *value;
            }
        }
        result.transactions.push_back(
            make_transaction(id, *start, *end, *energy, field(row, idx.model), location, nominal));
    }
    return result;
}

CleaningResult clean_transactions(const std::vector<EnergyTransaction>& txs, const CleaningRules& rules) {
    CleaningResult result;
    std::vector<EnergyTransaction> valid;
    valid.reserve(txs.size());
    const std::string too_much_energy = "energy > " + format_double(rules.max_energy_kwh) + " kWh";
    const std::string too_long = "duration > " + format_double(rules.max_duration_hours) + " h";
    for (const auto& tx : txs) {
        const char* why = nullptr;
        std::string dynamic_reason;
        if (!std::isfinite(tx.energy_kwh)) {
            why = "non-finite energy";
        } else if (tx.energy_kwh <= 0.0) {
            why = "energy <= 0 kWh";
        } else if (tx.energy_kwh > rules.max_energy_kwh) {
            dynamic_reason = too_much_energy;
        } else if (tx.t_end <= tx.t_start) {
            why = "non-positive duration";
        } else if (tx.duration_hours() > rules.max_duration_hours) {
            dynamic_reason = too_long;
        }
        if (why != nullptr) {
            result.dropped.push_back({tx, why});
        } else if (!dynamic_reason.empty()) {
            result.dropped.push_back({tx, std::move(dynamic_reason)});
        } else {
            valid.push_back(tx);
        }
    }

    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& tx : valid) ++counts[tx.evse_id];
    const std::string too_few =
        "EVSE below " + std::to_string(rules.min_transactions_per_evse) + " transactions";
    for (auto& tx : valid) {
        if (counts[tx.evse_id] < rules.min_transactions_per_evse) {
            result.dropped.push_back({std::move(tx), too_few});
        } else {
            result.kept.push_back(std::move(tx));
        }
    }
    return result;
}

std::map<std::string, EvseInfo> collect_evse_info(const std::vector<EnergyTransaction>& txs) {
    std::map<std::string, EvseInfo> info;
    for (const auto& tx : txs) {
        auto [it, inserted] = info.try_emplace(tx.evse_id);
        EvseInfo& e = it->second;
        if (inserted) {
            e.evse_id = tx.evse_id;
            e.evse_model = tx.evse_model;
            e.location = tx.location;
        } else {
            // Lexicographically smallest label wins so the result does not depend on row order.
            if (tx.evse_model < e.evse_model) e.evse_model = tx.evse_model;
            if (tx.location < e.location) e.location = tx.location;
        }
        e.nominal_power_kw = std::max(e.nominal_power_kw, tx.nominal_power_kw);
    }
    return info;
}

Timestamp common_origin(const std::vector<EnergyTransaction>& txs) {
    if (txs.empty()) throw DataError("cannot derive a temporal origin from zero transactions");
    Timestamp earliest = txs.front().t_start;
    for (const auto& tx : txs) earliest = std::min(earliest, tx.t_start);
    return time::floor_to_midnight(earliest);
}

std::vector<DemandSeries> resample_demand(const std::vector<EnergyTransaction>& txs, Timestamp origin,
                                          Seconds sr_freq) {
    if (sr_freq.count() <= 0) throw ConfigError("sampling frequency must be positive");

    std::vector<const EnergyTransaction*> ordered;
    ordered.reserve(txs.size());
    for (const auto& tx : txs) ordered.push_back(&tx);
    std::sort(ordered.begin(), ordered.end(), [](const EnergyTransaction* a, const EnergyTransaction* b) {
        return std::tie(a->evse_id, a->t_start, a->t_end, a->energy_kwh) <
               std::tie(b->evse_id, b->t_start, b->t_end, b->energy_kwh);
    });

    Timestamp latest_end = origin;
    for (const auto* tx : ordered) latest_end = std::max(latest_end, tx->t_end);
    const long long freq = sr_freq.count();
    const long long span = (latest_end - origin).count();
    const std::size_t n_bins = span <= 0 ? 0 : static_cast<std::size_t>((span + freq - 1) / freq);

    std::vector<DemandSeries> out;
    std::vector<std::vector<double>> charge_hours_sum;
    for (const auto* tx : ordered) {
        if (out.empty() || out.back().evse_id != tx->evse_id) {
            DemandSeries s;
            s.evse_id = tx->evse_id;
            s.origin = origin;
            s.sr_freq = sr_freq;
            s.values.assign(n_bins, 0.0);
            s.sessions_per_bin.assign(n_bins, 0);
            s.avg_charge_hours_per_bin.assign(n_bins, 0.0);
            out.push_back(std::move(s));
            charge_hours_sum.emplace_back(n_bins, 0.0);
        }
        if (n_bins == 0) continue;
        DemandSeries& s = out.back();
        auto& hours_sum = charge_hours_sum.back();

        const long long a = std::max<long long>((tx->t_start - origin).count(), 0);
        const long long b = (tx->t_end - origin).count();
        if (b <= a) continue;
        const std::size_t first = static_cast<std::size_t>(a / freq);
        const std::size_t last = std::min(n_bins - 1, static_cast<std::size_t>((b - 1) / freq));
        for (std::size_t k = first; k <= last; ++k) {
            const long long lo = std::max<long long>(a, static_cast<long long>(k) * freq);
            const long long hi = std::min<long long>(b, static_cast<long long>(k + 1) * freq);
            if (hi <= lo) continue;
            const double overlap = static_cast<double>(hi - lo);
            s.values[k] += tx->avg_power_kw * overlap / static_cast<double>(freq);
            s.sessions_per_bin[k] += 1;
            hours_sum[k] += overlap / kSecondsPerHour;
        }
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        for (std::size_t k = 0; k < n_bins; ++k) {
            const auto n = out[i].sessions_per_bin[k];
            out[i].avg_charge_hours_per_bin[k] = n == 0 ? 0.0 : charge_hours_sum[i][k] / static_cast<double>(n);
        }
    }
    return out;
}

TemporalSplit split_temporal(std::size_t axis_length, SplitRatios ratios) {
    if (axis_length < 10) throw DataError("series too short to split");
    if (ratios.train <= 0.0 || ratios.valid < 0.0 || ratios.train + ratios.valid >= 1.0) {
        throw ConfigError("split ratios must satisfy train > 0, valid >= 0, train + valid < 1");
    }
    // The small guard keeps exact products such as 0.7 * 30 from flooring to 20.
    constexpr double kGuard = 1e-9;
    const double n = static_cast<double>(axis_length);
    TemporalSplit split;
    split.length = axis_length;
    split.train_end = static_cast<std::size_t>(std::floor(n * ratios.train + kGuard));
    split.valid_end = split.train_end + static_cast<std::size_t>(std::floor(n * ratios.valid + kGuard));
    return split;
}

void write_demand_series(std::ostream& out, const DemandSeries& series) {
    out << "bin_start,power_kw,sessions,avg_charge_hours\n";
    for (std::size_t k = 0; k < series.size(); ++k) {
        out << time::format_iso8601(series.bin_start(k)) << ',' << format_double(series.values[k]) << ','
            << series.sessions_per_bin[k] << ',' << format_double(series.avg_charge_hours_per_bin[k]) << '\n';
    }
}

void write_transactions(std::ostream& out, const std::vector<EnergyTransaction>& txs) {
    out << "evse_id,t_start,t_end,energy_kwh,evse_model,lat,lon,nominal_power_kw\n";
    for (const auto& tx : txs) {
        out << tx.evse_id << ',' << time::format_iso8601(tx.t_start) << ',' << time::format_iso8601(tx.t_end) << ','
            << format_double(tx.energy_kwh) << ',' << tx.evse_model << ',' << format_double(tx.location.lat) << ','
            << format_double(tx.location.lon) << ',' << format_double(tx.nominal_power_kw) << '\n';
    }
}

std::string cleaning_report_json(const ParseResult& parsed, const CleaningResult& cleaned) {
    nlohmann::ordered_json report;
    report["rows_parsed"] = parsed.transactions.size();
    report["rows_rejected"] = parsed.rejects.size();
    std::map<std::string, std::size_t> reject_reasons;
    for (const auto& r : parsed.rejects) ++reject_reasons[r.reason];
    report["reject_reasons"] = reject_reasons;
    report["kept"] = cleaned.kept.size();
    report["dropped"] = cleaned.dropped.size();
    std::map<std::string, std::size_t> drop_reasons;
    for (const auto& d : cleaned.dropped) ++drop_reasons[d.reason];
    report["drop_reasons"] = drop_reasons;
    std::set<std::string> evses;
    for (const auto& tx : cleaned.kept) evses.insert(tx.evse_id);
    report["evse_retained"] = evses.size();
    return report.dump(2) + "\n";
}

}  // namespace edf::ingest
