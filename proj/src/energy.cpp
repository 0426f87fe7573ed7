#include "edf/energy.hpp"

#include "edf/util.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <tuple>

namespace edf::energy {

namespace {

bool canonical_less(const LedgerEntry& a, const LedgerEntry& b) {
    return std::tie(a.phase, a.model, a.scope, a.round, a.epoch, a.joules) <
           std::tie(b.phase, b.model, b.scope, b.round, b.epoch, b.joules);
}

template <typename Pred>
double sorted_sum(std::vector<LedgerEntry> entries, Pred keep) {
    std::sort(entries.begin(), entries.end(), canonical_less);
    double sum = 0.0;
    for (const auto& e : entries) {
        if (keep(e)) sum += e.joules;
    }
    return sum;
}

}  // namespace

std::string to_string(Phase phase) {
    switch (phase) {
        case Phase::Centralized: return "centralized";
        case Phase::FedHeavy: return "fed-heavy";
        case Phase::FedLight: return "fed-light";
    }
    return "centralized";
}

Phase parse_phase(const std::string& text) {
    if (text == "centralized") return Phase::Centralized;
    if (text == "fed-heavy") return Phase::FedHeavy;
    if (text == "fed-light") return Phase::FedLight;
    throw ConfigError("unknown ledger phase '" + text + "'");
}

OpCountMeter::OpCountMeter(double joules_per_op) : joules_per_op_(joules_per_op) {
    if (!(joules_per_op_ > 0.0) || !std::isfinite(joules_per_op_)) throw ConfigError("joules per op must be positive");
}

double OpCountMeter::joules(const Measurement& m) const { return static_cast<double>(m.ops) * joules_per_op_; }

WallClockMeter::WallClockMeter(double watts) : watts_(watts) {
    if (!(watts_ > 0.0) || !std::isfinite(watts_)) throw ConfigError("device power must be positive");
}

double WallClockMeter::joules(const Measurement& m) const {
    if (!(m.seconds >= 0.0)) throw DataError("negative elapsed time");
    return m.seconds * watts_;
}

EnergyLedger::EnergyLedger(std::shared_ptr<const Meter> meter) : meter_(std::move(meter)) {
    if (!meter_) throw ConfigError("ledger needs a meter");
}

EnergyLedger::EnergyLedger(const EnergyLedger& other) : meter_(other.meter_), entries_(other.entries()) {}

EnergyLedger& EnergyLedger::operator=(const EnergyLedger& other) {
    if (this != &other) {
        auto copy = other.entries();
        std::lock_guard lock(mutex_);
        meter_ = other.meter_;
        entries_ = std::move(copy);
    }
    return *this;
}

LedgerEntry EnergyLedger::record(const std::string& model, Phase phase, const std::string& scope, std::size_t round,
                                 std::size_t epoch, const Measurement& measurement) {
    if (!(measurement.seconds >= 0.0)) throw DataError("negative measurement");
    LedgerEntry e{phase, model, scope, round, epoch, meter_->joules(measurement)};
    append(e);
    return e;
}

void EnergyLedger::append(LedgerEntry entry) {
    if (!(entry.joules >= 0.0) || !std::isfinite(entry.joules)) throw DataError("ledger entries must be non-negative");
    std::lock_guard lock(mutex_);
    entries_.push_back(std::move(entry));
}

std::vector<LedgerEntry> EnergyLedger::entries() const {
    std::lock_guard lock(mutex_);
    return entries_;
}

bool EnergyLedger::empty() const {
    std::lock_guard lock(mutex_);
    return entries_.empty();
}

double EnergyLedger::total() const {
    return sorted_sum(entries(), [](const LedgerEntry&) { return true; });
}

double EnergyLedger::total(Phase phase) const {
    return sorted_sum(entries(), [phase](const LedgerEntry& e) { return e.phase == phase; });
}

double EnergyLedger::total(const std::string& model, Phase phase) const {
    return sorted_sum(entries(), [&](const LedgerEntry& e) { return e.phase == phase && e.model == model; });
}

void EnergyLedger::write_csv(std::ostream& out) const {
    out << "phase,model,scope,round,epoch,joules\n";
    for (const auto& e : entries()) {
        out << to_string(e.phase) << ',' << e.model << ',' << e.scope << ',' << e.round << ',' << e.epoch << ','
            << format_double(e.joules) << '\n';
    }
}

EnergyLedger EnergyLedger::read_csv(std::istream& in, std::shared_ptr<const Meter> meter) {
    EnergyLedger ledger(std::move(meter));
    std::string line;
    if (!std::getline(in, line) || trim(line) != "phase,model,scope,round,epoch,joules") {
        throw DataError("ledger file lacks the expected header");
    }
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        const auto f = split_delimited(trim(line), ',');
        const auto joules = f.size() == 6 ? parse_finite_double(f[5]) : std::nullopt;
        if (!joules) throw DataError("malformed ledger line " + std::to_string(line_no));
        try {
            ledger.append({parse_phase(f[0]), f[1], f[2], std::stoul(f[3]), std::stoul(f[4]), *joules});
        } catch (const std::logic_error&) {
            throw DataError("malformed ledger line " + std::to_string(line_no));
        }
    }
    return ledger;
}

double joules_to_kwh(double joules) { return joules / kJoulesPerKwh; }

double log_ratio(double fed_joules, double centralized_joules) {
    if (!(fed_joules > 0.0) || !(centralized_joules > 0.0)) throw DataError("log ratio needs positive totals");
    return std::log10(fed_joules / centralized_joules);
}

double co2_overhead_g(double delta_kwh, const EmissionFactor& ef) {
    if (!(delta_kwh >= 0.0)) throw DataError("energy overhead must be non-negative");
    if (!(ef.kg_per_kwh > 0.0)) throw ConfigError("emission factor must be positive");
    return delta_kwh * ef.kg_per_kwh * 1000.0;
}

double savings_percent(double heavy, double light) {
    if (!(heavy > 0.0)) throw DataError("savings need a positive reference");
    return (heavy - light) / heavy * 100.0;
}

nlohmann::ordered_json phase_comparison(const EnergyLedger& centralized, const EnergyLedger& heavy,
                                        const EnergyLedger& light, const EmissionFactor& ef) {
    if (centralized.empty() || heavy.empty() || light.empty()) throw DataError("phase comparison needs three ledgers");
    std::set<std::string> models;
    for (const auto* l : {&centralized, &heavy, &light}) {
        for (const auto& e : l->entries()) models.insert(e.model);
    }

    auto per_client_round = [](const EnergyLedger& ledger, const std::string& model, Phase phase) {
        std::set<std::pair<std::string, std::size_t>> pairs;
        for (const auto& e : ledger.entries()) {
            if (e.model == model && e.phase == phase && e.scope != "server") pairs.emplace(e.scope, e.round);
        }
        return pairs.empty() ? 0.0 : ledger.total(model, phase) / static_cast<double>(pairs.size());
    };

    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (const auto& model : models) {
        const double cent = centralized.total(model, Phase::Centralized);
        const double h = heavy.total(model, Phase::FedHeavy);
        const double l = light.total(model, Phase::FedLight);
        auto row_for = [&](const std::string& configuration, double joules, double per_client) {
            nlohmann::ordered_json r;
            r["model"] = model;
            r["configuration"] = configuration;
            r["total_kj"] = joules / 1000.0;
            r["total_kwh"] = joules_to_kwh(joules);
            if (configuration != "centralized") r["per_client_per_round_kj"] = per_client / 1000.0;
            if (configuration != "centralized" && joules > 0.0 && cent > 0.0) {
                r["log10_ratio"] = log_ratio(joules, cent);
                r["co2e_g"] = co2_overhead_g(std::max(0.0, joules_to_kwh(joules - cent)), ef);
            } else {
                r["log10_ratio"] = nullptr;
                r["co2e_g"] = nullptr;
            }
            return r;
        };
        if (cent > 0.0) rows.push_back(row_for("centralized", cent, 0.0));
        if (h > 0.0) rows.push_back(row_for("heavy", h, per_client_round(heavy, model, Phase::FedHeavy)));
        if (l > 0.0) rows.push_back(row_for("light", l, per_client_round(light, model, Phase::FedLight)));
        if (h > 0.0 && l > 0.0) {
            nlohmann::ordered_json s;
            s["model"] = model;
            s["configuration"] = "light-vs-heavy";
            s["savings_percent"] = savings_percent(h, l);
            if (cent > 0.0) {
                const double dh = std::max(0.0, joules_to_kwh(h - cent));
                const double dl = std::max(0.0, joules_to_kwh(l - cent));
                s["overhead_savings_percent"] = dh > 0.0 ? nlohmann::ordered_json(savings_percent(dh, dl))
                                                         : nlohmann::ordered_json(nullptr);
            }
            rows.push_back(std::move(s));
        }
    }
    nlohmann::ordered_json out;
    out["emission_factor_kg_per_kwh"] = ef.kg_per_kwh;
    out["emission_factor_vintage"] = ef.vintage;
    out["rows"] = std::move(rows);
    return out;
}

}  // namespace edf::energy
