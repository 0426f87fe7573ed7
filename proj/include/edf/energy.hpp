#pragma once

#include "json.hpp"

#include <cstdint>
#include <memory>
#include <istream>
#include <mutex>
#include <ostream>
#include <string>
#include <vector>

namespace edf::energy {

enum class Phase { Centralized, FedHeavy, FedLight };

std::string to_string(Phase phase);
Phase parse_phase(const std::string& text);

/// Work done by one training step, as seen by a meter.
struct Measurement {
    std::uint64_t ops = 0;
    double seconds = 0.0;
};

class Meter {
public:
    virtual ~Meter() = default;
    virtual std::string kind() const = 0;
    virtual double joules(const Measurement& m) const = 0;
};

/// Deterministic: a fixed energy cost per arithmetic operation.
class OpCountMeter final : public Meter {
public:
    explicit OpCountMeter(double joules_per_op = 1e-9);
    std::string kind() const override { return "proxy"; }
    double joules(const Measurement& m) const override;
    double joules_per_op() const { return joules_per_op_; }

private:
    double joules_per_op_;
};

/// Elapsed time times an assumed device power draw.
class WallClockMeter final : public Meter {
public:
    explicit WallClockMeter(double watts);
    std::string kind() const override { return "wallclock"; }
    double joules(const Measurement& m) const override;
    double watts() const { return watts_; }

private:
    double watts_;
};

struct LedgerEntry {
    Phase phase = Phase::Centralized;
    std::string model;
    std::string scope;  // "server", "central" or a client label
    std::size_t round = 0;
    std::size_t epoch = 0;
    double joules = 0.0;
};

/// Append-only, safe to record from several threads. Totals are summed over entries in a
/// canonical sort order, so they do not depend on the order of recording.
class EnergyLedger {
public:
    explicit EnergyLedger(std::shared_ptr<const Meter> meter = std::make_shared<OpCountMeter>());
    EnergyLedger(const EnergyLedger& other);
    EnergyLedger& operator=(const EnergyLedger& other);

    /// Throws DataError on a negative measurement.
    LedgerEntry record(const std::string& model, Phase phase, const std::string& scope, std::size_t round,
                       std::size_t epoch, const Measurement& measurement);
    /// Throws DataError on negative or non-finite joules.
    void append(LedgerEntry entry);

    std::vector<LedgerEntry> entries() const;
    bool empty() const;
    double total() const;
    double total(Phase phase) const;
    double total(const std::string& model, Phase phase) const;
    const Meter& meter() const { return *meter_; }

    /// Columns: phase,model,scope,round,epoch,joules.
    void write_csv(std::ostream& out) const;
    /// Reads what write_csv produced; joules are taken as recorded.
    static EnergyLedger read_csv(std::istream& in, std::shared_ptr<const Meter> meter = std::make_shared<OpCountMeter>());

private:
    std::shared_ptr<const Meter> meter_;
    mutable std::mutex mutex_;
    std::vector<LedgerEntry> entries_;
};

inline constexpr double kJoulesPerKwh = 3.6e6;

double joules_to_kwh(double joules);

struct EmissionFactor {
    double kg_per_kwh = 0.289;
    std::string vintage = "EU-27 grid 2018";
};

/// log10(fed / centralized); both must be positive.
double log_ratio(double fed_joules, double centralized_joules);

/// Grams CO₂e for an energy overhead in kWh. Throws DataError on a negative delta.
double co2_overhead_g(double delta_kwh, const EmissionFactor& ef = {});

/// Percentage reduction of `light` relative to `heavy`.
double savings_percent(double heavy, double light);

/// Per model: totals per configuration, mean per client per round, log10 ratios against the
/// centralized run, CO₂e of the overhead and light-vs-heavy savings. Throws DataError when a
/// ledger is empty.
nlohmann::ordered_json phase_comparison(const EnergyLedger& centralized, const EnergyLedger& heavy,
                                        const EnergyLedger& light, const EmissionFactor& ef = {});

}  // namespace edf::energy
