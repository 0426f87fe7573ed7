#pragma once

#include "edf/ingest.hpp"

#include <cstdint>
#include <vector>

namespace edf::ingest {

/// Knobs for the desk-scale transaction generator. Demand is intermittent through
/// Bernoulli idle days and lumpy through log-normal session energies. The defaults model
/// commuter chargers: busy on weekdays, mostly idle at weekends.
struct SyntheticProfile {
    double idle_probability = 0.05;          // per weekday
    double weekend_idle_probability = 0.9;
    double extra_sessions_mean = 0.5;        // Poisson extras on top of one session per active day
    double arrival_hour_std = 1.0;           // 0 → every session starts at the EVSE's preferred hour
    double energy_median_kwh = 14.0;         // for an 11 kW charger
    double energy_power_exponent = 1.0;      // median scales by (nominal kW / 11)^exponent
    double energy_log_sigma = 0.6;           // 0 → every session uses the scaled median
    double duration_median_hours = 3.0;
    double duration_log_sigma = 0.4;         // 0 → every session lasts duration_median_hours
    double level_persistence = 0.0;          // AR(1) coefficient of a daily log-level on session energy
    double level_sigma = 0.0;                // innovation std of that log-level; 0 disables it
    std::size_t n_location_clusters = 4;
    int start_year = 2018;
    unsigned start_month = 3;
    unsigned start_day = 1;
};

/// Probabilities in [0, 1]; means, spreads and medians finite with medians positive.
void validate_profile(const SyntheticProfile& profile);

/// Reproducible given `seed`; sessions of one EVSE never overlap and every record passes the
/// record-level cleaning rules. The 100-transaction rule holds for the default profile once
/// `days` ≥ 120.
std::vector<EnergyTransaction> generate_synthetic(std::size_t n_evse, std::size_t days, std::uint64_t seed,
                                                  const SyntheticProfile& profile = {});

}  // namespace edf::ingest
