#include "edf/synthetic.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <random>

namespace edf::ingest {

namespace {

struct ModelSpec {
    const char* label;
    double nominal_kw;
};

constexpr std::array<ModelSpec, 4> kModels{{{"AC-7.4", 7.4}, {"AC-11", 11.0}, {"AC-22", 22.0}, {"DC-50", 50.0}}};

// Preferred arrival hours alternate between morning and evening commuters so that
// 12-hour bins carry a visible daily pattern.
constexpr std::array<double, 4> kPreferredHours{8.0, 18.0, 9.5, 17.0};

}  // namespace

void validate_profile(const SyntheticProfile& p) {
    const auto probability = [](double v) { return v >= 0.0 && v <= 1.0; };
    const auto spread = [](double v) { return std::isfinite(v) && v >= 0.0; };
    if (!probability(p.idle_probability) || !probability(p.weekend_idle_probability)) {
        throw ConfigError("synthetic profile: idle probabilities must lie in [0, 1]");
    }
    if (!spread(p.extra_sessions_mean) || !spread(p.arrival_hour_std) || !spread(p.energy_log_sigma) ||
        !spread(p.duration_log_sigma) || !spread(p.level_sigma) || !spread(p.energy_power_exponent)) {
        throw ConfigError("synthetic profile: means and spreads must be finite and non-negative");
    }
    if (!(p.energy_median_kwh > 0.0) || !std::isfinite(p.energy_median_kwh) || !(p.duration_median_hours > 0.0) ||
        !std::isfinite(p.duration_median_hours)) {
        throw ConfigError("synthetic profile: medians must be positive");
    }
    if (!(p.level_persistence >= 0.0 && p.level_persistence < 1.0)) {
        throw ConfigError("synthetic profile: level_persistence must lie in [0, 1)");
    }
}

std::vector<EnergyTransaction> generate_synthetic(std::size_t n_evse, std::size_t days, std::uint64_t seed,
                                                  const SyntheticProfile& profile) {
    if (n_evse == 0 || days == 0) throw ConfigError("synthetic generator needs n_evse >= 1 and days >= 1");
    using namespace std::chrono;
    const year_month_day first_day{year{profile.start_year}, month{profile.start_month}, day{profile.start_day}};
    if (!first_day.ok()) throw ConfigError("invalid synthetic start date");
    validate_profile(profile);
    const sys_days start = sys_days{first_day};
    const std::size_t clusters = std::max<std::size_t>(1, profile.n_location_clusters);

    std::vector<EnergyTransaction> out;
    for (std::size_t i = 0; i < n_evse; ++i) {
        std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                          static_cast<std::uint32_t>(i)};
        std::mt19937_64 rng(seq);
        std::uniform_real_distribution<double> unit(0.0, 1.0);
        std::normal_distribution<double> gauss(0.0, 1.0);

        char id[32];
        std::snprintf(id, sizeof id, "EVSE-%03zu", i);
        const ModelSpec& model = kModels[i % kModels.size()];
        const std::size_t cluster = i % clusters;
        const GeoPoint location{56.40 + 0.08 * static_cast<double>(cluster) + 0.01 * (unit(rng) - 0.5),
                                -3.10 + 0.11 * static_cast<double>(cluster) + 0.01 * (unit(rng) - 0.5)};
        const double preferred_hour = kPreferredHours[i % kPreferredHours.size()];

        Timestamp last_end{};
        bool have_last = false;
        double level = 0.0;
        for (std::size_t d = 0; d < days; ++d) {
            if (profile.level_sigma > 0.0) level = profile.level_persistence * level + profile.level_sigma * gauss(rng);
            const sys_days today = start + std::chrono::days{static_cast<long long>(d)};
            const bool weekend = weekday{today}.iso_encoding() >= 6;
            const double idle = weekend ? profile.weekend_idle_probability : profile.idle_probability;
            if (unit(rng) < idle) continue;

            std::size_t sessions = 1;
            if (profile.extra_sessions_mean > 0.0) {
                std::poisson_distribution<int> extra(profile.extra_sessions_mean);
                sessions += static_cast<std::size_t>(extra(rng));
            }
            for (std::size_t s = 0; s < sessions; ++s) {
                double hour = preferred_hour + 5.0 * static_cast<double>(s);
                if (profile.arrival_hour_std > 0.0) hour += profile.arrival_hour_std * gauss(rng);
                hour = std::clamp(hour, 0.0, 23.75);

                double energy = profile.energy_median_kwh * std::exp(level) *
                                std::pow(model.nominal_kw / 11.0, profile.energy_power_exponent);
                if (profile.energy_log_sigma > 0.0) energy *= std::exp(profile.energy_log_sigma * gauss(rng));
                energy = std::clamp(energy, 0.5, 180.0);
                // Rounded to Wh so the written file reproduces the in-memory record exactly.
                energy = std::round(energy * 1000.0) / 1000.0;

                double hours = profile.duration_median_hours;
                if (profile.duration_log_sigma > 0.0) hours *= std::exp(profile.duration_log_sigma * gauss(rng));
                hours = std::clamp(hours, 0.25, 20.0);
                hours = std::max(hours, energy / model.nominal_kw);

                Timestamp t_start = time_point_cast<seconds>(sys_seconds{today} +
                                                             seconds{static_cast<long long>(std::llround(hour * 3600))});
                if (have_last && t_start < last_end) t_start = last_end + minutes{15};
                // Rounding up keeps the average power at or below the nominal rating.
                const Timestamp t_end = t_start + seconds{static_cast<long long>(std::ceil(hours * 3600.0))};
                out.push_back(make_transaction(id, t_start, t_end, energy, model.label, location, model.nominal_kw));
                last_end = t_end;
                have_last = true;
            }
        }
    }
    return out;
}

}  // namespace edf::ingest
