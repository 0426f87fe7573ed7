#include "edf/ingest.hpp"
#include "edf/synthetic.hpp"

#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

using namespace edf;
using namespace edf::ingest;

namespace {

Timestamp at(const char* text) { return *time::parse_iso8601(text); }

std::vector<EnergyTransaction> repeat(const std::string& id, std::size_t n) {
    std::vector<EnergyTransaction> out;
    const Timestamp t0 = at("2018-03-01T06:00");
    for (std::size_t i = 0; i < n; ++i) {
        const Timestamp s = t0 + std::chrono::hours(24 * static_cast<long long>(i));
        out.push_back(make_transaction(id, s, s + std::chrono::hours(2), 10.0));
    }
    return out;
}

double series_energy(const std::vector<DemandSeries>& series) {
    double e = 0.0;
    for (const auto& s : series)
        for (double v : s.values) e += v * s.bin_hours();
    return e;
}

}  // namespace

TEST_CASE("parse: average power and rejects") {
    std::istringstream in(
        "evse_id,t_start,t_end,energy_kwh,evse_model,lat,lon,nominal_power_kw\n"
        "E1,2018-03-01T06:00,2018-03-01T08:00,10.0,AC-11,56.4,-3.1,11\n"
        "E1,2018-03-01T09:00,2018-03-01T10:00,NaN,AC-11,56.4,-3.1,11\n"
        "E2,2018-03-01T09:00,bad,1.0,AC-11,56.4,-3.1,11\n");
    const auto r = parse_transactions(in);
    REQUIRE(r.transactions.size() == 1);
    CHECK(r.transactions[0].avg_power_kw == 5.0);
    CHECK(r.transactions[0].nominal_power_kw == 11.0);
    REQUIRE(r.rejects.size() == 2);
    CHECK(r.rejects[0].line == 3);
    CHECK(r.rejects[0].reason == "non-numeric energy");
    CHECK(r.rejects[1].reason == "unparseable t_end");
}

TEST_CASE("parse: empty input and missing columns") {
    std::istringstream empty("");
    const auto r = parse_transactions(empty);
    CHECK(r.transactions.empty());
    CHECK(r.rejects.empty());

    std::istringstream header_only("evse_id,t_start,t_end,energy_kwh\n");
    CHECK(parse_transactions(header_only).transactions.empty());

    std::istringstream missing("evse_id,t_start,energy_kwh\nE1,2018-03-01,1\n");
    CHECK_THROWS_AS(parse_transactions(missing), ConfigError);
}

TEST_CASE("parse: custom schema") {
    ColumnSchema schema;
    schema.evse_id = "station";
    schema.energy_kwh = "kwh";
    schema.delimiter = ';';
    std::istringstream in("station;t_start;t_end;kwh\nS;2018-03-01T00:00;2018-03-01T04:00;8\n");
    const auto r = parse_transactions(in, schema);
    REQUIRE(r.transactions.size() == 1);
    CHECK(r.transactions[0].evse_id == "S");
    CHECK(r.transactions[0].avg_power_kw == 2.0);
}

TEST_CASE("clean: record rules and the per-EVSE count") {
    auto txs = repeat("A", 100);
    const Timestamp s = at("2018-09-01T00:00");
    txs.push_back(make_transaction("A", s, s + std::chrono::hours(1), 250.0));
    txs.push_back(make_transaction("A", s, s + std::chrono::hours(49), 20.0));
    txs.push_back(make_transaction("A", s, s + std::chrono::hours(1), 0.0));
    txs.push_back(make_transaction("A", s, s + std::chrono::hours(1), -3.0));
    auto b = repeat("B", 99);
    txs.insert(txs.end(), b.begin(), b.end());

    const auto r = clean_transactions(txs);
    CHECK(r.kept.size() == 100);
    CHECK(std::all_of(r.kept.begin(), r.kept.end(), [](const auto& t) { return t.evse_id == "A"; }));
    auto count = [&](const std::string& reason) {
        return std::count_if(r.dropped.begin(), r.dropped.end(), [&](const auto& d) { return d.reason == reason; });
    };
    CHECK(count("energy > 200 kWh") == 1);
    CHECK(count("duration > 48 h") == 1);
    CHECK(count("energy <= 0 kWh") == 2);
    CHECK(count("EVSE below 100 transactions") == 99);
}

TEST_CASE("clean: idempotent") {
    auto txs = generate_synthetic(4, 120, 11);
    auto extra = repeat("tiny", 5);
    txs.insert(txs.end(), extra.begin(), extra.end());
    const auto once = clean_transactions(txs);
    const auto twice = clean_transactions(once.kept);
    REQUIRE(twice.kept.size() == once.kept.size());
    CHECK(twice.dropped.empty());
    for (std::size_t i = 0; i < once.kept.size(); ++i) {
        CHECK(twice.kept[i].evse_id == once.kept[i].evse_id);
        CHECK(twice.kept[i].t_start == once.kept[i].t_start);
    }
}

TEST_CASE("resample: hand-evaluated overlap examples") {
    const Timestamp origin = at("2018-03-01");
    SUBCASE("one session straddling two bins") {
        const auto s = resample_demand({make_transaction("E", at("2018-03-01T06:00"), at("2018-03-01T18:00"), 48.0)},
                                       origin);
        REQUIRE(s.size() == 1);
        REQUIRE(s[0].values.size() == 2);
        CHECK(s[0].values[0] == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(s[0].values[1] == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(s[0].sessions_per_bin[0] == 1);
        CHECK(s[0].avg_charge_hours_per_bin[1] == doctest::Approx(6.0));
    }
    SUBCASE("full-bin session leaves neighbours empty") {
        const auto s = resample_demand({make_transaction("E", at("2018-03-01T00:00"), at("2018-03-01T12:00"), 36.0),
                                        make_transaction("E", at("2018-03-02T00:00"), at("2018-03-02T01:00"), 1.0)},
                                       origin);
        CHECK(s[0].values[0] == 3.0);
        CHECK(s[0].values[1] == 0.0);
        CHECK(s[0].sessions_per_bin[1] == 0);
    }
    SUBCASE("two sessions inside one bin") {
        const auto s = resample_demand({make_transaction("E", at("2018-03-01T00:00"), at("2018-03-01T06:00"), 12.0),
                                        make_transaction("E", at("2018-03-01T07:00"), at("2018-03-01T10:00"), 12.0)},
                                       origin);
        CHECK(s[0].values[0] == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(s[0].values[0] * 12.0 == doctest::Approx(24.0).epsilon(1e-12));
        CHECK(s[0].sessions_per_bin[0] == 2);
        CHECK(s[0].avg_charge_hours_per_bin[0] == doctest::Approx(4.5));
    }
}

TEST_CASE("resample: common axis and origin") {
    const auto s = resample_demand({make_transaction("B", at("2018-03-03T06:00"), at("2018-03-03T08:00"), 4.0),
                                    make_transaction("A", at("2018-03-01T13:00"), at("2018-03-01T14:00"), 1.0)},
                                   common_origin({make_transaction("A", at("2018-03-01T13:00"),
                                                                   at("2018-03-01T14:00"), 1.0)}));
    REQUIRE(s.size() == 2);
    CHECK(s[0].evse_id == "A");
    CHECK(s[1].evse_id == "B");
    CHECK(s[0].size() == s[1].size());
    CHECK(s[0].origin == s[1].origin);
    CHECK(time::format_iso8601(s[0].origin) == "2018-03-01T00:00:00Z");
    CHECK(s[0].size() == 5);
}

TEST_CASE("resample: energy conservation and permutation invariance on random sets") {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const Timestamp base = at("2018-01-01");
    for (int trial = 0; trial < 100; ++trial) {
        std::vector<EnergyTransaction> txs;
        const int n = 1 + static_cast<int>(rng() % 40);
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            const auto start = base + std::chrono::seconds(static_cast<long long>(u(rng) * 30 * 86400));
            const auto len = std::chrono::seconds(1 + static_cast<long long>(u(rng) * 47 * 3600));
            const double e = 0.1 + 60.0 * u(rng);
            total += e;
            txs.push_back(make_transaction("E" + std::to_string(rng() % 4), start, start + len, e));
        }
        const auto origin = common_origin(txs);
        const auto a = resample_demand(txs, origin);
        CHECK(std::abs(series_energy(a) - total) <= 1e-9 * total);
        std::shuffle(txs.begin(), txs.end(), rng);
        const auto b = resample_demand(txs, origin);
        REQUIRE(a.size() == b.size());
        for (std::size_t i = 0; i < a.size(); ++i) {
            REQUIRE(a[i].values.size() == b[i].values.size());
            for (std::size_t k = 0; k < a[i].values.size(); ++k) {
                CHECK(a[i].values[k] == doctest::Approx(b[i].values[k]).epsilon(1e-12));
            }
            CHECK(a[i].sessions_per_bin == b[i].sessions_per_bin);
        }
    }
}

TEST_CASE("resample: origin after every transaction gives empty series") {
    const auto s = resample_demand({make_transaction("E", at("2018-03-01T00:00"), at("2018-03-01T02:00"), 2.0)},
                                   at("2018-04-01"));
    for (const auto& series : s) CHECK(series.values.empty());
}

TEST_CASE("split: floor rule") {
    auto s = split_temporal(100);
    CHECK(s.train_end == 70);
    CHECK(s.valid_end == 90);
    CHECK(s.length == 100);
    s = split_temporal(101);
    CHECK(s.train_end == 70);
    CHECK(s.valid_end - s.train_end == 20);
    CHECK(s.length - s.valid_end == 11);
    CHECK_THROWS_AS(split_temporal(9), DataError);
}

TEST_CASE("synthetic: determinism and cleanliness") {
    const auto a = generate_synthetic(8, 120, 7);
    const auto b = generate_synthetic(8, 120, 7);
    std::ostringstream sa, sb;
    write_transactions(sa, a);
    write_transactions(sb, b);
    CHECK(sa.str() == sb.str());
    CHECK(sa.str() != [] {
        std::ostringstream s;
        write_transactions(s, generate_synthetic(8, 120, 8));
        return s.str();
    }());

    const auto cleaned = clean_transactions(a);
    CHECK(cleaned.dropped.empty());
    CHECK(collect_evse_info(cleaned.kept).size() == 8);
}

TEST_CASE("synthetic: written file reproduces the records") {
    const auto a = generate_synthetic(2, 30, 3);
    std::stringstream s;
    write_transactions(s, a);
    const auto parsed = parse_transactions(s);
    REQUIRE(parsed.transactions.size() == a.size());
    CHECK(parsed.rejects.empty());
    for (std::size_t i = 0; i < a.size(); ++i) {
        CHECK(parsed.transactions[i].energy_kwh == a[i].energy_kwh);
        CHECK(parsed.transactions[i].t_start == a[i].t_start);
        CHECK(parsed.transactions[i].t_end == a[i].t_end);
        CHECK(parsed.transactions[i].nominal_power_kw == a[i].nominal_power_kw);
    }
}

TEST_CASE("synthetic: degenerate profiles") {
    SyntheticProfile idle;
    idle.idle_probability = 1.0;
    idle.weekend_idle_probability = 1.0;
    CHECK(generate_synthetic(3, 50, 1, idle).empty());

    SyntheticProfile daily;
    daily.idle_probability = 0.0;
    daily.weekend_idle_probability = 0.0;
    daily.extra_sessions_mean = 0.0;
    daily.arrival_hour_std = 0.0;
    daily.energy_median_kwh = 10.0;
    daily.energy_power_exponent = 0.0;
    daily.energy_log_sigma = 0.0;
    daily.duration_median_hours = 2.0;
    daily.duration_log_sigma = 0.0;
    const auto txs = generate_synthetic(4, 30, 1, daily);
    CHECK(txs.size() == 4 * 30);
    for (const auto& tx : txs) {
        CHECK(tx.energy_kwh == 10.0);
        CHECK(tx.duration_hours() >= 2.0);
    }

    SyntheticProfile bad;
    bad.idle_probability = 1.5;
    CHECK_THROWS_AS(generate_synthetic(1, 1, 1, bad), ConfigError);
}

TEST_CASE("cleaning report lists reasons") {
    auto txs = repeat("A", 3);
    const auto cleaned = clean_transactions(txs);
    const std::string report = cleaning_report_json({txs, {}}, cleaned);
    CHECK(report.find("EVSE below 100 transactions") != std::string::npos);
}
