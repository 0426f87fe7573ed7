#include "edf/util.hpp"

#include "doctest.h"

#include <cmath>
#include <cstdlib>
#include <limits>
#include <random>

using namespace edf;

TEST_CASE("iso8601 parsing accepts the documented forms") {
    const auto a = time::parse_iso8601("2018-03-01");
    const auto b = time::parse_iso8601("2018-03-01T06:30");
    const auto c = time::parse_iso8601("2018-03-01 06:30:15.999Z");
    const auto d = time::parse_iso8601("2018-03-01T06:30:15+00:00");
    REQUIRE(a);
    REQUIRE(b);
    REQUIRE(c);
    REQUIRE(d);
    CHECK((*b - *a).count() == 6 * 3600 + 30 * 60);
    CHECK((*c - *b).count() == 15);
    CHECK(*c == *d);
    CHECK(time::format_iso8601(*c) == "2018-03-01T06:30:15Z");
}

TEST_CASE("iso8601 parsing rejects malformed input") {
    CHECK_FALSE(time::parse_iso8601(""));
    CHECK_FALSE(time::parse_iso8601("2018-13-01"));
    CHECK_FALSE(time::parse_iso8601("2018-02-30"));
    CHECK_FALSE(time::parse_iso8601("yesterday"));
    CHECK_FALSE(time::parse_iso8601("2018-03-01T25:00"));
}

TEST_CASE("calendar helpers") {
    const auto ts = *time::parse_iso8601("2018-03-01T18:45");  // Thursday
    CHECK(time::weekday_monday0(ts) == 3);
    CHECK(time::hour_of_day(ts) == doctest::Approx(18.75));
    CHECK(time::format_iso8601(time::floor_to_midnight(ts)) == "2018-03-01T00:00:00Z");
    CHECK(time::iso_week(*time::parse_iso8601("2018-01-01")) == 1);
    CHECK(time::iso_week(*time::parse_iso8601("2020-12-31")) == 53);
    CHECK(time::iso_week(*time::parse_iso8601("2021-01-03")) == 53);
}

TEST_CASE("delimited splitting honours quotes") {
    const auto f = split_delimited(R"(a,"b,c","d ""x""",)", ',');
    REQUIRE(f.size() == 4);
    CHECK(f[0] == "a");
    CHECK(f[1] == "b,c");
    CHECK(f[2] == "d \"x\"");
    CHECK(f[3].empty());
}

TEST_CASE("strict numeric parsing") {
    CHECK(parse_finite_double(" 1.5 ") == 1.5);
    CHECK_FALSE(parse_finite_double("1.5kWh"));
    CHECK_FALSE(parse_finite_double("NaN"));
    CHECK_FALSE(parse_finite_double("inf"));
    CHECK_FALSE(parse_finite_double(""));
}

TEST_CASE("sha256 of known strings") {
    CHECK(sha256_hex(std::string_view("")) == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
    CHECK(sha256_hex(std::string_view("abc")) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_CASE("format_double round-trips") {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double v = u(rng) * std::pow(10.0, static_cast<int>(rng() % 20) - 10);
        CHECK(std::stod(format_double(v)) == v);
    }
    CHECK(std::stod(format_double(0.1)) == 0.1);
    CHECK(std::strtod(format_double(std::numeric_limits<double>::denorm_min()).c_str(), nullptr) ==
          std::numeric_limits<double>::denorm_min());
}
