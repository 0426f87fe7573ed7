#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace edf {

/// Invalid input configuration (bad schema, bad flags, bad normalization maxima).
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Input data that violates an operation's precondition.
class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Numerical failure during model fitting (NaN loss, empty training set).
class TrainingError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// UTC instant at second resolution.
using Timestamp = std::chrono::sys_seconds;
using Seconds = std::chrono::seconds;

constexpr double kSecondsPerHour = 3600.0;

namespace time {

/// Parses "YYYY-MM-DD", "YYYY-MM-DD[T ]HH:MM[:SS[.fff]][Z|+00:00]".
/// Fractional seconds are truncated. Returns nullopt on malformed input.
std::optional<Timestamp> parse_iso8601(std::string_view text);

/// "YYYY-MM-DDTHH:MM:SSZ"
std::string format_iso8601(Timestamp ts);

Timestamp floor_to_midnight(Timestamp ts);

/// Hour of day in [0, 24), including the fractional minutes.
double hour_of_day(Timestamp ts);

/// Monday = 0 ... Sunday = 6.
int weekday_monday0(Timestamp ts);

/// ISO-8601 week number in [1, 53].
int iso_week(Timestamp ts);

}  // namespace time

/// Splits one delimiter-separated line; double quotes group fields and "" escapes a quote.
std::vector<std::string> split_delimited(std::string_view line, char delimiter);

std::string trim(std::string_view s);

/// Strict numeric parse: whole field must be consumed and the value must be finite.
std::optional<double> parse_finite_double(std::string_view text);

/// Lowercase hex SHA-256 digest.
std::string sha256_hex(std::string_view bytes);
std::string sha256_hex(std::span<const double> values);

/// Shortest representation that round-trips to the identical double.
std::string format_double(double value);

}  // namespace edf
