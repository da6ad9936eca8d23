#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace phishtriage {

// Error categories map onto the CLI exit codes (1 usage, 2 data, 3 stage).
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
    virtual int exit_code() const noexcept { return 3; }
};

class UsageError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 1; }
};

class DataError : public Error {
public:
    using Error::Error;
    int exit_code() const noexcept override { return 2; }
};

class StageError : public Error {
public:
    StageError(std::string stage, const std::string& what)
        : Error(stage + ": " + what), stage_(std::move(stage)) {}
    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

/// Seconds since the Unix epoch, UTC.
using Timestamp = std::int64_t;

std::string format_iso8601(Timestamp t);
std::optional<Timestamp> parse_iso8601(std::string_view s);
Timestamp days_from_civil_utc(int year, int month, int day, int hour = 0, int minute = 0,
                              int second = 0);
/// True for a real calendar date and a time of day within 00:00:00..23:59:60.
bool valid_civil(int year, int month, int day, int hour = 0, int minute = 0, int second = 0);

inline constexpr double kSecondsPerDay = 86400.0;

// Deterministic stream splitting: every stochastic task derives its own
// generator from (seed, stream index) so results do not depend on how work is
// scheduled across workers.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);
std::uint64_t derive_seed(std::uint64_t seed, std::string_view key);

using Rng = std::mt19937_64;
inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    return Rng(derive_seed(seed, stream));
}

/// Uniform integer in [0, n). Portable across standard library vendors.
std::size_t uniform_index(Rng& rng, std::size_t n);
/// Uniform real in [0, 1). Portable across standard library vendors.
double uniform01(Rng& rng);

namespace stats {

double mean(std::span<const double> xs);
/// Sample standard deviation (n - 1 denominator); 0 for fewer than two values.
double sd(std::span<const double> xs);
/// Inclusive empirical quantile (linear interpolation between order
/// statistics, R type 7). `sorted` must be ascending and non-empty.
double quantile_sorted(std::span<const double> sorted, double p);
double quantile(std::vector<double> xs, double p);
/// Pearson correlation; nullopt when either side has zero variance.
std::optional<double> pearson(std::span<const double> x, std::span<const double> y);
/// Average ranks (1-based) with ties sharing the mean rank.
std::vector<double> ranks(std::span<const double> xs);
std::optional<double> spearman(std::span<const double> x, std::span<const double> y);
/// Two-sided p-value of a Pearson correlation under the t approximation.
double correlation_p_value(double r, std::size_t n);

}  // namespace stats

/// Round half away from zero for non-negative values (half-up).
std::int64_t round_half_up(double x);

std::string to_lower_ascii(std::string_view s);
std::string trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
bool iequals(std::string_view a, std::string_view b);

}  // namespace phishtriage
