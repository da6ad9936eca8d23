#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "phishtriage/common.hpp"
#include "phishtriage/dedup.hpp"
#include "phishtriage/textproc.hpp"

namespace testsupport {

using phishtriage::Rng;

/// Small random-value source for property tests.
class Gen {
public:
    explicit Gen(std::uint64_t seed) : rng_(phishtriage::make_rng(seed, 0)) {}
    Rng& rng() { return rng_; }
    std::size_t index(std::size_t n) { return phishtriage::uniform_index(rng_, n); }
    std::int64_t integer(std::int64_t lo, std::int64_t hi) {
        return lo + static_cast<std::int64_t>(index(static_cast<std::size_t>(hi - lo + 1)));
    }
    double real(double lo, double hi) { return lo + (hi - lo) * phishtriage::uniform01(rng_); }
    bool coin(double p = 0.5) { return phishtriage::uniform01(rng_) < p; }
    std::string string(std::string_view alphabet, std::size_t max_len);
    /// UTF-8 string over a mixed ASCII / accented / CJK alphabet.
    std::string unicode_string(std::size_t max_len);
    std::vector<std::string> words(std::size_t n, std::size_t vocab);

private:
    Rng rng_;
};

/// Runs `body` on `cases` generators derived from `seed`; the failing case index
/// is reported through the returned value (SIZE_MAX when all pass).
std::size_t for_all(std::size_t cases, std::uint64_t seed, const std::function<bool(Gen&)>& body);

/// Fresh empty directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag);
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

void write_text(const std::filesystem::path& p, const std::string& text);
std::string read_text(const std::filesystem::path& p);

// ---- Independent oracles ----

/// Edit distance straight from the recursive definition (memoized on suffix lengths).
std::size_t levenshtein_recursive(const std::u32string& a, const std::u32string& b);

/// Cosine from dense count vectors built directly from tokens.
double dense_cosine(const std::vector<std::string>& a, const std::vector<std::string>& b);

/// Connected components by repeated min-label propagation over a dense score
/// matrix; returns a canonical label per node (smallest member index).
std::vector<std::size_t> brute_components(const std::vector<std::vector<double>>& scores, double threshold);

/// Sensitivity/specificity over every unordered pair of distinct labeled
/// emails at thresholds k/100, and the threshold minimizing |sens - spec|
/// (ties to the higher threshold).
struct GridOptimum {
    std::vector<double> sensitivity, specificity;
    double threshold = 0.0;
};
GridOptimum exhaustive_grid(const std::vector<std::vector<double>>& scores, const std::vector<std::string>& groups);

/// Poisson MLE by damped Newton iterations with Gaussian elimination.
struct NewtonFit {
    std::vector<double> coef;
    double loglik = 0.0;
    bool converged = false;
};
NewtonFit newton_poisson(const std::vector<double>& y, const std::vector<std::vector<double>>& x_rows);

/// Chi-square upper tail by composite Simpson integration of the density
/// after the substitution t = u^2 (smooth at the origin).
double chisq_tail_simpson(double statistic, double df, std::size_t intervals = 200000);

/// Runs the CLI and returns its exit status.
int run_triage(const std::string& args, const std::string& log_path = "/dev/null");

}  // namespace testsupport
