#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "phishtriage/common.hpp"

namespace phishtriage::econ {

inline constexpr std::string_view kIntercept = "(Intercept)";
inline constexpr double kDefaultMinClicks = 10.0;

/// The six trigger names followed by SpoofDist.
const std::vector<std::string>& regressor_names();
/// Order in which the stepwise models add regressors.
const std::vector<std::string>& stepwise_order();
/// Regressors of M1..M7, PM1 or PM2.
std::vector<std::string> model_regressors(std::string_view model_id);

/// One email's modelling inputs (design.csv).
struct DesignRow {
    std::string email_id;
    double clicks_avg = 0.0;
    std::array<double, 6> triggers{};
    double spoof_dist = 0.0;
    std::optional<double> n_vulns;  // distinct vulnerabilities present

    double regressor(std::string_view name) const;
    double vuln_count() const;
};

std::vector<DesignRow> read_design_csv(const std::filesystem::path& path);
void write_design_csv(const std::filesystem::path& path, std::span<const DesignRow> rows);

struct Design {
    std::vector<std::string> email_ids;
    std::vector<double> y;
    std::vector<std::string> columns;  // intercept first
    std::vector<double> x;             // row-major n x p

    std::size_t n() const noexcept { return y.size(); }
    std::size_t p() const noexcept { return columns.size(); }
    double at(std::size_t i, std::size_t j) const { return x[i * columns.size() + j]; }
    Design subset(std::span<const std::size_t> rows) const;
};

/// y = round_half_up(clicks_avg); keeps rows with y >= min_clicks.
Design make_design(std::span<const DesignRow> rows, const std::vector<std::string>& regressors,
                   double min_clicks = kDefaultMinClicks);
/// Build directly from data (used by tests and simulations).
Design make_design(std::vector<double> y, const std::vector<std::vector<double>>& regressors,
                   std::vector<std::string> names);

struct RegressorStats {
    std::vector<std::string> names;  // without intercept
    std::vector<double> mean;
    std::vector<double> sd;
};
RegressorStats regressor_stats(const Design& d);

struct FitOptions {
    std::size_t max_iter = 100;
    double grad_tol = 1e-8;
};

struct PoissonFit {
    std::vector<std::string> columns;
    std::vector<double> coef;
    std::vector<double> se;
    std::vector<double> z;
    std::vector<double> p_value;
    double loglik = 0.0;
    double null_loglik = 0.0;
    double deviance = 0.0;
    double null_deviance = 0.0;
    double adj_mcfadden_r2 = 0.0;
    std::size_t n = 0;
    bool converged = false;
    std::size_t iterations = 0;
    double grad_norm = 0.0;
    double y_sum = 0.0;

    std::size_t k() const noexcept { return coef.size(); }
    double coefficient(std::string_view name) const;
};

/// Poisson log-likelihood of `y` at means `mu` (full, with the log y! term).
double poisson_loglik(std::span<const double> y, std::span<const double> mu);
double poisson_deviance(std::span<const double> y, std::span<const double> mu);

/// Throws DataError naming collinear columns when X is rank deficient.
void check_rank(const Design& d);

/// Maximum likelihood by iteratively reweighted least squares (log link).
PoissonFit fit_poisson(const Design& d, const FitOptions& opts = {});

/// Cumulative fits adding one regressor at a time in `order`.
std::vector<PoissonFit> stepwise(std::span<const DesignRow> rows, const std::vector<std::string>& order,
                                 double min_clicks = kDefaultMinClicks);

/// Upper tail of the chi-square distribution.
double chisq_upper_tail(double statistic, double df);

struct AnovaResult {
    double delta_deviance = 0.0;
    std::size_t delta_df = 0;
    double p_value = 1.0;
};
AnovaResult anova_chisq(const PoissonFit& nested, const PoissonFit& fuller);

struct BootstrapFit {
    std::vector<std::string> columns;
    std::vector<std::vector<double>> draws;               // [B_kept][K]
    std::vector<std::array<double, 3>> quantiles;         // 2.5, 50, 97.5 per column
    std::size_t B = 0;                                    // requested replicates
    std::size_t dropped = 0;
    std::uint64_t seed = 0;
    std::optional<std::string> warning;

    /// Wrap given draws (e.g. pinned coefficients). Any B >= 1.
    static BootstrapFit from_draws(std::vector<std::string> columns,
                                   std::vector<std::vector<double>> draws);
    void compute_quantiles();
};

inline constexpr std::size_t kMinBootstrap = 100;
BootstrapFit bootstrap_fit(const Design& d, std::size_t B, std::uint64_t seed,
                           const FitOptions& opts = {});

struct PredictInput {
    std::string email_id;
    std::vector<double> x;  // aligned with the fit's non-intercept columns
};

struct TriageScore {
    std::string email_id;
    double predicted_clicks_mean = 0.0;
    double predicted_clicks_q025 = 0.0;
    double predicted_clicks_q50 = 0.0;
    double predicted_clicks_q975 = 0.0;
    std::string model_id;
    bool in_domain = true;
};

/// Each email samples `draws` coefficient rows uniformly with replacement from
/// its own stream (seed, email id).
std::vector<TriageScore> predict_clicks(const BootstrapFit& bf, std::span<const PredictInput> inputs,
                                        std::string_view model_id, std::size_t draws,
                                        std::uint64_t seed, const RegressorStats& training_stats);

/// Inputs for `regressors` from design rows (no click filter).
std::vector<PredictInput> prediction_inputs(std::span<const DesignRow> rows,
                                            const std::vector<std::string>& regressors);

/// Descending q50, then mean, then email id.
std::vector<TriageScore> triage_rank(std::vector<TriageScore> scores);

struct ScanResult {
    std::string regressor;
    double beta = 0.0;
    double se = 0.0;
    double p_value = 1.0;
    std::size_t n = 0;
    std::optional<double> pearson;
    std::optional<double> spearman;
};

struct ScanPoint {
    std::string email_id;
    std::string trigger;
    double count = 0.0;
    double clicks = 0.0;
};

struct ScanReport {
    std::vector<ScanResult> results;  // vuln_count, six triggers, SpoofDist
    std::vector<ScanPoint> scatter;
};

/// Single-regressor fits after the click filter. A constant regressor yields
/// slope 0 and p = 1 without fitting.
ScanReport simple_poisson_scan(std::span<const DesignRow> rows, double min_clicks = kDefaultMinClicks);

inline constexpr int kFitFormatVersion = 1;

struct FitArtifact {
    std::string model_id;
    PoissonFit fit;
    RegressorStats training_stats;
    double min_clicks = kDefaultMinClicks;
    std::optional<BootstrapFit> bootstrap;
};

/// With `sidecar`, draws go to that file as little-endian float64, row-major.
nlohmann::json to_json(const FitArtifact& a, const std::optional<std::filesystem::path>& sidecar = {});
FitArtifact artifact_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
void save_artifact(const std::filesystem::path& path, const FitArtifact& a, bool binary_draws = false);
FitArtifact load_artifact(const std::filesystem::path& path);

void write_draws_binary(const std::filesystem::path& path, const std::vector<std::vector<double>>& draws);
std::vector<std::vector<double>> read_draws_binary(const std::filesystem::path& path, std::size_t rows,
                                                   std::size_t cols);

void write_scores_csv(const std::filesystem::path& path, std::span<const TriageScore> scores);
std::vector<TriageScore> read_scores_csv(const std::filesystem::path& path);

nlohmann::json to_json(const PoissonFit& f);

}  // namespace phishtriage::econ
