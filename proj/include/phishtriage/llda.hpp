#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "phishtriage/common.hpp"
#include "phishtriage/textproc.hpp"

namespace phishtriage::llda {

inline constexpr int kFormatVersion = 1;

const std::vector<std::string>& default_labels();

struct LldaConfig {
    double alpha = 1.0;
    double beta = 0.001;
    std::size_t k_labels = 6;
    std::size_t n_iterations = 1000;
    std::uint64_t seed = 1;
    std::size_t burn_in = 900;
    std::vector<std::string> labels = default_labels();
    /// Inference only: average label_probs over this many final sweeps (1 = last sweep).
    std::size_t average_sweeps = 1;
    /// Invariant checks run on every `check_every`-th sweep (0 disables).
    std::size_t check_every = 100;

    void validate() const;
    std::size_t label_index(std::string_view name) const;
    friend bool operator==(const LldaConfig&, const LldaConfig&) = default;
};

using LabelMap = std::map<std::string, std::set<std::string>>;

/// labels.jsonl: {"email_id": ..., "labels": [...]}.
LabelMap read_labels_jsonl(const std::filesystem::path& path);
void write_labels_jsonl(const std::filesystem::path& path, const LabelMap& labels);

struct GibbsDiagnostics {
    std::size_t checks = 0;
    std::size_t conservation_violations = 0;
    std::size_t restriction_violations = 0;
    std::size_t violations() const { return conservation_violations + restriction_violations; }
};

struct LldaModel {
    std::vector<std::string> vocab;               // sorted
    std::vector<std::int64_t> label_word_counts;  // [k * V + w]
    std::vector<std::int64_t> label_totals;
    LldaConfig config;
    GibbsDiagnostics diagnostics;                  // not serialized

    std::size_t vocab_size() const noexcept { return vocab.size(); }
    std::int64_t count(std::size_t k, std::size_t w) const {
        return label_word_counts[k * vocab.size() + w];
    }
    /// Smoothed (n_wk + beta) / (n_k + V beta).
    double phi(std::size_t k, std::size_t w) const;
    std::optional<std::size_t> word_id(std::string_view token) const;
    /// Highest-count words of label k, ties by token order.
    std::vector<std::string> top_words(std::size_t k, std::size_t n) const;
};

bool same_state(const LldaModel& a, const LldaModel& b);

struct TrainOptions {
    /// Labels with no training document get zero counts instead of an error.
    bool allow_absent_labels = false;
};

LldaModel train(std::span<const textproc::TokenDoc> docs, const LabelMap& labels,
                const LldaConfig& cfg, const TrainOptions& opts = {});

struct CognitiveProfile {
    std::string email_id;
    std::vector<std::int64_t> trigger_counts;
    std::vector<double> label_probs;
    std::vector<bool> vulns_present;
    std::size_t n_tokens = 0;  // in-vocabulary tokens
    bool no_signal = false;
};

/// Gibbs inference with model counts fixed. The chain is seeded from
/// (cfg.seed, email id).
CognitiveProfile infer(const LldaModel& model, const textproc::TokenDoc& doc,
                       const LldaConfig& cfg);
std::vector<CognitiveProfile> infer_all(const LldaModel& model,
                                        std::span<const textproc::TokenDoc> docs,
                                        const LldaConfig& cfg);

inline constexpr double kDefaultPresenceMargin = 0.05;
/// Deployment rule: present when prob >= 1/K + margin.
void mark_present(CognitiveProfile& p, double margin = kDefaultPresenceMargin);

/// ceil(n_test * n_pos / n_train) clamped to n_test, in exact integer arithmetic.
std::size_t topn(std::size_t n_train_docs, std::size_t n_test_docs, std::size_t n_train_pos);

/// scores[k][d]: score of test doc d for label k. Returns positives[k][d].
std::vector<std::vector<bool>> proportional_cutoff(
    const std::vector<std::vector<double>>& scores, std::size_t n_train_docs,
    std::size_t n_test_docs, std::span<const std::size_t> n_train_pos);

struct Confusion {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    Confusion& operator+=(const Confusion& o);
};

struct Metric {
    double mean = 0.0;
    double sd = 0.0;
    std::size_t n = 0;  // contributing folds
};

struct MetricSet {
    Metric sensitivity, specificity, precision, f1;
};

struct LabelEval {
    std::string label;
    MetricSet macro;  // mean/sd across folds
    MetricSet micro;  // pooled counts; sd across folds
    Confusion pooled;
    std::size_t folds_skipped = 0;
};

struct EvalReport {
    std::vector<LabelEval> per_label;
    MetricSet macro;
    MetricSet micro;
    std::size_t repeats = 0;
    std::size_t folds = 0;
    std::vector<std::string> skipped;  // "repeat/fold: label"
    GibbsDiagnostics diagnostics;
};

nlohmann::json to_json(const EvalReport& r);

/// Greedy multi-label stratification into `folds` groups of near-equal size.
std::vector<std::size_t> stratified_folds(const std::vector<std::set<std::size_t>>& doc_labels,
                                          std::size_t folds, Rng& rng);

EvalReport cross_validate(std::span<const textproc::TokenDoc> docs, const LabelMap& labels,
                          const LldaConfig& cfg, std::size_t repeats = 5, std::size_t folds = 5,
                          std::uint64_t seed = 1);

nlohmann::json to_json(const LldaConfig& c);
LldaConfig config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const LldaModel& m);
LldaModel model_from_json(const nlohmann::json& j);
void save_model(const std::filesystem::path& path, const LldaModel& m);
LldaModel load_model(const std::filesystem::path& path);

nlohmann::json to_json(const CognitiveProfile& p, const std::vector<std::string>& labels);
CognitiveProfile profile_from_json(const nlohmann::json& j, const std::vector<std::string>& labels);
void write_profiles_jsonl(const std::filesystem::path& path,
                          std::span<const CognitiveProfile> profiles,
                          const std::vector<std::string>& labels);
std::vector<CognitiveProfile> read_profiles_jsonl(const std::filesystem::path& path,
                                                  const std::vector<std::string>& labels);

}  // namespace phishtriage::llda
