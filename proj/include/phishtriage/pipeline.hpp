#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "phishtriage/config.hpp"
#include "phishtriage/dedup.hpp"
#include "phishtriage/econometrics.hpp"
#include "phishtriage/llda.hpp"
#include "phishtriage/report.hpp"
#include "phishtriage/urlintel.hpp"

namespace phishtriage::app {

/// Recovers the original headers of every message. Messages without a
/// complete header layer are skipped with a warning.
std::vector<corpus::Email> recover_all(std::span<const corpus::RawMessage> messages,
                                       const corpus::LabelLexicon& lex, std::vector<std::string>& warnings);

std::vector<textproc::TokenDoc> tokenize_all(std::span<const corpus::Email> emails,
                                             const textproc::TokenizerConfig& cfg);

struct DedupOutcome {
    double threshold = 0.0;
    std::optional<dedup::ThresholdTuning> tuning;
    std::vector<dedup::CampaignCluster> campaigns;
    std::size_t labeled_used = 0;
    std::size_t labeled_missing = 0;
};

/// Tunes the threshold when labels are given (labels for emails absent from
/// the corpus are dropped and counted), then sets every email's duplicate_id.
DedupOutcome run_dedup(std::vector<corpus::Email>& emails, std::span<const textproc::TokenDoc> docs,
                       std::optional<double> threshold, std::span<const dedup::LabeledDoc> labels,
                       std::size_t bootstrap_n, std::size_t sample_size, std::uint64_t seed);

/// Trains on the documents that carry labels.
llda::LldaModel train_on_labeled(std::span<const textproc::TokenDoc> docs, const llda::LabelMap& labels,
                                 const llda::LldaConfig& cfg, std::size_t* used = nullptr);

/// Profiles for every document with presence flags set.
std::vector<llda::CognitiveProfile> classify_all(const llda::LldaModel& model,
                                                 std::span<const textproc::TokenDoc> docs,
                                                 const llda::LldaConfig& cfg, double presence_margin);

/// Design rows for suspicious emails. With `matched_only`, emails without
/// matched clicks are left out; otherwise they get clicks_avg 0.
std::vector<econ::DesignRow> design_rows(std::span<const corpus::Email> emails,
                                         std::span<const llda::CognitiveProfile> profiles,
                                         const std::vector<std::string>& labels,
                                         std::span<const urlintel::EmailClicks> clicks, urlintel::Strategy strategy,
                                         const std::string& org_name, bool matched_only);

std::string sha256_file(const std::filesystem::path& path);

struct PipelineResult {
    std::vector<econ::TriageScore> queue;
    ReportBundle report;
    nlohmann::json manifest;
};

inline constexpr std::string_view kPipelineStages[] = {
    "ingest", "recover", "sanitize", "dedup", "classify", "urlintel",
    "design", "fit", "bootstrap", "predict", "rank", "report"};

/// Runs every stage in order and persists each artifact in `out_dir`. A
/// failing stage raises StageError naming it; artifacts written so far and a
/// manifest marking the failure stay on disk.
PipelineResult run_pipeline(const PipelineConfig& cfg, const std::filesystem::path& input,
                            const std::filesystem::path& out_dir);

}  // namespace phishtriage::app
