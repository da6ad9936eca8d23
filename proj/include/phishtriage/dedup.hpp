#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "phishtriage/common.hpp"
#include "phishtriage/corpus.hpp"
#include "phishtriage/textproc.hpp"

namespace phishtriage::dedup {

/// Pairwise cosine scores. Only the upper triangle at or above the storage
/// floor is kept; everything else reads back as 0.
class SimilarityMatrix {
public:
    struct Entry {
        std::uint32_t col;
        double score;
    };

    SimilarityMatrix() = default;
    SimilarityMatrix(std::vector<std::string> ids, std::vector<bool> nonempty, double floor);

    const std::vector<std::string>& ids() const noexcept { return ids_; }
    std::size_t size() const noexcept { return ids_.size(); }
    double storage_floor() const noexcept { return floor_; }
    double score(std::size_t i, std::size_t j) const;
    /// Stored entries (col > row) of one row, ascending by column.
    const std::vector<Entry>& row(std::size_t i) const { return rows_.at(i); }
    std::size_t stored_entries() const;

    void set(std::size_t i, std::size_t j, double s);

private:
    std::vector<std::string> ids_;
    std::vector<bool> nonempty_;
    std::vector<std::vector<Entry>> rows_;
    double floor_ = 0.0;
};

inline constexpr double kDefaultStorageFloor = 0.05;

SimilarityMatrix similarity_matrix(std::span<const textproc::TfVector> docs,
                                   double storage_floor = kDefaultStorageFloor);

struct LabeledDoc {
    std::string email_id;
    std::string group_id;
};

/// labels.csv with columns email_id, similarity_group_id.
std::vector<LabeledDoc> read_labels_csv(const std::filesystem::path& path);

struct ThresholdTuning {
    std::vector<double> threshold_grid;
    std::vector<double> sensitivity_mean;
    std::vector<double> specificity_mean;
    double chosen_threshold = 0.0;
    std::size_t chosen_index = 0;
    std::size_t bootstrap_n = 0;
    std::size_t sample_size = 0;
    std::uint64_t seed = 0;

    double chosen_sensitivity() const { return sensitivity_mean.at(chosen_index); }
    double chosen_specificity() const { return specificity_mean.at(chosen_index); }
    friend bool operator==(const ThresholdTuning&, const ThresholdTuning&) = default;
};

nlohmann::json to_json(const ThresholdTuning& t);

/// Thresholds k/100 for k = 0..100.
std::vector<double> threshold_grid();
/// Largest grid index k with score >= k/100.
std::size_t grid_bin(double score);

/// Bootstrapped sensitivity/specificity curves over the threshold grid. Each
/// replicate draws `sample_size` labeled emails with replacement and scores
/// every unordered pair of draws that come from distinct emails.
ThresholdTuning tune_threshold(std::span<const LabeledDoc> labeled,
                               std::span<const textproc::TfVector> docs,
                               std::size_t bootstrap_n, std::size_t sample_size,
                               std::uint64_t seed);

/// Connected components of {score >= threshold}. Component ids are dense and
/// ordered by each component's earliest timestamp (undated members sort last,
/// then by row order). `timestamps` may be empty.
std::vector<std::int64_t> assign_duplicate_ids(
    const SimilarityMatrix& m, double threshold,
    std::span<const std::optional<Timestamp>> timestamps = {});

enum class DurationClass { SingleDay, Short, Long };
std::string_view to_string(DurationClass c);
DurationClass classify_duration(double days);

struct CampaignCluster {
    std::int64_t duplicate_id = 0;
    std::vector<std::string> member_ids;
    std::optional<Timestamp> first_seen;
    std::optional<Timestamp> last_seen;
    double duration_days = 0.0;
    DurationClass duration_class = DurationClass::SingleDay;
    std::size_t samples = 0;
};

/// One cluster per duplicate id, ascending. Emails without a date count toward
/// samples but not toward the duration.
std::vector<CampaignCluster> campaigns(std::span<const corpus::Email> emails);

void write_campaigns_csv(const std::filesystem::path& path,
                         std::span<const CampaignCluster> clusters);

}  // namespace phishtriage::dedup
