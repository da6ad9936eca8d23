#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "phishtriage/common.hpp"
#include "phishtriage/dedup.hpp"
#include "phishtriage/llda.hpp"
#include "phishtriage/textproc.hpp"

namespace phishtriage::app {

class KeyValueFile;

/// Zero-inflated log-normal trigger count from a latent normal z: 0 when z falls
/// in the lowest zero_prob mass, otherwise round(median * exp(sigma * z)). With
/// zero_prob < 0.5 the overall median count is round(median).
struct TriggerShape {
    double median = 1.0;
    double zero_prob = 0.3;
    double sigma = 0.6;
};

struct SynthSpec {
    std::size_t emails = 1000;  // family emails; SMS-like and competitor extras come on top
    std::uint64_t seed = 1;
    std::string org_name = "acmebank";
    std::string org_domain = "acmebank.com";
    std::string competitor = "rivalbank";

    // Order follows llda::default_labels().
    std::array<TriggerShape, 6> triggers{{{3, 0.30, 0.6}, {13, 0.25, 0.6}, {2, 0.35, 0.6},
                                          {5, 0.30, 0.6}, {3, 0.60, 0.6}, {40, 0.20, 0.6}}};
    double spoof_mean = 7.0;
    double spoof_sd = 4.0;
    std::size_t spoof_max = 23;
    double spoof_drift_per_week = 0.1;
    // Latent normal correlations.
    double corr_scarcity_socialproof = 0.6;
    double corr_liking_spoof = 0.7;

    double alpha = 4.35;
    std::array<double, 6> beta{-0.01, 0.01, 0.0, 0.0, 0.0, 0.02};
    double beta_spoof = -0.09;

    std::size_t label_vocab = 40;
    std::size_t background_vocab = 600;
    std::size_t background_tokens = 60;
    double noise = 0.05;
    double family_size_shape = 1.2;  // Pareto tail of family sizes
    std::size_t max_family_size = 200;

    double suspicious_fraction = 0.9;
    double fanout_fraction = 0.2;
    double loop_fraction = 0.02;
    double stale_fraction = 0.1;
    double sms_fraction = 0.01;
    double competitor_fraction = 0.01;
    double repeat_reporter = 0.35;  // chance a report comes from an earlier reporter

    std::size_t llda_labeled = 150;
    std::size_t dedup_labeled = 300;
    std::size_t window_days = 180;
    Timestamp start = days_from_civil_utc(2018, 2, 1);

    void validate() const;
};

SynthSpec synth_spec_from(const KeyValueFile& kv);
nlohmann::json to_json(const SynthSpec& s);

struct SynthSummary {
    std::size_t messages = 0;
    std::size_t family_emails = 0;
    std::size_t families = 0;
    std::size_t suspicious = 0;
    std::size_t sms_like = 0;
    std::size_t competitor = 0;
};

/// Writes messages.jsonl (ingest format), llda_labels.jsonl, dedup_labels.csv,
/// clicks.csv, redirects.fixture, allowlist.txt, competitors.txt,
/// ground_truth.json and a ready-to-run pipeline.conf into `out_dir`.
SynthSummary synth_corpus(const SynthSpec& spec, const std::filesystem::path& out_dir);

/// Deterministic pseudo-words (consonant-vowel syllables) that survive tokenization unchanged.
std::vector<std::string> pseudo_words(std::size_t n, std::uint64_t seed);

struct SynthFeatures {
    std::array<double, 6> triggers{};
    double spoof_dist = 0.0;
};

/// Draws trigger counts and spoof distance from the spec's marginals and latent correlations.
SynthFeatures draw_features(const SynthSpec& spec, Rng& rng);
/// exp(alpha + beta . triggers + beta_spoof * spoof_dist)
double true_rate(const SynthSpec& spec, const SynthFeatures& f);

/// Near-duplicate families: each family is a template of `tokens` words over a
/// shared vocabulary; each member replaces every token with probability `noise`.
struct FamilyCorpus {
    std::vector<textproc::TokenDoc> docs;
    std::vector<dedup::LabeledDoc> labels;
};
FamilyCorpus synth_family_corpus(std::size_t families, std::size_t per_family, std::size_t tokens,
                                 std::size_t vocab, double noise, std::uint64_t seed);

/// Documents drawn from known label-word distributions. In the separable
/// variant every label owns a disjoint slice of the vocabulary.
struct LabeledCorpus {
    std::vector<textproc::TokenDoc> docs;
    llda::LabelMap labels;
    std::vector<std::string> label_names;
};
LabeledCorpus synth_labeled_corpus(std::size_t docs, std::size_t vocab, std::size_t tokens_per_doc,
                                   bool separable, std::uint64_t seed);

}  // namespace phishtriage::app
