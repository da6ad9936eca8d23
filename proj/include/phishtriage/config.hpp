#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "phishtriage/corpus.hpp"
#include "phishtriage/llda.hpp"
#include "phishtriage/urlintel.hpp"

namespace phishtriage::app {

/// Flat `key = value` file. Blank lines and lines starting with '#' are
/// ignored; list values are comma separated.
class KeyValueFile {
public:
    static KeyValueFile load(const std::filesystem::path& path);
    static KeyValueFile parse(std::string_view text, const std::string& origin = "<memory>");

    bool has(const std::string& key) const { return values_.count(key) > 0; }
    std::string get(const std::string& key) const;
    std::string get_or(const std::string& key, std::string fallback) const;
    double number(const std::string& key) const;
    double number_or(const std::string& key, double fallback) const;
    std::uint64_t integer(const std::string& key) const;
    std::uint64_t integer_or(const std::string& key, std::uint64_t fallback) const;
    std::vector<std::string> list(const std::string& key) const;
    const std::map<std::string, std::string>& values() const noexcept { return values_; }
    void set(const std::string& key, std::string value) { values_[key] = std::move(value); }
    std::string serialize() const;

private:
    std::string origin_;
    std::map<std::string, std::string> values_;
};

inline constexpr int kConfigVersion = 1;

struct PipelineConfig {
    std::filesystem::path base_dir;

    std::string org_name = "org";
    std::set<std::string> org_domains;
    std::set<std::string> allowlist;
    std::vector<std::string> competitors;

    corpus::InputFormat input_format = corpus::InputFormat::Jsonl;
    corpus::LabelLexicon lexicon = corpus::LabelLexicon::defaults();
    corpus::SmsHeuristics sms;

    textproc::TokenizerConfig tokenizer = textproc::TokenizerConfig::english();

    std::optional<double> dedup_threshold;
    std::optional<std::filesystem::path> dedup_labels;
    std::size_t dedup_bootstrap_n = 10000;
    std::size_t dedup_sample_size = 300;
    std::uint64_t dedup_seed = 0;

    llda::LldaConfig llda;
    std::optional<std::filesystem::path> llda_labels;
    std::optional<std::filesystem::path> llda_model;
    double presence_margin = llda::kDefaultPresenceMargin;

    std::string resolver = "fixture";
    std::optional<std::filesystem::path> redirect_fixture;
    std::size_t url_visits = 3;
    int url_max_depth = urlintel::kDefaultMaxDepth;
    std::uint64_t url_seed = 0;
    std::optional<std::filesystem::path> clicks;
    urlintel::Strategy strategy = urlintel::Strategy::Avg;

    std::string model = "PM1";
    double min_clicks = 10.0;
    std::size_t bootstrap_B = 5000;
    std::uint64_t bootstrap_seed = 0;
    std::size_t predict_draws = 50000;
    std::uint64_t predict_seed = 0;

    std::size_t spoof_threshold = 3;
    std::size_t robustness_min_group = 5;
    std::size_t workers = 0;  // 0 = hardware concurrency
};

/// Parses and validates a pipeline config. Relative paths resolve against the
/// file's directory. Every stage seed must be present.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);
PipelineConfig pipeline_config_from(const KeyValueFile& kv, const std::filesystem::path& base_dir);

/// One domain per line; '#' comments allowed.
std::set<std::string> load_domain_list(const std::filesystem::path& path);
std::vector<std::string> load_name_list(const std::filesystem::path& path);

}  // namespace phishtriage::app
