#include "phishtriage/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "phishtriage/csv.hpp"
#include "phishtriage/econometrics.hpp"

namespace phishtriage::app {

namespace fs = std::filesystem;

KeyValueFile KeyValueFile::load(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot read config " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

KeyValueFile KeyValueFile::parse(std::string_view text, const std::string& origin) {
    KeyValueFile kv;
    kv.origin_ = origin;
    std::size_t lineno = 0;
    for (const auto& raw : split(text, '\n')) {
        ++lineno;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw UsageError(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
        const std::string key = trim(line.substr(0, eq));
        if (key.empty()) throw UsageError(origin + ":" + std::to_string(lineno) + ": empty key");
        if (kv.values_.count(key))
            throw UsageError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
        kv.values_[key] = trim(line.substr(eq + 1));
    }
    return kv;
}

std::string KeyValueFile::get(const std::string& key) const {
    const auto it = values_.find(key);
    if (it == values_.end()) throw UsageError(origin_ + ": missing required key '" + key + "'");
    return it->second;
}

std::string KeyValueFile::get_or(const std::string& key, std::string fallback) const {
    const auto it = values_.find(key);
    return it == values_.end() ? std::move(fallback) : it->second;
}

double KeyValueFile::number(const std::string& key) const {
    const std::string s = get(key);
    double v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw UsageError(origin_ + ": key '" + key + "' is not a number: '" + s + "'");
    return v;
}

double KeyValueFile::number_or(const std::string& key, double fallback) const {
    return has(key) ? number(key) : fallback;
}

std::uint64_t KeyValueFile::integer(const std::string& key) const {
    const std::string s = get(key);
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw UsageError(origin_ + ": key '" + key + "' is not a non-negative integer: '" + s + "'");
    return v;
}

std::uint64_t KeyValueFile::integer_or(const std::string& key, std::uint64_t fallback) const {
    return has(key) ? integer(key) : fallback;
}

std::vector<std::string> KeyValueFile::list(const std::string& key) const {
    std::vector<std::string> out;
    if (!has(key)) return out;
    for (const auto& part : split(get(key), ',')) {
        auto t = trim(part);
        if (!t.empty()) out.push_back(std::move(t));
    }
    return out;
}

std::string KeyValueFile::serialize() const {
    std::string out;
    for (const auto& [k, v] : values_) out += k + " = " + v + "\n";
    return out;
}

std::set<std::string> load_domain_list(const fs::path& path) {
    std::set<std::string> out;
    for (const auto& n : load_name_list(path)) out.insert(to_lower_ascii(n));
    return out;
}

std::vector<std::string> load_name_list(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::vector<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        auto t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        out.push_back(std::move(t));
    }
    return out;
}

namespace {

const std::set<std::string>& known_keys() {
    static const std::set<std::string> keys{
        "config_version", "org_name", "org_domains", "allowlist", "competitors", "input_format", "lexicon",
        "sms_max_length", "stopwords", "stemmer", "dedup.threshold", "dedup.labels", "dedup.bootstrap_n",
        "dedup.sample_size", "dedup.seed", "llda.alpha", "llda.beta", "llda.iterations", "llda.burn_in",
        "llda.seed", "llda.labels", "llda.model", "llda.average_sweeps", "llda.presence_margin",
        "urls.resolver", "urls.fixture", "urls.visits", "urls.max_depth", "urls.seed", "clicks",
        "clicks.strategy", "model", "min_clicks", "bootstrap.B", "bootstrap.seed", "predict.draws",
        "predict.seed", "report.spoof_threshold", "robustness.min_group", "workers"};
    return keys;
}

fs::path existing(const fs::path& base, const std::string& value, const std::string& key) {
    fs::path p(value);
    if (p.is_relative()) p = base / p;
    if (!fs::exists(p)) throw UsageError("config key '" + key + "': file not found: " + p.string());
    return p;
}

}  // namespace

PipelineConfig pipeline_config_from(const KeyValueFile& kv, const fs::path& base_dir) {
    for (const auto& [k, v] : kv.values())
        if (!known_keys().count(k)) throw UsageError("unknown config key '" + k + "'");
    const auto version = kv.integer("config_version");
    if (version != kConfigVersion)
        throw UsageError("unsupported config_version " + std::to_string(version) + " (expected " +
                         std::to_string(kConfigVersion) + ")");

    PipelineConfig c;
    c.base_dir = base_dir;
    c.org_name = kv.get("org_name");
    if (c.org_name.empty()) throw UsageError("org_name must not be empty");
    for (const auto& d : kv.list("org_domains")) c.org_domains.insert(to_lower_ascii(d));
    if (kv.has("allowlist")) c.allowlist = load_domain_list(existing(base_dir, kv.get("allowlist"), "allowlist"));
    if (kv.has("competitors")) c.competitors = load_name_list(existing(base_dir, kv.get("competitors"), "competitors"));
    c.input_format = corpus::parse_input_format(kv.get_or("input_format", "jsonl"));
    if (kv.has("lexicon")) c.lexicon = corpus::LabelLexicon::load(existing(base_dir, kv.get("lexicon"), "lexicon"));
    c.sms.max_length = kv.integer_or("sms_max_length", c.sms.max_length);

    if (kv.has("stopwords")) c.tokenizer.stopwords = textproc::load_word_list(existing(base_dir, kv.get("stopwords"), "stopwords"));
    c.tokenizer.stemmer = kv.get_or("stemmer", c.tokenizer.stemmer);
    if (c.tokenizer.stemmer != "porter" && c.tokenizer.stemmer != "none")
        throw UsageError("stemmer must be 'porter' or 'none'");

    if (kv.has("dedup.threshold")) {
        c.dedup_threshold = kv.number("dedup.threshold");
        if (*c.dedup_threshold < 0.0 || *c.dedup_threshold > 1.0) throw UsageError("dedup.threshold must be in [0, 1]");
    }
    if (kv.has("dedup.labels")) c.dedup_labels = existing(base_dir, kv.get("dedup.labels"), "dedup.labels");
    if (!c.dedup_threshold && !c.dedup_labels)
        throw UsageError("config needs dedup.threshold or dedup.labels");
    c.dedup_bootstrap_n = kv.integer_or("dedup.bootstrap_n", c.dedup_bootstrap_n);
    c.dedup_sample_size = kv.integer_or("dedup.sample_size", c.dedup_sample_size);
    if (c.dedup_labels) c.dedup_seed = kv.integer("dedup.seed");

    c.llda.alpha = kv.number_or("llda.alpha", c.llda.alpha);
    c.llda.beta = kv.number_or("llda.beta", c.llda.beta);
    c.llda.n_iterations = kv.integer_or("llda.iterations", c.llda.n_iterations);
    c.llda.burn_in = kv.integer_or("llda.burn_in", c.llda.n_iterations * 9 / 10);
    c.llda.average_sweeps = kv.integer_or("llda.average_sweeps", 1);
    c.llda.seed = kv.integer("llda.seed");
    c.llda.validate();
    if (kv.has("llda.labels")) c.llda_labels = existing(base_dir, kv.get("llda.labels"), "llda.labels");
    if (kv.has("llda.model")) c.llda_model = existing(base_dir, kv.get("llda.model"), "llda.model");
    if (!c.llda_labels && !c.llda_model) throw UsageError("config needs llda.labels or llda.model");
    c.presence_margin = kv.number_or("llda.presence_margin", c.presence_margin);

    c.resolver = kv.get_or("urls.resolver", c.resolver);
    if (c.resolver != "fixture" && c.resolver != "live") throw UsageError("urls.resolver must be 'fixture' or 'live'");
    if (kv.has("urls.fixture")) c.redirect_fixture = existing(base_dir, kv.get("urls.fixture"), "urls.fixture");
    if (c.resolver == "fixture" && !c.redirect_fixture) throw UsageError("fixture resolver needs urls.fixture");
    c.url_visits = kv.integer_or("urls.visits", c.url_visits);
    if (c.url_visits == 0) throw UsageError("urls.visits must be >= 1");
    c.url_max_depth = static_cast<int>(kv.integer_or("urls.max_depth", static_cast<std::uint64_t>(c.url_max_depth)));
    c.url_seed = kv.integer("urls.seed");
    if (kv.has("clicks")) c.clicks = existing(base_dir, kv.get("clicks"), "clicks");
    c.strategy = urlintel::parse_strategy(kv.get_or("clicks.strategy", "avg"));

    c.model = kv.get_or("model", c.model);
    (void)econ::model_regressors(c.model);
    c.min_clicks = kv.number_or("min_clicks", c.min_clicks);
    c.bootstrap_B = kv.integer_or("bootstrap.B", c.bootstrap_B);
    c.bootstrap_seed = kv.integer("bootstrap.seed");
    c.predict_draws = kv.integer_or("predict.draws", c.predict_draws);
    c.predict_seed = kv.integer("predict.seed");
    c.spoof_threshold = kv.integer_or("report.spoof_threshold", c.spoof_threshold);
    c.robustness_min_group = kv.integer_or("robustness.min_group", c.robustness_min_group);
    c.workers = kv.integer_or("workers", 0);
    return c;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
    return pipeline_config_from(KeyValueFile::load(path), path.parent_path());
}

}  // namespace phishtriage::app
