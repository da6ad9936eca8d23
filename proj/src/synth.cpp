#include "phishtriage/synth.hpp"

#include <algorithm>
#include <cmath>
#include <ctime>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <unordered_map>

#include <boost/math/distributions/normal.hpp>
#include <boost/random/normal_distribution.hpp>
#include <boost/random/poisson_distribution.hpp>
#include <nlohmann/json.hpp>

#include "phishtriage/config.hpp"
#include "phishtriage/csv.hpp"
#include "phishtriage/urlintel.hpp"

namespace phishtriage::app {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::string_view kConsonants = "bdfgkmpt";
constexpr std::string_view kVowels = "aiou";
constexpr std::size_t kMaxPseudoWords = 8 * 4 * 8 * 4 * 8;

void check_fraction(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError(std::string("synth: ") + what + " must be in [0, 1]");
}

double normal(Rng& rng) { return boost::random::normal_distribution<double>(0.0, 1.0)(rng); }

std::int64_t poisson(Rng& rng, double lambda) {
    if (lambda <= 0.0) return 0;
    return boost::random::poisson_distribution<std::int64_t, double>(lambda)(rng);
}

double normal_quantile(double p) {
    if (p <= 0.0) return -std::numeric_limits<double>::infinity();
    if (p >= 1.0) return std::numeric_limits<double>::infinity();
    return boost::math::quantile(boost::math::normal_distribution<double>(), p);
}

template <class T>
void shuffle(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[uniform_index(rng, i)]);
}

std::tm utc(Timestamp t) {
    const std::time_t tt = static_cast<std::time_t>(t);
    std::tm tm{};
    gmtime_r(&tt, &tm);
    return tm;
}

std::string format_rfc2822(Timestamp t) {
    static const char* days[] = {"Sun", "Mon", "Tue", "Wed", "Thu", "Fri", "Sat"};
    static const char* months[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                   "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
    const std::tm tm = utc(t);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%s, %02d %s %04d %02d:%02d:%02d +0000", days[tm.tm_wday], tm.tm_mday,
                  months[tm.tm_mon], tm.tm_year + 1900, tm.tm_hour, tm.tm_min, tm.tm_sec);
    return buf;
}

std::string format_dutch(Timestamp t) {
    static const char* days[] = {"zondag", "maandag", "dinsdag", "woensdag", "donderdag", "vrijdag", "zaterdag"};
    static const char* months[] = {"januari", "februari", "maart",     "april",   "mei",      "juni",
                                   "juli",    "augustus", "september", "oktober", "november", "december"};
    const std::tm tm = utc(t);
    char buf[80];
    std::snprintf(buf, sizeof buf, "%s %d %s %04d %02d:%02d", days[tm.tm_wday], tm.tm_mday, months[tm.tm_mon],
                  tm.tm_year + 1900, tm.tm_hour, tm.tm_min);
    return buf;
}

std::string capitalize(std::string s) {
    if (!s.empty() && s[0] >= 'a' && s[0] <= 'z') s[0] = static_cast<char>(s[0] - 'a' + 'A');
    return s;
}

std::string random_letters(Rng& rng, std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s.push_back(static_cast<char>('a' + uniform_index(rng, 26)));
    return s;
}

// Lines of about ten words, each ending with a period.
std::string render_paragraphs(const std::vector<std::string>& tokens) {
    std::string out;
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        const bool line_start = i % 10 == 0;
        if (line_start && i > 0) out += ".\n";
        else if (i > 0) out += ' ';
        out += line_start ? capitalize(tokens[i]) : tokens[i];
    }
    if (!tokens.empty()) out += ".";
    return out;
}

enum class Layout { Direct, QuotedEn, QuotedNl, Attachment, Nested };

const char* layout_name(Layout l) {
    switch (l) {
        case Layout::Direct: return "direct";
        case Layout::QuotedEn: return "quoted";
        case Layout::QuotedNl: return "quoted_nl";
        case Layout::Attachment: return "rfc822_attachment";
        case Layout::Nested: return "nested_forward";
    }
    return "?";
}

int layout_depth(Layout l) {
    switch (l) {
        case Layout::Direct: return 0;
        case Layout::Nested: return 2;
        default: return 1;
    }
}

struct Original {
    std::string from;
    std::string to;
    std::string subject;
    Timestamp date = 0;
    std::string body;
};

std::string quote(const std::string& text) {
    std::string out;
    for (const auto& line : split(text, '\n')) out += line.empty() ? ">\n" : "> " + line + "\n";
    return out;
}

std::string header_block(const Original& o, bool dutch) {
    if (dutch)
        return "Van: " + o.from + "\nVerzonden: " + format_dutch(o.date) + "\nAan: " + o.to +
               "\nOnderwerp: " + o.subject + "\n";
    return "From: " + o.from + "\nSent: " + format_rfc2822(o.date) + "\nTo: " + o.to + "\nSubject: " + o.subject +
           "\n";
}

std::string render_raw(const Original& o, Layout layout, const std::string& inbox, const std::string& colleague,
                       Timestamp received, const std::string& boundary) {
    auto top = [&](const std::string& from, const std::string& to, const std::string& subject, Timestamp date) {
        return "From: " + from + "\nTo: " + to + "\nSubject: " + subject + "\nDate: " + format_rfc2822(date) +
               "\nMIME-Version: 1.0\n";
    };
    switch (layout) {
        case Layout::Direct:
            return top(o.from, o.to, o.subject, o.date) + "Content-Type: text/plain; charset=utf-8\n\n" + o.body +
                   "\n";
        case Layout::QuotedEn:
        case Layout::QuotedNl: {
            const bool nl = layout == Layout::QuotedNl;
            return top(o.to, inbox, "FW: " + o.subject, received) +
                   "Content-Type: text/plain; charset=utf-8\n\n" + (nl ? "Zie onderstaand bericht.\n\n" : "Please have a look.\n\n") +
                   "-----Original Message-----\n" + header_block(o, nl) + "\n" + o.body + "\n";
        }
        case Layout::Attachment:
            return top(o.to, inbox, "FW: " + o.subject, received) + "Content-Type: multipart/mixed; boundary=\"" +
                   boundary + "\"\n\n--" + boundary + "\nContent-Type: text/plain; charset=utf-8\n\nForwarding as attachment.\n--" +
                   boundary + "\nContent-Type: message/rfc822\n\n" + "From: " + o.from + "\nTo: " + o.to +
                   "\nSubject: " + o.subject + "\nDate: " + format_rfc2822(o.date) +
                   "\nContent-Type: text/plain; charset=utf-8\n\n" + o.body + "\n--" + boundary + "--\n";
        case Layout::Nested: {
            Original mid{o.to, colleague, "FW: " + o.subject, received - 3600, ""};
            const std::string inner = "Please have a look.\n\n-----Original Message-----\n" + header_block(o, false) + "\n" + o.body;
            return top(colleague, inbox, "FW: FW: " + o.subject, received) +
                   "Content-Type: text/plain; charset=utf-8\n\nForwarded by a colleague.\n\n-----Original Message-----\n" +
                   header_block(mid, false) + "\n" + quote(inner);
        }
    }
    return {};
}

// Picks an index by weight.
std::size_t weighted(Rng& rng, const std::vector<double>& cumulative) {
    const double u = uniform01(rng) * cumulative.back();
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    return std::min<std::size_t>(static_cast<std::size_t>(it - cumulative.begin()), cumulative.size() - 1);
}

}  // namespace

void SynthSpec::validate() const {
    if (emails == 0) throw UsageError("synth: emails must be >= 1");
    if (org_name.empty() || org_domain.empty()) throw UsageError("synth: org_name and org_domain are required");
    for (const auto& t : triggers) {
        check_fraction(t.zero_prob, "zero_prob");
        if (!(t.median >= 0.0) || !(t.sigma >= 0.0)) throw UsageError("synth: trigger median and sigma must be >= 0");
    }
    check_fraction(noise, "noise");
    check_fraction(suspicious_fraction, "suspicious_fraction");
    check_fraction(fanout_fraction, "fanout_fraction");
    check_fraction(loop_fraction, "loop_fraction");
    check_fraction(stale_fraction, "stale_fraction");
    check_fraction(sms_fraction, "sms_fraction");
    check_fraction(competitor_fraction, "competitor_fraction");
    check_fraction(repeat_reporter, "repeat_reporter");
    if (std::abs(corr_scarcity_socialproof) > 1.0 || std::abs(corr_liking_spoof) > 1.0)
        throw UsageError("synth: latent correlations must be in [-1, 1]");
    if (label_vocab == 0 || background_vocab == 0) throw UsageError("synth: vocabularies must be non-empty");
    if (6 * label_vocab + background_vocab > kMaxPseudoWords) throw UsageError("synth: vocabulary too large");
    if (family_size_shape <= 0.0 || max_family_size == 0) throw UsageError("synth: bad family size parameters");
    if (window_days == 0) throw UsageError("synth: window_days must be >= 1");
}

SynthSpec synth_spec_from(const KeyValueFile& kv) {
    const auto& labels = llda::default_labels();
    std::set<std::string> known{"emails", "seed", "org_name", "org_domain", "competitor", "spoof_mean", "spoof_sd",
                                "spoof_max", "spoof_drift_per_week", "corr_scarcity_socialproof",
                                "corr_liking_spoof", "alpha", "beta.SpoofDist", "label_vocab", "background_vocab",
                                "background_tokens", "noise", "family_size_shape", "max_family_size",
                                "suspicious_fraction", "fanout_fraction", "loop_fraction", "stale_fraction",
                                "sms_fraction", "competitor_fraction", "repeat_reporter", "llda_labeled",
                                "dedup_labeled", "window_days", "start"};
    for (const auto& l : labels)
        for (const char* p : {"beta.", "median.", "zero_prob.", "sigma."}) known.insert(p + l);
    for (const auto& [k, v] : kv.values())
        if (!known.count(k)) throw UsageError("unknown synth key '" + k + "'");

    SynthSpec s;
    s.emails = kv.integer_or("emails", s.emails);
    s.seed = kv.integer_or("seed", s.seed);
    s.org_name = kv.get_or("org_name", s.org_name);
    s.org_domain = kv.get_or("org_domain", s.org_domain);
    s.competitor = kv.get_or("competitor", s.competitor);
    for (std::size_t k = 0; k < labels.size(); ++k) {
        s.beta[k] = kv.number_or("beta." + labels[k], s.beta[k]);
        s.triggers[k].median = kv.number_or("median." + labels[k], s.triggers[k].median);
        s.triggers[k].zero_prob = kv.number_or("zero_prob." + labels[k], s.triggers[k].zero_prob);
        s.triggers[k].sigma = kv.number_or("sigma." + labels[k], s.triggers[k].sigma);
    }
    s.beta_spoof = kv.number_or("beta.SpoofDist", s.beta_spoof);
    s.alpha = kv.number_or("alpha", s.alpha);
    s.spoof_mean = kv.number_or("spoof_mean", s.spoof_mean);
    s.spoof_sd = kv.number_or("spoof_sd", s.spoof_sd);
    s.spoof_max = kv.integer_or("spoof_max", s.spoof_max);
    s.spoof_drift_per_week = kv.number_or("spoof_drift_per_week", s.spoof_drift_per_week);
    s.corr_scarcity_socialproof = kv.number_or("corr_scarcity_socialproof", s.corr_scarcity_socialproof);
    s.corr_liking_spoof = kv.number_or("corr_liking_spoof", s.corr_liking_spoof);
    s.label_vocab = kv.integer_or("label_vocab", s.label_vocab);
    s.background_vocab = kv.integer_or("background_vocab", s.background_vocab);
    s.background_tokens = kv.integer_or("background_tokens", s.background_tokens);
    s.noise = kv.number_or("noise", s.noise);
    s.family_size_shape = kv.number_or("family_size_shape", s.family_size_shape);
    s.max_family_size = kv.integer_or("max_family_size", s.max_family_size);
    s.suspicious_fraction = kv.number_or("suspicious_fraction", s.suspicious_fraction);
    s.fanout_fraction = kv.number_or("fanout_fraction", s.fanout_fraction);
    s.loop_fraction = kv.number_or("loop_fraction", s.loop_fraction);
    s.stale_fraction = kv.number_or("stale_fraction", s.stale_fraction);
    s.sms_fraction = kv.number_or("sms_fraction", s.sms_fraction);
    s.competitor_fraction = kv.number_or("competitor_fraction", s.competitor_fraction);
    s.repeat_reporter = kv.number_or("repeat_reporter", s.repeat_reporter);
    s.llda_labeled = kv.integer_or("llda_labeled", s.llda_labeled);
    s.dedup_labeled = kv.integer_or("dedup_labeled", s.dedup_labeled);
    s.window_days = kv.integer_or("window_days", s.window_days);
    if (kv.has("start")) {
        const auto t = parse_iso8601(kv.get("start"));
        if (!t) throw UsageError("synth: start must be an ISO 8601 date");
        s.start = *t;
    }
    s.validate();
    return s;
}

json to_json(const SynthSpec& s) {
    const auto& labels = llda::default_labels();
    json beta = json::object(), trig = json::object();
    for (std::size_t k = 0; k < labels.size(); ++k) {
        beta[labels[k]] = s.beta[k];
        trig[labels[k]] = {{"median", s.triggers[k].median},
                           {"zero_prob", s.triggers[k].zero_prob},
                           {"sigma", s.triggers[k].sigma}};
    }
    beta["SpoofDist"] = s.beta_spoof;
    return {{"emails", s.emails},
            {"seed", s.seed},
            {"org_name", s.org_name},
            {"org_domain", s.org_domain},
            {"competitor", s.competitor},
            {"alpha", s.alpha},
            {"beta", beta},
            {"triggers", trig},
            {"spoof_mean", s.spoof_mean},
            {"spoof_sd", s.spoof_sd},
            {"spoof_max", s.spoof_max},
            {"spoof_drift_per_week", s.spoof_drift_per_week},
            {"corr_scarcity_socialproof", s.corr_scarcity_socialproof},
            {"corr_liking_spoof", s.corr_liking_spoof},
            {"label_vocab", s.label_vocab},
            {"background_vocab", s.background_vocab},
            {"background_tokens", s.background_tokens},
            {"noise", s.noise},
            {"family_size_shape", s.family_size_shape},
            {"max_family_size", s.max_family_size},
            {"suspicious_fraction", s.suspicious_fraction},
            {"fanout_fraction", s.fanout_fraction},
            {"loop_fraction", s.loop_fraction},
            {"stale_fraction", s.stale_fraction},
            {"sms_fraction", s.sms_fraction},
            {"competitor_fraction", s.competitor_fraction},
            {"repeat_reporter", s.repeat_reporter},
            {"llda_labeled", s.llda_labeled},
            {"dedup_labeled", s.dedup_labeled},
            {"window_days", s.window_days},
            {"start", format_iso8601(s.start)}};
}

std::vector<std::string> pseudo_words(std::size_t n, std::uint64_t seed) {
    if (n > kMaxPseudoWords) throw UsageError("at most " + std::to_string(kMaxPseudoWords) + " pseudo-words");
    std::vector<std::string> all;
    all.reserve(kMaxPseudoWords);
    for (char c1 : kConsonants)
        for (char v1 : kVowels)
            for (char c2 : kConsonants)
                for (char v2 : kVowels)
                    for (char c3 : kConsonants) all.push_back({c1, v1, c2, v2, c3});
    Rng rng = make_rng(seed, 0x5057);
    shuffle(all, rng);
    all.resize(n);
    return all;
}

SynthFeatures draw_features(const SynthSpec& spec, Rng& rng) {
    // Latent normals in label order, then spoof distance.
    std::array<double, 7> z{};
    for (auto& v : z) v = normal(rng);
    const double r1 = spec.corr_scarcity_socialproof, r2 = spec.corr_liking_spoof;
    z[5] = r1 * z[2] + std::sqrt(1.0 - r1 * r1) * z[5];
    z[6] = r2 * z[4] + std::sqrt(1.0 - r2 * r2) * z[6];
    SynthFeatures f;
    for (std::size_t k = 0; k < 6; ++k) {
        const auto& t = spec.triggers[k];
        f.triggers[k] = z[k] < normal_quantile(t.zero_prob)
                            ? 0.0
                            : static_cast<double>(round_half_up(t.median * std::exp(t.sigma * z[k])));
    }
    f.spoof_dist = std::clamp(static_cast<double>(round_half_up(spec.spoof_mean + spec.spoof_sd * z[6])), 0.0,
                              static_cast<double>(spec.spoof_max));
    return f;
}

double true_rate(const SynthSpec& spec, const SynthFeatures& f) {
    double eta = spec.alpha + spec.beta_spoof * f.spoof_dist;
    for (std::size_t k = 0; k < 6; ++k) eta += spec.beta[k] * f.triggers[k];
    return std::exp(eta);
}

SynthSummary synth_corpus(const SynthSpec& spec, const fs::path& out_dir) {
    spec.validate();
    fs::create_directories(out_dir);
    const auto& labels = llda::default_labels();
    const std::size_t K = labels.size();

    const auto words = pseudo_words(K * spec.label_vocab + spec.background_vocab, derive_seed(spec.seed, "words"));
    std::vector<std::vector<std::string>> label_words(K);
    for (std::size_t k = 0; k < K; ++k)
        label_words[k].assign(words.begin() + static_cast<std::ptrdiff_t>(k * spec.label_vocab),
                              words.begin() + static_cast<std::ptrdiff_t>((k + 1) * spec.label_vocab));
    const std::vector<std::string> background(words.begin() + static_cast<std::ptrdiff_t>(K * spec.label_vocab),
                                              words.end());
    const auto domain_words = pseudo_words(kMaxPseudoWords, derive_seed(spec.seed, "domains"));
    std::unordered_map<std::string, std::size_t> label_of;
    for (std::size_t k = 0; k < K; ++k)
        for (const auto& w : label_words[k]) label_of[w] = k;

    Rng rng = make_rng(spec.seed, 1);
    const std::string inbox = "phishing@" + spec.org_domain;
    const std::string org_title = capitalize(spec.org_name);
    const std::string org_link = "https://www." + spec.org_domain + "/help";

    // Reporter pool with preferential reuse: a heavy-tailed reports-per-user distribution.
    std::vector<std::size_t> report_owner;
    std::size_t n_reporters = 0;
    auto next_reporter = [&]() {
        std::size_t r;
        if (!report_owner.empty() && uniform01(rng) < spec.repeat_reporter) r = report_owner[uniform_index(rng, report_owner.size())];
        else r = n_reporters++;
        report_owner.push_back(r);
        return "user" + std::to_string(r) + "@mail" + std::to_string(r % 7) + ".example";
    };
    auto pick_layout = [&]() {
        const double u = uniform01(rng);
        if (u < 0.10) return Layout::Direct;
        if (u < 0.55) return Layout::QuotedEn;
        if (u < 0.70) return Layout::QuotedNl;
        if (u < 0.85) return Layout::Attachment;
        return Layout::Nested;
    };

    struct Message {
        std::size_t gen = 0;
        std::string kind;  // family, sms, competitor
        std::int64_t family = -1;
        std::string raw;
        Timestamp received = 0;
        Timestamp date = 0;
        Layout layout = Layout::Direct;
        std::array<std::int64_t, 6> triggers{};
        std::size_t spoof = 0;
        std::string from_domain;
        double rate = 0.0;
        bool suspicious = false;
        std::string suspicious_url;
        std::vector<std::string> landings;
        std::vector<std::int64_t> clicks;
        bool loop = false;
        std::string id;
    };
    std::vector<Message> msgs;

    urlintel::RedirectFixture fixture;
    std::vector<urlintel::ClickRecord> click_rows;
    json families_json = json::array();

    auto spoof_domain = [&](std::size_t d) {
        if (d == 0) return spec.org_domain;
        return spec.org_name + "-" + random_letters(rng, d - 1) + ".com";
    };

    std::size_t family_count = 0;
    std::size_t produced = 0;
    while (produced < spec.emails) {
        const auto fam = static_cast<std::int64_t>(family_count++);
        const double u = std::max(uniform01(rng), 1e-12);
        std::size_t size = static_cast<std::size_t>(std::floor(std::pow(u, -1.0 / spec.family_size_shape)));
        size = std::clamp<std::size_t>(size, 1, spec.max_family_size);
        size = std::min(size, spec.emails - produced);
        produced += size;

        const SynthFeatures tf = draw_features(spec, rng);
        std::vector<std::string> tmpl;
        for (std::size_t k = 0; k < K; ++k)
            for (std::int64_t i = 0; i < static_cast<std::int64_t>(tf.triggers[k]); ++i)
                tmpl.push_back(label_words[k][uniform_index(rng, label_words[k].size())]);
        for (std::size_t i = 0; i < spec.background_tokens; ++i)
            tmpl.push_back(background[uniform_index(rng, background.size())]);
        shuffle(tmpl, rng);

        // Campaign timing.
        const double cu = uniform01(rng);
        double duration_days = 0.0;
        if (size > 1) {
            if (cu < 0.3) duration_days = 0.9 * uniform01(rng);
            else if (cu < 0.5) duration_days = 2.0 + 98.0 * uniform01(rng);
            else duration_days = 101.0 + std::max(0.0, static_cast<double>(spec.window_days) - 102.0) * uniform01(rng);
        }
        duration_days = std::min(duration_days, static_cast<double>(spec.window_days));
        const double slack = static_cast<double>(spec.window_days) - duration_days;
        const Timestamp start = spec.start + static_cast<Timestamp>(slack * uniform01(rng) * kSecondsPerDay);
        const auto span_s = static_cast<Timestamp>(duration_days * kSecondsPerDay);

        const bool suspicious = uniform01(rng) < spec.suspicious_fraction;
        const std::string fam_domain = domain_words[uniform_index(rng, domain_words.size())] +
                                       domain_words[uniform_index(rng, domain_words.size())] + std::to_string(fam) + ".top";
        const std::string land_domain = domain_words[uniform_index(rng, domain_words.size())] + "-secure" + std::to_string(fam) + ".com";
        const std::string subject = org_title + " " + background[uniform_index(rng, background.size())] + " " +
                                    background[uniform_index(rng, background.size())];
        const bool video = uniform01(rng) < 0.2;

        families_json.push_back({{"family", fam},
                                 {"size", size},
                                 {"start", format_iso8601(start)},
                                 {"duration_days", duration_days},
                                 {"suspicious", suspicious},
                                 {"template_triggers", tf.triggers},
                                 {"template_spoof_distance", tf.spoof_dist}});

        for (std::size_t m = 0; m < size; ++m) {
            Message msg;
            msg.gen = msgs.size();
            msg.kind = "family";
            msg.family = fam;
            msg.date = m == 0 ? start : m == 1 ? start + span_s : start + static_cast<Timestamp>(uniform01(rng) * static_cast<double>(span_s));

            std::vector<std::string> toks = tmpl;
            for (auto& t : toks)
                if (uniform01(rng) < spec.noise) t = background[uniform_index(rng, background.size())];
            for (const auto& t : toks) {
                const auto it = label_of.find(t);
                if (it != label_of.end()) ++msg.triggers[it->second];
            }
            const double week = std::floor(static_cast<double>(msg.date - start) / (7.0 * kSecondsPerDay));
            msg.spoof = static_cast<std::size_t>(std::clamp<double>(
                static_cast<double>(round_half_up(tf.spoof_dist + spec.spoof_drift_per_week * week)), 0.0,
                static_cast<double>(spec.spoof_max)));
            msg.from_domain = spoof_domain(msg.spoof);
            SynthFeatures ef;
            for (std::size_t k = 0; k < K; ++k) ef.triggers[k] = static_cast<double>(msg.triggers[k]);
            ef.spoof_dist = static_cast<double>(msg.spoof);
            msg.rate = true_rate(spec, ef);

            std::string links = "\n\nMore information: " + org_link;
            if (video) links += "\nWatch: https://www.youtube.com/watch?v=" + random_letters(rng, 8);
            if (suspicious) {
                msg.suspicious = true;
                const std::string code = domain_words[uniform_index(rng, domain_words.size())] + std::to_string(msg.gen);
                msg.suspicious_url = "http://" + fam_domain + "/p/" + code;
                const std::string hop = "http://r" + std::to_string(msg.gen) + ".redir" + std::to_string(fam) + ".info/go";
                fixture.add(msg.suspicious_url, hop, 1.0);
                if (uniform01(rng) < spec.loop_fraction) {
                    msg.loop = true;
                    fixture.add(hop, msg.suspicious_url, 1.0);
                } else {
                    msg.landings.push_back("https://" + land_domain + "/login/" + code);
                    if (uniform01(rng) < spec.fanout_fraction) {
                        msg.landings.push_back("https://" + land_domain + "/secure/" + code);
                        fixture.add(hop, msg.landings[0], 0.7);
                        fixture.add(hop, msg.landings[1], 0.3);
                    } else {
                        fixture.add(hop, msg.landings[0], 1.0);
                    }
                    const Timestamp observed = msg.date + 30 * static_cast<Timestamp>(kSecondsPerDay);
                    for (const auto& l : msg.landings) {
                        const auto c = poisson(rng, msg.rate);
                        msg.clicks.push_back(c);
                        if (uniform01(rng) < spec.stale_fraction)
                            click_rows.push_back({l, poisson(rng, msg.rate / 2.0), observed - 7 * static_cast<Timestamp>(kSecondsPerDay)});
                        click_rows.push_back({l, c, observed});
                    }
                }
                links = "\n\nLog in here: " + msg.suspicious_url + "." + links;
            }
            const std::string body = "Dear " + org_title + " customer,\n\n" + render_paragraphs(toks) + links +
                                     "\n\nKind regards,\n" + org_title + " Security";

            msg.layout = pick_layout();
            const std::string reporter = next_reporter();
            const Timestamp delay = 600 + static_cast<Timestamp>(uniform01(rng) * 172800.0);
            msg.received = msg.layout == Layout::Direct ? msg.date : msg.date + delay;
            const Original orig{org_title + " Service <service@" + msg.from_domain + ">", reporter, subject, msg.date, body};
            msg.raw = render_raw(orig, msg.layout, inbox, "colleague" + std::to_string(msg.gen % 5) + "@" + spec.org_domain,
                                 msg.received, "b" + std::to_string(msg.gen));
            msgs.push_back(std::move(msg));
        }
    }
    const std::size_t family_emails = msgs.size();

    // SMS-like reports: the user typed or pasted a short text into a fresh email.
    const auto n_sms = static_cast<std::size_t>(round_half_up(spec.sms_fraction * static_cast<double>(spec.emails)));
    for (std::size_t i = 0; i < n_sms; ++i) {
        Message msg;
        msg.gen = msgs.size();
        msg.kind = "sms";
        msg.date = spec.start + static_cast<Timestamp>(uniform01(rng) * static_cast<double>(spec.window_days) * kSecondsPerDay);
        msg.received = msg.date;
        msg.layout = Layout::Direct;
        const std::string reporter = next_reporter();
        msg.from_domain = corpus::domain_of(reporter);
        const Original o{reporter, inbox, "sms", msg.date,
                         org_title + " " + background[uniform_index(rng, background.size())] + " " +
                             background[uniform_index(rng, background.size())] + " http://" +
                             domain_words[uniform_index(rng, domain_words.size())] + ".top/s"};
        msg.raw = render_raw(o, Layout::Direct, inbox, "", msg.received, "");
        msgs.push_back(std::move(msg));
    }
    // Reports about another organization.
    const auto n_comp = static_cast<std::size_t>(round_half_up(spec.competitor_fraction * static_cast<double>(spec.emails)));
    for (std::size_t i = 0; i < n_comp; ++i) {
        Message msg;
        msg.gen = msgs.size();
        msg.kind = "competitor";
        msg.date = spec.start + static_cast<Timestamp>(uniform01(rng) * static_cast<double>(spec.window_days) * kSecondsPerDay);
        msg.received = msg.date + 3600;
        msg.layout = Layout::QuotedEn;
        const std::string reporter = next_reporter();
        msg.from_domain = spec.competitor + "-alert.com";
        std::vector<std::string> toks;
        for (std::size_t t = 0; t < spec.background_tokens; ++t) toks.push_back(background[uniform_index(rng, background.size())]);
        const std::string cname = capitalize(spec.competitor);
        const Original o{cname + " <info@" + msg.from_domain + ">", reporter, cname + " notice", msg.date,
                         "Dear " + cname + " customer,\n\n" + render_paragraphs(toks) + "\n\nRegards,\n" + cname};
        msg.raw = render_raw(o, Layout::QuotedEn, inbox, "", msg.received, "");
        msgs.push_back(std::move(msg));
    }

    // Stable chronological ids.
    std::vector<std::size_t> order(msgs.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return msgs[a].received < msgs[b].received; });
    for (std::size_t i = 0; i < order.size(); ++i) {
        char buf[64];
        std::snprintf(buf, sizeof buf, "msg-%06zu", i + 1);
        msgs[order[i]].id = buf;
    }

    {
        std::ofstream out(out_dir / "messages.jsonl", std::ios::binary);
        if (!out) throw DataError("cannot write " + (out_dir / "messages.jsonl").string());
        for (const auto i : order) {
            const auto& m = msgs[i];
            out << json{{"id", m.id}, {"received_at", format_iso8601(m.received)}, {"raw", m.raw}}.dump() << '\n';
        }
    }

    // Topic-model training labels: one email per family first, then the rest.
    std::vector<std::size_t> fam_first, rest;
    {
        std::set<std::int64_t> seen;
        for (std::size_t i = 0; i < family_emails; ++i)
            (seen.insert(msgs[i].family).second ? fam_first : rest).push_back(i);
        Rng lr = make_rng(spec.seed, 2);
        shuffle(fam_first, lr);
        shuffle(rest, lr);
        fam_first.insert(fam_first.end(), rest.begin(), rest.end());
    }
    llda::LabelMap llda_labels;
    std::vector<bool> label_seen(K, false);
    auto add_labeled = [&](std::size_t i) {
        std::set<std::string> set;
        for (std::size_t k = 0; k < K; ++k)
            if (msgs[i].triggers[k] > 0) {
                set.insert(labels[k]);
                label_seen[k] = true;
            }
        if (set.empty()) return false;
        llda_labels[msgs[i].id] = std::move(set);
        return true;
    };
    for (const auto i : fam_first) {
        if (llda_labels.size() >= spec.llda_labeled) break;
        add_labeled(i);
    }
    for (std::size_t k = 0; k < K; ++k)
        if (!label_seen[k])
            for (const auto i : fam_first)
                if (msgs[i].triggers[k] > 0) {
                    add_labeled(i);
                    break;
                }
    llda::write_labels_jsonl(out_dir / "llda_labels.jsonl", llda_labels);

    // Dedup tuning labels: whole families until the target is reached.
    {
        std::vector<std::int64_t> fams(family_count);
        for (std::size_t f = 0; f < family_count; ++f) fams[f] = static_cast<std::int64_t>(f);
        Rng dr = make_rng(spec.seed, 3);
        shuffle(fams, dr);
        std::map<std::int64_t, std::vector<std::size_t>> members;
        for (std::size_t i = 0; i < family_emails; ++i) members[msgs[i].family].push_back(i);
        std::vector<std::pair<std::string, std::int64_t>> rows;
        for (const auto f : fams) {
            if (rows.size() >= spec.dedup_labeled) break;
            for (const auto i : members[f]) rows.emplace_back(msgs[i].id, f);
        }
        std::sort(rows.begin(), rows.end());
        csv::Writer w(out_dir / "dedup_labels.csv");
        w.row({"email_id", "similarity_group_id"});
        for (const auto& [id, f] : rows) w.row({id, std::to_string(f)});
    }

    for (std::size_t i = 0; i < 5; ++i)
        click_rows.push_back({"https://unrelated" + std::to_string(i) + ".example/x", poisson(rng, 20.0), spec.start});
    urlintel::write_clicks_csv(out_dir / "clicks.csv", click_rows);
    {
        std::ofstream out(out_dir / "redirects.fixture", std::ios::binary);
        out << fixture.serialize();
    }
    {
        std::ofstream out(out_dir / "allowlist.txt", std::ios::binary);
        out << "youtube.com\n";
        std::ofstream comp(out_dir / "competitors.txt", std::ios::binary);
        comp << spec.competitor << "\n";
    }

    SynthSummary summary;
    summary.messages = msgs.size();
    summary.family_emails = family_emails;
    summary.families = family_count;
    summary.sms_like = n_sms;
    summary.competitor = n_comp;

    json emails_json = json::array();
    for (const auto i : order) {
        const auto& m = msgs[i];
        json trig = json::object();
        for (std::size_t k = 0; k < K; ++k) trig[labels[k]] = m.triggers[k];
        json e{{"id", m.id},
               {"kind", m.kind},
               {"family", m.family},
               {"layout", layout_name(m.layout)},
               {"header_depth", layout_depth(m.layout)},
               {"date", format_iso8601(m.date)},
               {"received_at", format_iso8601(m.received)},
               {"from_domain", m.from_domain}};
        if (m.kind == "family") {
            e["triggers"] = trig;
            e["spoof_distance"] = m.spoof;
            e["rate"] = m.rate;
            e["suspicious"] = m.suspicious;
            if (m.suspicious) {
                ++summary.suspicious;
                e["suspicious_url"] = m.suspicious_url;
                e["redirect_loop"] = m.loop;
                e["landing_urls"] = m.landings;
                e["landing_clicks"] = m.clicks;
            }
        }
        emails_json.push_back(std::move(e));
    }
    {
        std::ofstream out(out_dir / "ground_truth.json", std::ios::binary);
        out << json{{"spec", to_json(spec)}, {"families", families_json}, {"emails", emails_json}}.dump(1) << '\n';
    }

    {
        KeyValueFile kv;
        kv.set("config_version", std::to_string(kConfigVersion));
        kv.set("org_name", spec.org_name);
        kv.set("org_domains", spec.org_domain);
        kv.set("allowlist", "allowlist.txt");
        kv.set("competitors", "competitors.txt");
        kv.set("input_format", "jsonl");
        kv.set("dedup.labels", "dedup_labels.csv");
        kv.set("dedup.bootstrap_n", "10000");
        kv.set("dedup.sample_size", std::to_string(std::max<std::size_t>(2, std::min<std::size_t>(300, spec.dedup_labeled))));
        kv.set("dedup.seed", std::to_string(derive_seed(spec.seed, "dedup") % 1000000007ULL));
        kv.set("llda.labels", "llda_labels.jsonl");
        kv.set("llda.iterations", "300");
        kv.set("llda.seed", std::to_string(derive_seed(spec.seed, "llda") % 1000000007ULL));
        kv.set("urls.resolver", "fixture");
        kv.set("urls.fixture", "redirects.fixture");
        kv.set("urls.visits", "3");
        kv.set("urls.seed", std::to_string(derive_seed(spec.seed, "urls") % 1000000007ULL));
        kv.set("clicks", "clicks.csv");
        kv.set("clicks.strategy", "avg");
        kv.set("model", "PM1");
        kv.set("min_clicks", "10");
        kv.set("bootstrap.B", "5000");
        kv.set("bootstrap.seed", std::to_string(derive_seed(spec.seed, "bootstrap") % 1000000007ULL));
        kv.set("predict.draws", "50000");
        kv.set("predict.seed", std::to_string(derive_seed(spec.seed, "predict") % 1000000007ULL));
        std::ofstream out(out_dir / "pipeline.conf", std::ios::binary);
        out << "# generated by triage synth\n" << kv.serialize();
    }
    return summary;
}

FamilyCorpus synth_family_corpus(std::size_t families, std::size_t per_family, std::size_t tokens,
                                 std::size_t vocab, double noise, std::uint64_t seed) {
    check_fraction(noise, "noise");
    if (vocab == 0 || tokens == 0) throw UsageError("synth: vocab and tokens must be >= 1");
    const auto words = pseudo_words(vocab, seed);
    // Zipf word frequencies with exponent 1/2: families share common words
    // without unrelated templates looking alike.
    std::vector<double> cum(vocab);
    double acc = 0.0;
    for (std::size_t r = 0; r < vocab; ++r) cum[r] = acc += 1.0 / std::sqrt(static_cast<double>(r + 1));
    Rng rng = make_rng(seed, 1);
    FamilyCorpus out;
    for (std::size_t f = 0; f < families; ++f) {
        std::vector<std::string> tmpl(tokens);
        for (auto& t : tmpl) t = words[weighted(rng, cum)];
        for (std::size_t m = 0; m < per_family; ++m) {
            textproc::TokenDoc d;
            char buf[64];
            std::snprintf(buf, sizeof buf, "f%04zu-m%03zu", f, m);
            d.email_id = buf;
            d.tokens = tmpl;
            for (auto& t : d.tokens)
                if (uniform01(rng) < noise) t = words[weighted(rng, cum)];
            out.labels.push_back({d.email_id, "g" + std::to_string(f)});
            out.docs.push_back(std::move(d));
        }
    }
    return out;
}

LabeledCorpus synth_labeled_corpus(std::size_t docs, std::size_t vocab, std::size_t tokens_per_doc,
                                   bool separable, std::uint64_t seed) {
    LabeledCorpus out;
    out.label_names = llda::default_labels();
    const std::size_t K = out.label_names.size();
    if (vocab < K) throw UsageError("synth: vocab must be at least the label count");
    const auto words = pseudo_words(vocab, seed);
    Rng rng = make_rng(seed, 1);

    // Cumulative word weights per label.
    std::vector<std::vector<double>> cum(K, std::vector<double>(vocab));
    for (std::size_t k = 0; k < K; ++k) {
        std::vector<double> w(vocab, 0.0);
        if (separable) {
            for (std::size_t v = k * vocab / K; v < (k + 1) * vocab / K; ++v) w[v] = 1.0;
        } else {
            std::vector<std::size_t> idx(vocab);
            for (std::size_t v = 0; v < vocab; ++v) idx[v] = v;
            shuffle(idx, rng);
            for (double& x : w) x = 0.02;
            for (std::size_t c = 0; c < vocab / 5; ++c) w[idx[c]] = 1.0;
        }
        double acc = 0.0;
        for (std::size_t v = 0; v < vocab; ++v) cum[k][v] = acc += w[v];
    }
    for (std::size_t d = 0; d < docs; ++d) {
        const double u = uniform01(rng);
        const std::size_t n_labels = u < 0.5 ? 1 : u < 0.85 ? 2 : 3;
        std::vector<std::size_t> all(K);
        for (std::size_t k = 0; k < K; ++k) all[k] = k;
        shuffle(all, rng);
        all.resize(n_labels);
        textproc::TokenDoc doc;
        char buf[64];
        std::snprintf(buf, sizeof buf, "doc-%05zu", d);
        doc.email_id = buf;
        for (std::size_t t = 0; t < tokens_per_doc; ++t) {
            const std::size_t k = all[uniform_index(rng, all.size())];
            doc.tokens.push_back(words[weighted(rng, cum[k])]);
        }
        auto& set = out.labels[doc.email_id];
        for (const auto k : all) set.insert(out.label_names[k]);
        out.docs.push_back(std::move(doc));
    }
    return out;
}

}  // namespace phishtriage::app
