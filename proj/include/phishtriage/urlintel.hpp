#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "phishtriage/common.hpp"
#include "phishtriage/corpus.hpp"

namespace phishtriage::urlintel {

inline constexpr std::string_view kUnresolved = "unresolved";
inline constexpr int kDefaultMaxDepth = 10;

struct SuspiciousUrl {
    std::string email_id;
    std::string url;
    std::string domain;
    friend bool operator==(const SuspiciousUrl&, const SuspiciousUrl&) = default;
};

struct RedirectRecord {
    std::string suspicious_url;
    std::set<std::string> landing_urls;
    std::size_t visits = 0;
    friend bool operator==(const RedirectRecord&, const RedirectRecord&) = default;
};

struct ClickRecord {
    std::string landing_url;
    std::int64_t clicks = 0;
    Timestamp observed_at = 0;
};

struct EmailClicks {
    std::string email_id;
    double clicks_avg = 0.0;
    std::int64_t clicks_sum = 0;
    std::int64_t clicks_max = 0;
    std::size_t matched_landing_count = 0;
};

enum class Strategy { Avg, Sum, Max };
Strategy parse_strategy(std::string_view s);
std::string_view to_string(Strategy s);
double aggregate(const EmailClicks& c, Strategy s);

struct UrlParts {
    std::string scheme;
    std::string host;
    std::string rest;  // port, path, query; never the fragment
};

/// Split an absolute URL; a bare "www." link is treated as http.
std::optional<UrlParts> split_url(std::string_view url);
/// Lowercase scheme and host, drop the fragment.
std::string canonicalize(std::string_view url);
/// Lowercased host of a URL, empty if none.
std::string host_of(std::string_view url);
/// Last two DNS labels, or three under a known two-level public suffix.
std::string registrable_domain(std::string_view host);

/// Links found in free text (http://, https://, www.). Trailing punctuation
/// is trimmed. Order of appearance, duplicates kept.
std::vector<std::string> extract_urls(std::string_view text);

/// Suspicious links of one email; sets email.suspicious accordingly. Domain
/// sets hold registrable domains; a host also matches when it is a subdomain
/// of a listed domain.
std::vector<SuspiciousUrl> extract_suspicious(corpus::Email& email,
                                              const std::set<std::string>& org_domains,
                                              const std::set<std::string>& allowlist);

/// Redirect map read from `src -> dst [weight]` lines.
class RedirectFixture {
public:
    struct Edge {
        std::string target;
        double weight = 1.0;
    };
    static RedirectFixture load(const std::filesystem::path& path);
    static RedirectFixture parse(std::string_view text, const std::string& origin = "<memory>");
    void add(std::string_view src, std::string_view dst, double weight = 1.0);
    const std::vector<Edge>* edges(std::string_view url) const;
    std::size_t size() const noexcept { return edges_.size(); }
    std::string serialize() const;

private:
    std::map<std::string, std::vector<Edge>> edges_;
};

/// One visit: returns the landing URL or "unresolved".
using Resolver = std::function<std::string(const std::string& url, std::size_t visit_index)>;

/// Weighted random walk over the fixture. Each visit draws from its own RNG
/// stream keyed by (seed, url, visit_index).
Resolver fixture_resolver(const RedirectFixture& fx, std::uint64_t seed,
                          int max_depth = kDefaultMaxDepth);

struct LiveOptions {
    int max_depth = kDefaultMaxDepth;
    std::chrono::milliseconds timeout{5000};
    std::string user_agent = "Mozilla/5.0 (compatible; triage-resolver)";
};
/// Follows HTTP 3xx Location headers over the network with a fresh session
/// per visit.
Resolver live_resolver(const LiveOptions& opts = {});

/// Visit `url` `visits` more times, merging into `prior`.
RedirectRecord resolve_redirects(const std::string& url, const Resolver& resolver,
                                 std::size_t visits = 1,
                                 std::optional<RedirectRecord> prior = std::nullopt);

/// Resolve many URLs in parallel; results follow the order of `urls`.
std::vector<RedirectRecord> resolve_all(std::span<const std::string> urls,
                                        const Resolver& resolver, std::size_t visits,
                                        std::span<const RedirectRecord> prior = {});

/// Set union of two records for the same URL.
RedirectRecord merge(const RedirectRecord& a, const RedirectRecord& b);

std::vector<ClickRecord> read_clicks_csv(const std::filesystem::path& path);
void write_clicks_csv(const std::filesystem::path& path, std::span<const ClickRecord> clicks);

/// Per-email aggregation of landing clicks. Repeated observations of one
/// landing keep the latest. Emails with no matched landing are omitted.
/// Output is sorted by email id.
std::vector<EmailClicks> match_clicks(std::span<const SuspiciousUrl> suspicious,
                                      std::span<const RedirectRecord> records,
                                      std::span<const ClickRecord> clicks);

void write_email_clicks_csv(const std::filesystem::path& path,
                            std::span<const EmailClicks> rows);
std::vector<EmailClicks> read_email_clicks_csv(const std::filesystem::path& path);

void write_suspicious_csv(const std::filesystem::path& path,
                          std::span<const SuspiciousUrl> rows);
std::vector<SuspiciousUrl> read_suspicious_csv(const std::filesystem::path& path);

void write_redirects_jsonl(const std::filesystem::path& path,
                           std::span<const RedirectRecord> rows);
std::vector<RedirectRecord> read_redirects_jsonl(const std::filesystem::path& path);

/// Lowercase and drop one trailing label ("org.com" -> "org").
std::string normalize_for_spoof(std::string_view name);
std::size_t spoof_distance(std::string_view from_domain, std::string_view org_name);

}  // namespace phishtriage::urlintel
