#include "phishtriage/urlintel.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "phishtriage/csv.hpp"
#include "phishtriage/parallel.hpp"
#include "phishtriage/textproc.hpp"

namespace phishtriage::urlintel {

Strategy parse_strategy(std::string_view s) {
    if (s == "avg") return Strategy::Avg;
    if (s == "sum") return Strategy::Sum;
    if (s == "max") return Strategy::Max;
    throw UsageError("unknown click strategy '" + std::string(s) + "' (avg|sum|max)");
}

std::string_view to_string(Strategy s) {
    switch (s) {
        case Strategy::Avg: return "avg";
        case Strategy::Sum: return "sum";
        case Strategy::Max: return "max";
    }
    return "?";
}

double aggregate(const EmailClicks& c, Strategy s) {
    switch (s) {
        case Strategy::Avg: return c.clicks_avg;
        case Strategy::Sum: return static_cast<double>(c.clicks_sum);
        case Strategy::Max: return static_cast<double>(c.clicks_max);
    }
    return c.clicks_avg;
}

std::optional<UrlParts> split_url(std::string_view url) {
    UrlParts p;
    std::string_view rest;
    const auto sep = url.find("://");
    if (sep != std::string_view::npos) {
        p.scheme = to_lower_ascii(url.substr(0, sep));
        if (p.scheme.empty()) return std::nullopt;
        rest = url.substr(sep + 3);
    } else if (url.size() > 4 && iequals(url.substr(0, 4), "www.")) {
        p.scheme = "http";
        rest = url;
    } else {
        return std::nullopt;
    }
    const auto frag = rest.find('#');
    if (frag != std::string_view::npos) rest = rest.substr(0, frag);
    // Drop userinfo ("user:pw@host") before locating the port.
    const auto at = rest.substr(0, rest.find_first_of("/?")).rfind('@');
    if (at != std::string_view::npos) rest = rest.substr(at + 1);
    const auto host_end = rest.find_first_of(":/?");
    const std::string_view authority = rest.substr(0, host_end);
    p.host = to_lower_ascii(authority);
    while (!p.host.empty() && p.host.back() == '.') p.host.pop_back();
    if (p.host.empty()) return std::nullopt;
    p.rest = host_end == std::string_view::npos ? "" : std::string(rest.substr(host_end));
    return p;
}

std::string canonicalize(std::string_view url) {
    const auto p = split_url(url);
    if (!p) {
        const auto frag = url.find('#');
        return std::string(url.substr(0, frag));
    }
    return p->scheme + "://" + p->host + p->rest;
}

std::string host_of(std::string_view url) {
    const auto p = split_url(url);
    return p ? p->host : std::string();
}

namespace {

// Second-level labels that commonly sit under a country code.
bool is_two_level_suffix(std::string_view second, std::string_view tld) {
    static const std::set<std::string_view> seconds{"co", "com", "ac", "gov", "org", "net",
                                                     "edu", "ne", "or", "go", "gob", "nic"};
    return tld.size() == 2 && seconds.count(second) > 0;
}

}  // namespace

std::string registrable_domain(std::string_view host) {
    const auto labels = split(to_lower_ascii(host), '.');
    if (labels.size() <= 2) return to_lower_ascii(host);
    const std::size_t n = labels.size();
    const std::size_t keep = is_two_level_suffix(labels[n - 2], labels[n - 1]) ? 3 : 2;
    std::string out;
    for (std::size_t i = n - std::min(keep, n); i < n; ++i) {
        if (!out.empty()) out += '.';
        out += labels[i];
    }
    return out;
}

std::vector<std::string> extract_urls(std::string_view text) {
    std::vector<std::string> out;
    auto is_boundary = [](char c) {
        return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '<' || c == '>' ||
               c == '"' || c == '\'' || c == '`';
    };
    std::size_t i = 0;
    while (i < text.size()) {
        std::size_t start = std::string_view::npos;
        for (std::size_t j = i; j < text.size(); ++j) {
            if (j > 0 && !is_boundary(text[j - 1]) && text[j - 1] != '(' && text[j - 1] != '[')
                continue;
            const auto tail = text.substr(j);
            if ((tail.size() > 7 && iequals(tail.substr(0, 7), "http://")) ||
                (tail.size() > 8 && iequals(tail.substr(0, 8), "https://")) ||
                (tail.size() > 4 && iequals(tail.substr(0, 4), "www."))) {
                start = j;
                break;
            }
        }
        if (start == std::string_view::npos) break;
        std::size_t end = start;
        while (end < text.size() && !is_boundary(text[end])) ++end;
        std::string_view url = text.substr(start, end - start);
        while (!url.empty() && std::string_view(".,;:!?)]}").find(url.back()) != std::string_view::npos)
            url.remove_suffix(1);
        if (split_url(url)) out.emplace_back(url);
        i = end;
    }
    return out;
}

namespace {

bool in_domain_set(const std::string& host, const std::set<std::string>& domains) {
    const std::string reg = registrable_domain(host);
    if (domains.count(reg) || domains.count(host)) return true;
    for (const auto& d : domains)
        if (host.size() > d.size() && host.ends_with(d) && host[host.size() - d.size() - 1] == '.')
            return true;
    return false;
}

}  // namespace

std::vector<SuspiciousUrl> extract_suspicious(corpus::Email& email,
                                              const std::set<std::string>& org_domains,
                                              const std::set<std::string>& allowlist) {
    std::vector<SuspiciousUrl> out;
    for (const auto& url : extract_urls(email.body_text)) {
        const std::string host = host_of(url);
        if (host.empty()) continue;
        if (in_domain_set(host, org_domains) || in_domain_set(host, allowlist)) continue;
        out.push_back({email.id, url, registrable_domain(host)});
    }
    email.suspicious = !out.empty();
    return out;
}

RedirectFixture RedirectFixture::load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read redirect fixture " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path.string());
}

RedirectFixture RedirectFixture::parse(std::string_view text, const std::string& origin) {
    RedirectFixture fx;
    std::size_t lineno = 0;
    for (const auto& raw : split(text, '\n')) {
        ++lineno;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#') continue;
        const auto arrow = line.find("->");
        if (arrow == std::string::npos)
            throw DataError(origin + ":" + std::to_string(lineno) + ": expected 'src -> dst [weight]'");
        const std::string src = trim(line.substr(0, arrow));
        std::istringstream rhs(line.substr(arrow + 2));
        std::string dst, wtok;
        rhs >> dst;
        double w = 1.0;
        if (rhs >> wtok) {
            const auto [p, ec] = std::from_chars(wtok.data(), wtok.data() + wtok.size(), w);
            if (ec != std::errc{} || p != wtok.data() + wtok.size() || !(w > 0.0))
                throw DataError(origin + ":" + std::to_string(lineno) + ": bad weight '" + wtok + "'");
        }
        if (src.empty() || dst.empty())
            throw DataError(origin + ":" + std::to_string(lineno) + ": empty URL");
        fx.add(src, dst, w);
    }
    return fx;
}

void RedirectFixture::add(std::string_view src, std::string_view dst, double weight) {
    edges_[canonicalize(src)].push_back({std::string(dst), weight});
}

const std::vector<RedirectFixture::Edge>* RedirectFixture::edges(std::string_view url) const {
    const auto it = edges_.find(canonicalize(url));
    return it == edges_.end() ? nullptr : &it->second;
}

std::string RedirectFixture::serialize() const {
    std::string out;
    for (const auto& [src, edges] : edges_)
        for (const auto& e : edges) out += src + " -> " + e.target + " " + csv::fmt(e.weight) + "\n";
    return out;
}

Resolver fixture_resolver(const RedirectFixture& fx, std::uint64_t seed, int max_depth) {
    return [fx, seed, max_depth](const std::string& url, std::size_t visit) -> std::string {
        Rng rng = make_rng(derive_seed(seed, canonicalize(url)), visit);
        std::string cur = url;
        std::set<std::string> seen{canonicalize(cur)};
        for (int hop = 0;; ++hop) {
            const auto* edges = fx.edges(cur);
            if (!edges || edges->empty()) return canonicalize(cur);
            if (hop >= max_depth) return std::string(kUnresolved);
            std::size_t pick = 0;
            if (edges->size() > 1) {
                double total = 0.0;
                for (const auto& e : *edges) total += e.weight;
                double u = uniform01(rng) * total;
                pick = edges->size() - 1;
                for (std::size_t k = 0; k < edges->size(); ++k) {
                    if (u < (*edges)[k].weight) {
                        pick = k;
                        break;
                    }
                    u -= (*edges)[k].weight;
                }
            }
            cur = (*edges)[pick].target;
            if (!seen.insert(canonicalize(cur)).second) return std::string(kUnresolved);
        }
    };
}

RedirectRecord resolve_redirects(const std::string& url, const Resolver& resolver,
                                 std::size_t visits, std::optional<RedirectRecord> prior) {
    RedirectRecord rec = prior ? std::move(*prior) : RedirectRecord{};
    if (prior && rec.suspicious_url != url)
        throw UsageError("prior record belongs to a different URL");
    rec.suspicious_url = url;
    for (std::size_t v = 0; v < visits; ++v) {
        std::string landing;
        try {
            landing = resolver(url, rec.visits);
        } catch (const std::exception&) {
            landing = std::string(kUnresolved);
        }
        rec.landing_urls.insert(landing == kUnresolved ? landing : canonicalize(landing));
        ++rec.visits;
    }
    return rec;
}

std::vector<RedirectRecord> resolve_all(std::span<const std::string> urls,
                                        const Resolver& resolver, std::size_t visits,
                                        std::span<const RedirectRecord> prior) {
    std::unordered_map<std::string, const RedirectRecord*> by_url;
    for (const auto& r : prior) by_url[r.suspicious_url] = &r;
    std::vector<RedirectRecord> out(urls.size());
    parallel_for(urls.size(), [&](std::size_t i) {
        const auto it = by_url.find(urls[i]);
        std::optional<RedirectRecord> p;
        if (it != by_url.end()) p = *it->second;
        out[i] = resolve_redirects(urls[i], resolver, visits, std::move(p));
    });
    return out;
}

RedirectRecord merge(const RedirectRecord& a, const RedirectRecord& b) {
    if (a.suspicious_url != b.suspicious_url)
        throw UsageError("cannot merge redirect records of different URLs");
    RedirectRecord out = a;
    out.landing_urls.insert(b.landing_urls.begin(), b.landing_urls.end());
    out.visits += b.visits;
    return out;
}

std::vector<ClickRecord> read_clicks_csv(const std::filesystem::path& path) {
    const auto t = csv::Table::read(path);
    std::vector<ClickRecord> out;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        ClickRecord c;
        c.landing_url = t.at(r, "landing_url");
        const double clicks = t.number(r, "clicks");
        if (clicks < 0 || clicks != static_cast<double>(static_cast<std::int64_t>(clicks)))
            throw DataError(path.string() + ": row " + std::to_string(r + 2) +
                            ": clicks must be a non-negative integer");
        c.clicks = static_cast<std::int64_t>(clicks);
        const std::string obs = trim(t.at(r, "observed_at"));
        if (auto ts = parse_iso8601(obs)) {
            c.observed_at = *ts;
        } else {
            c.observed_at = static_cast<Timestamp>(t.number(r, "observed_at"));
        }
        out.push_back(std::move(c));
    }
    return out;
}

void write_clicks_csv(const std::filesystem::path& path, std::span<const ClickRecord> clicks) {
    csv::Writer w(path);
    w.row({"landing_url", "clicks", "observed_at"});
    for (const auto& c : clicks)
        w.row({c.landing_url, std::to_string(c.clicks), format_iso8601(c.observed_at)});
}

std::vector<EmailClicks> match_clicks(std::span<const SuspiciousUrl> suspicious,
                                      std::span<const RedirectRecord> records,
                                      std::span<const ClickRecord> clicks) {
    // Latest observation per canonical landing.
    std::unordered_map<std::string, const ClickRecord*> latest;
    for (const auto& c : clicks) {
        auto& slot = latest[canonicalize(c.landing_url)];
        if (!slot || c.observed_at >= slot->observed_at) slot = &c;
    }
    std::unordered_map<std::string, std::vector<const RedirectRecord*>> by_url;
    for (const auto& r : records) by_url[r.suspicious_url].push_back(&r);

    std::map<std::string, std::set<std::string>> landings_by_email;
    for (const auto& s : suspicious) {
        const auto it = by_url.find(s.url);
        if (it == by_url.end()) continue;
        for (const auto* r : it->second)
            for (const auto& l : r->landing_urls)
                if (l != kUnresolved) landings_by_email[s.email_id].insert(canonicalize(l));
    }

    std::vector<EmailClicks> out;
    for (const auto& [email_id, landings] : landings_by_email) {
        EmailClicks ec;
        ec.email_id = email_id;
        for (const auto& l : landings) {
            const auto it = latest.find(l);
            if (it == latest.end()) continue;
            ++ec.matched_landing_count;
            ec.clicks_sum += it->second->clicks;
            ec.clicks_max = std::max(ec.clicks_max, it->second->clicks);
        }
        if (ec.matched_landing_count == 0) continue;
        ec.clicks_avg = static_cast<double>(ec.clicks_sum) / static_cast<double>(ec.matched_landing_count);
        out.push_back(std::move(ec));
    }
    return out;
}

void write_email_clicks_csv(const std::filesystem::path& path, std::span<const EmailClicks> rows) {
    csv::Writer w(path);
    w.row({"email_id", "clicks_avg", "clicks_sum", "clicks_max", "matched_landing_count"});
    for (const auto& r : rows)
        w.row({r.email_id, csv::fmt(r.clicks_avg), std::to_string(r.clicks_sum),
               std::to_string(r.clicks_max), std::to_string(r.matched_landing_count)});
}

std::vector<EmailClicks> read_email_clicks_csv(const std::filesystem::path& path) {
    const auto t = csv::Table::read(path);
    std::vector<EmailClicks> out;
    for (std::size_t r = 0; r < t.rows(); ++r) {
        EmailClicks e;
        e.email_id = t.at(r, "email_id");
        e.clicks_avg = t.number(r, "clicks_avg");
        e.clicks_sum = static_cast<std::int64_t>(t.number(r, "clicks_sum"));
        e.clicks_max = static_cast<std::int64_t>(t.number(r, "clicks_max"));
        e.matched_landing_count = static_cast<std::size_t>(t.number(r, "matched_landing_count"));
        out.push_back(std::move(e));
    }
    return out;
}

void write_suspicious_csv(const std::filesystem::path& path, std::span<const SuspiciousUrl> rows) {
    csv::Writer w(path);
    w.row({"email_id", "url", "domain"});
    for (const auto& r : rows) w.row({r.email_id, r.url, r.domain});
}

std::vector<SuspiciousUrl> read_suspicious_csv(const std::filesystem::path& path) {
    const auto t = csv::Table::read(path);
    std::vector<SuspiciousUrl> out;
    for (std::size_t r = 0; r < t.rows(); ++r)
        out.push_back({t.at(r, "email_id"), t.at(r, "url"), t.at(r, "domain")});
    return out;
}

void write_redirects_jsonl(const std::filesystem::path& path, std::span<const RedirectRecord> rows) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& r : rows)
        out << nlohmann::json{{"suspicious_url", r.suspicious_url},
                              {"landing_urls", r.landing_urls},
                              {"visits", r.visits}}
                   .dump()
            << '\n';
}

std::vector<RedirectRecord> read_redirects_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::vector<RedirectRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            RedirectRecord r;
            r.suspicious_url = j.at("suspicious_url").get<std::string>();
            r.landing_urls = j.at("landing_urls").get<std::set<std::string>>();
            r.visits = j.at("visits").get<std::size_t>();
            out.push_back(std::move(r));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

std::string normalize_for_spoof(std::string_view name) {
    std::string s = to_lower_ascii(trim(name));
    while (!s.empty() && s.back() == '.') s.pop_back();
    const auto dot = s.rfind('.');
    if (dot != std::string::npos) s.erase(dot);
    return s;
}

std::size_t spoof_distance(std::string_view from_domain, std::string_view org_name) {
    return textproc::levenshtein(normalize_for_spoof(from_domain), normalize_for_spoof(org_name));
}

}  // namespace phishtriage::urlintel
