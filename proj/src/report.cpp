#include "phishtriage/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "phishtriage/csv.hpp"
#include "phishtriage/urlintel.hpp"

namespace phishtriage::app {

namespace fs = std::filesystem;

std::vector<CdfPoint> empirical_cdf(std::vector<double> values) {
    std::vector<CdfPoint> out;
    if (values.empty()) return out;
    std::sort(values.begin(), values.end());
    const double n = static_cast<double>(values.size());
    for (std::size_t i = 0; i < values.size(); ++i) {
        if (i + 1 < values.size() && values[i + 1] == values[i]) continue;
        out.push_back({values[i], static_cast<double>(i + 1) / n});
    }
    out.back().cdf = 1.0;
    return out;
}

Summary summarize(std::vector<double> v) {
    Summary s;
    s.n = v.size();
    if (v.empty()) return s;
    std::sort(v.begin(), v.end());
    s.min = v.front();
    s.max = v.back();
    s.q1 = stats::quantile_sorted(v, 0.25);
    s.median = stats::quantile_sorted(v, 0.5);
    s.q3 = stats::quantile_sorted(v, 0.75);
    s.mean = stats::mean(v);
    s.sd = stats::sd(v);
    return s;
}

ReportBundle report_stats(std::span<const corpus::Email> emails,
                          std::span<const dedup::CampaignCluster> campaigns,
                          std::span<const llda::CognitiveProfile> profiles,
                          const std::vector<std::string>& labels,
                          std::span<const econ::DesignRow> design, const ReportOptions& opts) {
    ReportBundle b;

    // Arrivals.
    std::vector<double> times;
    for (const auto& e : emails)
        if (e.date) {
            times.push_back(static_cast<double>(*e.date));
            b.arrivals.push_back({e.duplicate_id.value_or(-1), e.id, *e.date});
        }
    std::sort(b.arrivals.begin(), b.arrivals.end(), [](const auto& x, const auto& y) {
        if (x.duplicate_id != y.duplicate_id) return x.duplicate_id < y.duplicate_id;
        if (x.date != y.date) return x.date < y.date;
        return x.email_id < y.email_id;
    });
    b.arrival_cdf = empirical_cdf(times);
    if (times.size() < emails.size())
        b.notes.push_back(std::to_string(emails.size() - times.size()) + " emails without a date left out of arrival statistics");

    // Reporters: emails per To: address.
    std::map<std::string, std::size_t> per_reporter;
    for (const auto& e : emails) ++per_reporter[to_lower_ascii(e.to_addr)];
    std::vector<double> counts;
    for (const auto& [addr, c] : per_reporter) counts.push_back(static_cast<double>(c));
    b.reporter_cdf = empirical_cdf(counts);

    // Spoof distance by suspicious flag.
    std::map<std::string, std::vector<double>> spoof;
    std::map<std::string, SpoofCounts> sc;
    for (const auto& e : emails) {
        const std::string g = e.suspicious ? "suspicious" : "non_suspicious";
        const auto d = urlintel::spoof_distance(e.from_domain, opts.org_name);
        spoof[g].push_back(static_cast<double>(d));
        auto& c = sc[g];
        c.group = g;
        if (d <= opts.spoof_threshold) ++c.spoofed;
        else ++c.non_spoofed;
    }
    for (auto& [g, v] : spoof) b.spoof_cdfs[g] = empirical_cdf(v);
    for (auto& [g, c] : sc) b.spoof_counts.push_back(c);

    // Campaign durations by class.
    for (const auto cls : {dedup::DurationClass::SingleDay, dedup::DurationClass::Short, dedup::DurationClass::Long}) {
        DurationRow row;
        row.duration_class = std::string(dedup::to_string(cls));
        std::vector<double> samples, days;
        for (const auto& c : campaigns)
            if (c.duration_class == cls) {
                ++row.campaigns;
                samples.push_back(static_cast<double>(c.samples));
                days.push_back(c.duration_days);
            }
        row.samples = summarize(samples);
        row.duration_days = summarize(days);
        b.campaign_durations.push_back(std::move(row));
    }

    // Trigger distributions.
    for (std::size_t k = 0; k < labels.size(); ++k) {
        std::vector<double> v;
        for (const auto& p : profiles) v.push_back(static_cast<double>(p.trigger_counts.at(k)));
        b.trigger_summary.push_back({labels[k], summarize(v)});
    }
    {
        std::vector<double> len;
        for (const auto& e : emails) len.push_back(static_cast<double>(e.body_length));
        b.trigger_summary.push_back({"Length", summarize(len)});
        std::vector<double> sd;
        for (const auto& [g, v] : spoof) sd.insert(sd.end(), v.begin(), v.end());
        b.trigger_summary.push_back({"SpoofDist", summarize(sd)});
    }
    std::map<std::size_t, std::size_t> vc;
    for (const auto& p : profiles) {
        std::size_t n = 0;
        for (bool present : p.vulns_present) n += present ? 1 : 0;
        ++vc[n];
    }
    b.vuln_count_distribution.assign(vc.begin(), vc.end());

    // Weekly spoof distance across LONG campaigns.
    std::unordered_map<std::string, const corpus::Email*> by_id;
    for (const auto& e : emails) by_id[e.id] = &e;
    std::map<std::int64_t, std::pair<double, std::size_t>> weekly;
    for (const auto& c : campaigns) {
        if (c.duration_class != dedup::DurationClass::Long || !c.first_seen) continue;
        for (const auto& id : c.member_ids) {
            const auto it = by_id.find(id);
            if (it == by_id.end() || !it->second->date) continue;
            const std::int64_t week = (*it->second->date - *c.first_seen) / (7 * kSecondsPerDay);
            auto& acc = weekly[week];
            acc.first += static_cast<double>(urlintel::spoof_distance(it->second->from_domain, opts.org_name));
            ++acc.second;
        }
    }
    if (weekly.size() < 3) {
        b.notes.push_back("weekly spoof-distance trend omitted: fewer than 3 campaign weeks");
    } else {
        WeeklyTrend t;
        std::vector<double> wx, wy;
        for (const auto& [w, acc] : weekly) {
            const double m = acc.first / static_cast<double>(acc.second);
            t.weeks.push_back({w, m, acc.second});
            wx.push_back(static_cast<double>(w));
            wy.push_back(m);
        }
        t.correlation = stats::pearson(wx, wy);
        if (t.correlation) t.p_value = stats::correlation_p_value(*t.correlation, wx.size());
        else b.notes.push_back("weekly spoof-distance trend correlation undefined (constant series)");
        b.weekly_trend = std::move(t);
    }

    // Regressor correlation matrix.
    b.correlation_names = econ::regressor_names();
    const std::size_t R = b.correlation_names.size();
    std::vector<std::vector<double>> cols(R);
    for (const auto& r : design)
        for (std::size_t j = 0; j < R; ++j) cols[j].push_back(r.regressor(b.correlation_names[j]));
    b.correlation.assign(R, std::vector<std::optional<double>>(R));
    for (std::size_t i = 0; i < R; ++i)
        for (std::size_t j = 0; j < R; ++j) b.correlation[i][j] = stats::pearson(cols[i], cols[j]);
    return b;
}

namespace {

std::vector<std::string> summary_fields(const Summary& s) {
    return {std::to_string(s.n), csv::fmt(s.min), csv::fmt(s.q1),     csv::fmt(s.mean),
            csv::fmt(s.median),  csv::fmt(s.q3),  csv::fmt(s.max),    csv::fmt(s.sd)};
}

const std::vector<std::string> kSummaryHeader{"n", "min", "q1", "mean", "median", "q3", "max", "sd"};

std::string opt(const std::optional<double>& v) { return v ? csv::fmt(*v) : "NA"; }

}  // namespace

void write_report(const fs::path& dir, const ReportBundle& b) {
    fs::create_directories(dir);
    {
        csv::Writer w(dir / "arrival_cdf.csv");
        w.row({"timestamp", "date", "cdf"});
        for (const auto& p : b.arrival_cdf)
            w.row({csv::fmt(p.x), format_iso8601(static_cast<Timestamp>(p.x)), csv::fmt(p.cdf)});
    }
    {
        csv::Writer w(dir / "arrivals_by_campaign.csv");
        w.row({"duplicate_id", "email_id", "date"});
        for (const auto& a : b.arrivals) w.row({std::to_string(a.duplicate_id), a.email_id, format_iso8601(a.date)});
    }
    {
        csv::Writer w(dir / "reporter_cdf.csv");
        w.row({"emails_per_reporter", "cdf"});
        for (const auto& p : b.reporter_cdf) w.row({csv::fmt(p.x), csv::fmt(p.cdf)});
    }
    {
        csv::Writer w(dir / "spoof_cdf.csv");
        w.row({"group", "spoof_distance", "cdf"});
        for (const auto& [g, pts] : b.spoof_cdfs)
            for (const auto& p : pts) w.row({g, csv::fmt(p.x), csv::fmt(p.cdf)});
    }
    {
        csv::Writer w(dir / "spoof_counts.csv");
        w.row({"group", "spoofed", "non_spoofed"});
        for (const auto& c : b.spoof_counts) w.row({c.group, std::to_string(c.spoofed), std::to_string(c.non_spoofed)});
    }
    {
        csv::Writer w(dir / "campaign_durations.csv");
        std::vector<std::string> h{"duration_class", "campaigns"};
        for (const auto& k : kSummaryHeader) h.push_back("samples_" + k);
        for (const auto& k : kSummaryHeader) h.push_back("days_" + k);
        w.row(h);
        for (const auto& r : b.campaign_durations) {
            std::vector<std::string> f{r.duration_class, std::to_string(r.campaigns)};
            for (auto& s : summary_fields(r.samples)) f.push_back(std::move(s));
            for (auto& s : summary_fields(r.duration_days)) f.push_back(std::move(s));
            w.row(f);
        }
    }
    {
        csv::Writer w(dir / "trigger_summary.csv");
        std::vector<std::string> h{"variable"};
        h.insert(h.end(), kSummaryHeader.begin(), kSummaryHeader.end());
        w.row(h);
        for (const auto& r : b.trigger_summary) {
            std::vector<std::string> f{r.name};
            for (auto& s : summary_fields(r.stats)) f.push_back(std::move(s));
            w.row(f);
        }
    }
    {
        csv::Writer w(dir / "vuln_count_distribution.csv");
        w.row({"vulnerabilities_present", "emails"});
        for (const auto& [k, n] : b.vuln_count_distribution) w.row({std::to_string(k), std::to_string(n)});
    }
    if (b.weekly_trend) {
        csv::Writer w(dir / "weekly_spoof_trend.csv");
        w.row({"week", "mean_spoof_distance", "emails"});
        for (const auto& p : b.weekly_trend->weeks)
            w.row({std::to_string(p.week), csv::fmt(p.mean_spoof_distance), std::to_string(p.emails)});
    }
    {
        csv::Writer w(dir / "correlation_matrix.csv");
        std::vector<std::string> h{"regressor"};
        h.insert(h.end(), b.correlation_names.begin(), b.correlation_names.end());
        w.row(h);
        for (std::size_t i = 0; i < b.correlation_names.size(); ++i) {
            std::vector<std::string> f{b.correlation_names[i]};
            for (const auto& v : b.correlation[i]) f.push_back(opt(v));
            w.row(f);
        }
    }
    nlohmann::json j{{"notes", b.notes}};
    if (b.weekly_trend) {
        j["weekly_trend"] = {{"weeks", b.weekly_trend->weeks.size()},
                             {"correlation", b.weekly_trend->correlation ? nlohmann::json(*b.weekly_trend->correlation) : nlohmann::json()},
                             {"p_value", b.weekly_trend->p_value ? nlohmann::json(*b.weekly_trend->p_value) : nlohmann::json()}};
    }
    std::ofstream out(dir / "report.json", std::ios::binary);
    if (!out) throw DataError("cannot write " + (dir / "report.json").string());
    out << j.dump(1) << '\n';
}

}  // namespace phishtriage::app
