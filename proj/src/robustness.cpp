#include "phishtriage/robustness.hpp"

#include <algorithm>
#include <cmath>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "phishtriage/csv.hpp"
#include "phishtriage/parallel.hpp"

namespace phishtriage::app {

namespace {

void check_prob(double p, const char* what) {
    if (!(p >= 0.0 && p <= 1.0)) throw UsageError(std::string(what) + " must be in [0, 1]");
}

}  // namespace

double ClickGenerationModel::delivery(std::size_t e, std::size_t u) const {
    const double w = user_weight.empty() ? 1.0 : user_weight[u];
    return std::min(1.0, p_delivery[e] * w);
}

void ClickGenerationModel::validate() const {
    for (double p : p_delivery) check_prob(p, "p_delivery");
    for (double w : user_weight)
        if (!(w >= 0.0)) throw UsageError("user weights must be non-negative");
    if (!user_weight.empty() && user_weight.size() != users)
        throw UsageError("user_weight needs one entry per user");
    if (!family.empty() && family.size() != p_delivery.size())
        throw UsageError("family needs one entry per email");
    check_prob(p_detect, "p_detect");
    check_prob(p_notify, "p_notify");
    check_prob(p_click, "p_click");
}

SimulationResult simulate_click_generation(const ClickGenerationModel& m) {
    m.validate();
    const std::size_t E = m.emails();
    SimulationResult r;
    r.reports.assign(E, 0);
    r.clicks.assign(E, 0);
    const double det_notify = m.p_detect * m.p_notify;
    const double und_click = (1.0 - m.p_detect) * m.p_click;
    parallel_for(E, [&](std::size_t e) {
        auto rng = make_rng(m.seed, e);
        std::size_t rep = 0, clk = 0;
        for (std::size_t u = 0; u < m.users; ++u) {
            const double pd = m.delivery(e, u);
            const double x = uniform01(rng);
            if (x < pd * det_notify) ++rep;
            else if (x < pd * (det_notify + und_click)) ++clk;
        }
        r.reports[e] = rep;
        r.clicks[e] = clk;
    });
    for (std::size_t e = 0; e < E; ++e) {
        r.reported_events += r.reports[e];
        r.click_events += r.clicks[e];
        if (r.clicks[e] > 0) r.reported_clicked += r.reports[e];
    }
    return r;
}

namespace {

template <class F>
double sum_pairs(const ClickGenerationModel& m, F f) {
    double s = 0.0;
    for (std::size_t e = 0; e < m.emails(); ++e)
        for (std::size_t u = 0; u < m.users; ++u) s += f(m.delivery(e, u));
    return s;
}

}  // namespace

double expected_reports(const ClickGenerationModel& m) {
    const double q = m.p_detect * m.p_notify;
    return sum_pairs(m, [q](double pd) { return pd * q; });
}

double expected_clicks(const ClickGenerationModel& m) {
    const double q = (1.0 - m.p_detect) * m.p_click;
    return sum_pairs(m, [q](double pd) { return pd * q; });
}

double variance_reports(const ClickGenerationModel& m) {
    const double q = m.p_detect * m.p_notify;
    return sum_pairs(m, [q](double pd) { return pd * q * (1.0 - pd * q); });
}

double variance_clicks(const ClickGenerationModel& m) {
    const double q = (1.0 - m.p_detect) * m.p_click;
    return sum_pairs(m, [q](double pd) { return pd * q * (1.0 - pd * q); });
}

ClickGenerationModel skewed_model(const SkewScenario& s) {
    if (s.families == 0 || s.emails_per_family == 0) throw UsageError("scenario needs families and emails");
    if (s.skew_fraction < 0.0 || s.skew_fraction > 1.0) throw UsageError("skew_fraction must be in [0, 1]");
    ClickGenerationModel m;
    m.users = s.users;
    m.p_detect = s.p_detect;
    m.p_notify = s.p_notify;
    m.p_click = s.p_click;
    m.seed = s.seed;
    const auto skewed = static_cast<std::size_t>(round_half_up(s.skew_fraction * static_cast<double>(s.families)));
    for (std::size_t f = 0; f < s.families; ++f) {
        const double p = std::min(1.0, s.base_delivery * (f < skewed ? s.skew_factor : 1.0));
        for (std::size_t i = 0; i < s.emails_per_family; ++i) {
            m.p_delivery.push_back(p);
            m.family.push_back(f);
        }
    }
    m.validate();
    return m;
}

RobustnessTable robustness_ratio(std::span<const RobustnessRecord> records, std::size_t min_group) {
    RobustnessTable t;
    t.min_group = min_group;
    std::map<std::string, GroupRatio> groups;
    for (const auto& r : records) {
        auto& g = groups[r.group];
        g.group = r.group;
        ++g.emails;
        g.reports += r.reports;
        if (r.clicked) g.reports_clicked += r.reports;
    }
    std::vector<double> ratios;
    for (auto& [name, g] : groups) {
        if (g.emails < min_group) {
            ++t.excluded_groups;
            t.excluded_emails += g.emails;
            continue;
        }
        g.ratio = g.reports == 0 ? 0.0 : static_cast<double>(g.reports_clicked) / static_cast<double>(g.reports);
        ratios.push_back(g.ratio);
        t.groups.push_back(g);
    }
    t.mean = stats::mean(ratios);
    t.sd = stats::sd(ratios);
    if (!ratios.empty() && t.mean > 0.0) t.cv = t.sd / t.mean;
    return t;
}

Grouping parse_grouping(std::string_view s) {
    if (s == "family") return Grouping::Family;
    if (s == "signature") return Grouping::Signature;
    throw UsageError("grouping must be 'family' or 'signature'");
}

std::string signature(const llda::CognitiveProfile& p, const std::vector<std::string>& labels) {
    std::string out;
    for (std::size_t k = 0; k < labels.size() && k < p.vulns_present.size(); ++k)
        if (p.vulns_present[k]) out += (out.empty() ? "" : "+") + labels[k];
    return out.empty() ? "none" : out;
}

std::vector<RobustnessRecord> robustness_records(std::span<const corpus::Email> emails,
                                                 std::span<const llda::CognitiveProfile> profiles,
                                                 const std::vector<std::string>& labels,
                                                 std::span<const urlintel::EmailClicks> clicks,
                                                 Grouping grouping) {
    std::unordered_map<std::string, const llda::CognitiveProfile*> prof;
    for (const auto& p : profiles) prof[p.email_id] = &p;
    std::unordered_map<std::string, bool> clicked;
    for (const auto& c : clicks) clicked[c.email_id] = c.clicks_sum > 0;

    std::vector<RobustnessRecord> out;
    for (const auto& e : emails) {
        if (!e.suspicious) continue;
        RobustnessRecord r;
        r.email_id = e.id;
        if (grouping == Grouping::Family) {
            if (!e.duplicate_id) throw DataError("email " + e.id + " has no duplicate_id");
            r.group = "family-" + std::to_string(*e.duplicate_id);
        } else {
            const auto it = prof.find(e.id);
            if (it == prof.end()) throw DataError("email " + e.id + " has no cognitive profile");
            r.group = signature(*it->second, labels);
        }
        const auto c = clicked.find(e.id);
        r.clicked = c != clicked.end() && c->second;
        out.push_back(std::move(r));
    }
    return out;
}

std::vector<RobustnessRecord> simulated_records(const ClickGenerationModel& m, const SimulationResult& r) {
    std::vector<RobustnessRecord> out;
    for (std::size_t e = 0; e < m.emails(); ++e) {
        if (r.reports[e] == 0) continue;  // never reported, so never observed
        const std::size_t f = m.family.empty() ? e : m.family[e];
        out.push_back({"sim-" + std::to_string(e), "family-" + std::to_string(f), r.reports[e], r.clicks[e] > 0});
    }
    return out;
}

nlohmann::json to_json(const RobustnessTable& t) {
    nlohmann::json groups = nlohmann::json::array();
    for (const auto& g : t.groups)
        groups.push_back({{"group", g.group},
                          {"emails", g.emails},
                          {"reports", g.reports},
                          {"reports_clicked", g.reports_clicked},
                          {"ratio", g.ratio}});
    return {{"groups", groups},
            {"excluded_groups", t.excluded_groups},
            {"excluded_emails", t.excluded_emails},
            {"min_group", t.min_group},
            {"mean", t.mean},
            {"sd", t.sd},
            {"cv", t.cv ? nlohmann::json(*t.cv) : nlohmann::json()}};
}

void write_robustness_csv(const std::filesystem::path& path, const RobustnessTable& t) {
    csv::Writer w(path);
    w.row({"group", "emails", "reports", "reports_clicked", "ratio"});
    for (const auto& g : t.groups)
        w.row({g.group, std::to_string(g.emails), std::to_string(g.reports), std::to_string(g.reports_clicked),
               csv::fmt(g.ratio)});
}

}  // namespace phishtriage::app
