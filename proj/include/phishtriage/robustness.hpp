#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "phishtriage/corpus.hpp"
#include "phishtriage/llda.hpp"
#include "phishtriage/urlintel.hpp"

namespace phishtriage::app {

/// Delivery, detection, notification and click probabilities for every
/// (email, user) pair. Delivery is p_delivery[e] * user_weight[u], clipped to 1.
struct ClickGenerationModel {
    std::size_t users = 0;
    std::vector<double> p_delivery;   // one entry per email
    std::vector<double> user_weight;  // empty = all 1
    double p_detect = 0.5;
    double p_notify = 0.5;
    double p_click = 0.01;
    std::uint64_t seed = 1;
    std::vector<std::size_t> family;  // group of each email; empty = one group per email

    std::size_t emails() const noexcept { return p_delivery.size(); }
    double delivery(std::size_t e, std::size_t u) const;
    /// UsageError when a probability is outside [0, 1] or sizes disagree.
    void validate() const;
};

struct SimulationResult {
    std::vector<std::size_t> reports;  // per email: users who reported it
    std::vector<std::size_t> clicks;   // per email: users who clicked
    std::size_t reported_events = 0;   // |D|
    std::size_t click_events = 0;      // |C|
    std::size_t reported_clicked = 0;  // |C'|: report events on emails with at least one click
};

/// One uniform per (email, user) pair partitions the outcomes into report,
/// click and neither. Each email uses its own random stream.
SimulationResult simulate_click_generation(const ClickGenerationModel& m);

/// Analytic expectations and binomial variances of |D| and |C|.
double expected_reports(const ClickGenerationModel& m);
double expected_clicks(const ClickGenerationModel& m);
double variance_reports(const ClickGenerationModel& m);
double variance_clicks(const ClickGenerationModel& m);

struct SkewScenario {
    std::size_t families = 50;
    std::size_t emails_per_family = 200;
    std::size_t users = 2000;
    double base_delivery = 0.005;
    double skew_fraction = 0.0;  // share of families with boosted delivery
    double skew_factor = 10.0;
    double p_detect = 0.5;
    double p_notify = 0.5;
    double p_click = 0.01;
    std::uint64_t seed = 1;
};

/// The first round(skew_fraction * families) families get delivery * skew_factor.
ClickGenerationModel skewed_model(const SkewScenario& s);

struct RobustnessRecord {
    std::string email_id;
    std::string group;
    std::size_t reports = 1;
    bool clicked = false;
};

struct GroupRatio {
    std::string group;
    std::size_t emails = 0;
    std::size_t reports = 0;
    std::size_t reports_clicked = 0;
    double ratio = 0.0;
};

struct RobustnessTable {
    std::vector<GroupRatio> groups;
    std::size_t excluded_groups = 0;
    std::size_t excluded_emails = 0;
    std::size_t min_group = 5;
    double mean = 0.0;
    double sd = 0.0;
    std::optional<double> cv;  // absent when the mean ratio is 0
};

/// Ratio of report events on clicked emails to all report events, per group.
/// Groups with fewer than `min_group` emails are excluded and counted.
RobustnessTable robustness_ratio(std::span<const RobustnessRecord> records, std::size_t min_group = 5);

enum class Grouping { Family, Signature };
Grouping parse_grouping(std::string_view s);

/// Set of present vulnerabilities, e.g. "Authority+Scarcity" or "none".
std::string signature(const llda::CognitiveProfile& p, const std::vector<std::string>& labels);

/// One record per reported suspicious email. Family grouping needs a
/// duplicate_id; signature grouping needs a profile.
std::vector<RobustnessRecord> robustness_records(std::span<const corpus::Email> emails,
                                                 std::span<const llda::CognitiveProfile> profiles,
                                                 const std::vector<std::string>& labels,
                                                 std::span<const urlintel::EmailClicks> clicks,
                                                 Grouping grouping);

/// One record per simulated email, weighted by its report count.
std::vector<RobustnessRecord> simulated_records(const ClickGenerationModel& m, const SimulationResult& r);

nlohmann::json to_json(const RobustnessTable& t);
void write_robustness_csv(const std::filesystem::path& path, const RobustnessTable& t);

}  // namespace phishtriage::app
