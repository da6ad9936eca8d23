#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "phishtriage/corpus.hpp"
#include "phishtriage/dedup.hpp"
#include "phishtriage/econometrics.hpp"
#include "phishtriage/llda.hpp"

namespace phishtriage::app {

struct CdfPoint {
    double x = 0.0;
    double cdf = 0.0;
};

/// Empirical CDF at each distinct value: fraction of observations <= x.
std::vector<CdfPoint> empirical_cdf(std::vector<double> values);

struct Summary {
    std::size_t n = 0;
    double min = 0, q1 = 0, mean = 0, median = 0, q3 = 0, max = 0, sd = 0;
};
Summary summarize(std::vector<double> values);

struct DurationRow {
    std::string duration_class;
    std::size_t campaigns = 0;
    Summary samples;
    Summary duration_days;
};

struct SpoofCounts {
    std::string group;  // "suspicious" or "non_suspicious"
    std::size_t spoofed = 0;
    std::size_t non_spoofed = 0;
};

struct WeeklyPoint {
    std::int64_t week = 0;
    double mean_spoof_distance = 0.0;
    std::size_t emails = 0;
};

struct WeeklyTrend {
    std::vector<WeeklyPoint> weeks;
    std::optional<double> correlation;
    std::optional<double> p_value;
};

struct TriggerSummaryRow {
    std::string name;
    Summary stats;
};

struct ReportBundle {
    std::vector<CdfPoint> arrival_cdf;  // x = unix seconds
    struct Arrival {
        std::int64_t duplicate_id;
        std::string email_id;
        Timestamp date;
    };
    std::vector<Arrival> arrivals;
    std::vector<CdfPoint> reporter_cdf;  // x = emails per To: address
    std::map<std::string, std::vector<CdfPoint>> spoof_cdfs;
    std::vector<SpoofCounts> spoof_counts;
    std::vector<DurationRow> campaign_durations;
    std::vector<TriggerSummaryRow> trigger_summary;
    std::vector<std::pair<std::size_t, std::size_t>> vuln_count_distribution;  // (count, emails)
    std::optional<WeeklyTrend> weekly_trend;
    std::vector<std::string> correlation_names;
    std::vector<std::vector<std::optional<double>>> correlation;
    std::vector<std::string> notes;
};

struct ReportOptions {
    std::string org_name = "org";
    std::size_t spoof_threshold = 3;  // distance <= threshold counts as spoofed
};

/// `design` is the fitting cohort used for the regressor correlation matrix.
ReportBundle report_stats(std::span<const corpus::Email> emails,
                          std::span<const dedup::CampaignCluster> campaigns,
                          std::span<const llda::CognitiveProfile> profiles,
                          const std::vector<std::string>& labels,
                          std::span<const econ::DesignRow> design, const ReportOptions& opts);

/// Plot-ready CSV files plus report.json in `dir`.
void write_report(const std::filesystem::path& dir, const ReportBundle& b);

}  // namespace phishtriage::app
