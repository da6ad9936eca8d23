#include <doctest.h>

#include <cmath>
#include <fstream>

#include <nlohmann/json.hpp>

#include "phishtriage/config.hpp"
#include "phishtriage/pipeline.hpp"
#include "phishtriage/report.hpp"
#include "phishtriage/robustness.hpp"
#include "phishtriage/synth.hpp"
#include "support.hpp"

using namespace phishtriage;
using namespace phishtriage::app;
using nlohmann::json;
using testsupport::Gen;
namespace fs = std::filesystem;

namespace {

std::string slurp_dir(const fs::path& dir) {
    std::vector<fs::path> files;
    for (const auto& e : fs::recursive_directory_iterator(dir))
        if (e.is_regular_file()) files.push_back(e.path());
    std::sort(files.begin(), files.end());
    std::string out;
    for (const auto& f : files) out += fs::relative(f, dir).string() + "\n" + testsupport::read_text(f);
    return out;
}

// Synthesize a small corpus and shrink the generated config so the pipeline runs quickly.
fs::path small_world(const fs::path& dir, std::size_t emails, std::uint64_t seed, double suspicious = 0.9) {
    SynthSpec s;
    s.emails = emails;
    s.seed = seed;
    s.suspicious_fraction = suspicious;
    s.llda_labeled = 60;
    s.dedup_labeled = 80;
    synth_corpus(s, dir);
    auto kv = KeyValueFile::load(dir / "pipeline.conf");
    kv.set("bootstrap.B", "200");
    kv.set("predict.draws", "2000");
    kv.set("llda.iterations", "50");
    kv.set("dedup.bootstrap_n", "200");
    kv.set("dedup.sample_size", "40");
    std::ofstream(dir / "pipeline.conf", std::ios::binary) << kv.serialize();
    return dir / "pipeline.conf";
}

ReportBundle report_for(const std::vector<corpus::Email>& emails, const std::vector<econ::DesignRow>& design = {}) {
    const auto cs = dedup::campaigns(emails);
    return report_stats(emails, cs, {}, llda::default_labels(), design, ReportOptions{"acmebank", 3});
}

}  // namespace

TEST_CASE("empirical cdf is monotone and ends at one") {
    const auto bad = testsupport::for_all(300, 51, [](Gen& g) {
        std::vector<double> v(1 + g.index(40));
        for (auto& x : v) x = static_cast<double>(g.integer(0, 9));
        const auto c = empirical_cdf(v);
        for (std::size_t i = 0; i + 1 < c.size(); ++i)
            if (!(c[i].x < c[i + 1].x && c[i].cdf <= c[i + 1].cdf)) return false;
        // Count-based oracle at each point.
        for (const auto& p : c) {
            const auto k = std::count_if(v.begin(), v.end(), [&](double x) { return x <= p.x; });
            if (std::abs(p.cdf - static_cast<double>(k) / static_cast<double>(v.size())) > 1e-12) return false;
        }
        return c.back().cdf == 1.0;
    });
    CHECK(bad == SIZE_MAX);
    CHECK(empirical_cdf({}).empty());
}

TEST_CASE("report: one reporter per email jumps to one at x = 1") {
    std::vector<corpus::Email> es;
    for (int i = 0; i < 6; ++i) {
        auto e = corpus::make_email("e" + std::to_string(i), "x@acrnebank.com", "u" + std::to_string(i) + "@acmebank.com",
                                    1000 * i, "s", "b");
        e.duplicate_id = i;
        es.push_back(e);
    }
    const auto b = report_for(es);
    REQUIRE(b.reporter_cdf.size() == 1);
    CHECK(b.reporter_cdf[0].x == 1.0);
    CHECK(b.reporter_cdf[0].cdf == 1.0);
    CHECK(b.arrival_cdf.back().cdf == 1.0);
    // Fewer than three campaign weeks: trend omitted with a note.
    CHECK_FALSE(b.weekly_trend.has_value());
    CHECK(std::any_of(b.notes.begin(), b.notes.end(),
                      [](const std::string& n) { return n.find("weekly") != std::string::npos; }));
}

TEST_CASE("report: constant spoof distance has no correlation") {
    std::vector<econ::DesignRow> design;
    for (int i = 0; i < 10; ++i) {
        econ::DesignRow r;
        r.email_id = "e" + std::to_string(i);
        r.spoof_dist = 4.0;
        r.triggers = {double(i), double(i % 3), 1.0 + i * i, 2.0, double(10 - i), double(i % 2)};
        design.push_back(r);
    }
    std::vector<corpus::Email> es{corpus::make_email("e0", "a@b.com", "c@d.com", 0, "s", "b")};
    es[0].duplicate_id = 0;
    const auto b = report_for(es, design);
    const auto& names = b.correlation_names;
    const auto spoof = std::find(names.begin(), names.end(), "SpoofDist") - names.begin();
    REQUIRE(static_cast<std::size_t>(spoof) < names.size());
    for (std::size_t j = 0; j < names.size(); ++j) CHECK_FALSE(b.correlation[spoof][j].has_value());
    const auto rec = std::find(names.begin(), names.end(), "Reciprocity") - names.begin();
    REQUIRE(b.correlation[rec][rec].has_value());
    CHECK(*b.correlation[rec][rec] == doctest::Approx(1.0));
}

TEST_CASE("report: a long campaign gives a weekly spoof trend") {
    std::vector<corpus::Email> es;
    const char* froms[] = {"a@acmebank.com", "a@acmebamk.com", "a@acnebamk.com", "a@xcnebamk.com", "a@xxnebamk.com"};
    for (int w = 0; w < 20; ++w) {
        auto e = corpus::make_email("e" + std::to_string(w), froms[w / 4], "u@acmebank.com",
                                    static_cast<Timestamp>(w) * 7 * kSecondsPerDay, "s", "b");
        e.duplicate_id = 0;
        es.push_back(e);
    }
    const auto b = report_for(es);
    REQUIRE(b.weekly_trend.has_value());
    CHECK(b.weekly_trend->weeks.size() == 20);
    REQUIRE(b.weekly_trend->correlation.has_value());
    CHECK(*b.weekly_trend->correlation > 0.9);
    CHECK(*b.weekly_trend->p_value < 0.001);
}

TEST_CASE("robustness ratio: bounds, group sums and exclusion") {
    const auto bad = testsupport::for_all(200, 53, [](Gen& g) {
        std::vector<RobustnessRecord> recs;
        const std::size_t n = g.index(80);
        for (std::size_t i = 0; i < n; ++i)
            recs.push_back({"e" + std::to_string(i), "g" + std::to_string(g.index(8)), 1 + g.index(4), g.coin()});
        const std::size_t min_group = 1 + g.index(6);
        const auto t = robustness_ratio(recs, min_group);
        std::size_t kept = 0;
        for (const auto& grp : t.groups) {
            if (grp.ratio < 0.0 || grp.ratio > 1.0 || grp.emails < min_group) return false;
            std::size_t rep = 0, rc = 0, em = 0;
            for (const auto& r : recs)
                if (r.group == grp.group) {
                    ++em;
                    rep += r.reports;
                    if (r.clicked) rc += r.reports;
                }
            if (rep != grp.reports || rc != grp.reports_clicked || em != grp.emails) return false;
            kept += grp.emails;
        }
        return kept + t.excluded_emails == n;
    });
    CHECK(bad == SIZE_MAX);

    const std::vector<RobustnessRecord> none{{"a", "g", 2, false}, {"b", "g", 1, false}};
    const auto t = robustness_ratio(none, 1);
    REQUIRE(t.groups.size() == 1);
    CHECK(t.groups[0].ratio == 0.0);
    CHECK_FALSE(t.cv.has_value());
}

TEST_CASE("click generation: degenerate probabilities") {
    ClickGenerationModel m;
    m.users = 50;
    m.p_delivery.assign(20, 0.0);
    auto r = simulate_click_generation(m);
    CHECK(r.reported_events == 0);
    CHECK(r.click_events == 0);
    CHECK(simulated_records(m, r).empty());

    m.p_delivery.assign(20, 1.0);
    m.p_detect = 1.0;
    m.p_notify = 1.0;
    r = simulate_click_generation(m);
    CHECK(r.reported_events == 20 * 50);
    CHECK(r.click_events == 0);
    CHECK(r.reported_clicked == 0);

    m.p_detect = 1.5;
    CHECK_THROWS_AS(simulate_click_generation(m), UsageError);
}

TEST_CASE("click generation: report count matches its expectation") {
    SkewScenario s;
    s.families = 5;
    s.emails_per_family = 20;
    s.users = 300;
    s.base_delivery = 0.02;
    s.skew_fraction = 0.4;
    double sum = 0.0;
    const int runs = 100;
    for (int i = 0; i < runs; ++i) {
        s.seed = 1000 + i;
        sum += static_cast<double>(simulate_click_generation(skewed_model(s)).reported_events);
    }
    const auto m = skewed_model(s);
    // Independent expectation: 2 skewed families at 0.2, 3 at 0.02, each pair reports with 0.25.
    const double expect = 20.0 * 300.0 * 0.25 * (2 * 0.2 + 3 * 0.02);
    CHECK(expected_reports(m) == doctest::Approx(expect));
    CHECK(std::abs(sum / runs - expect) <= 3.0 * std::sqrt(variance_reports(m)) / std::sqrt(double(runs)));
}

TEST_CASE("click generation: skewed delivery spreads the ratio more than uniform delivery") {
    auto cv_for = [](double skew, std::uint64_t seed) {
        SkewScenario s;
        s.families = 30;
        s.emails_per_family = 60;
        s.users = 1000;
        s.skew_fraction = skew;
        s.seed = seed;
        const auto m = skewed_model(s);
        const auto r = simulate_click_generation(m);
        const auto t = robustness_ratio(simulated_records(m, r), 5);
        return t.cv.value_or(0.0);
    };
    double u = 0.0, k = 0.0;
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        u += cv_for(0.0, seed);
        k += cv_for(0.1, seed);
    }
    CHECK(k > u);
}

TEST_CASE("signature names list present vulnerabilities") {
    llda::CognitiveProfile p;
    p.vulns_present = {false, false, true, false, false, true};
    CHECK(signature(p, llda::default_labels()) == "SocialProof+Scarcity");
    p.vulns_present.assign(6, false);
    CHECK(signature(p, llda::default_labels()) == "none");
    CHECK_THROWS_AS(parse_grouping("x"), UsageError);
}

TEST_CASE("synthetic corpus: ground truth carries the configured coefficients") {
    testsupport::TempDir a("synth_a"), b("synth_b");
    auto kv = KeyValueFile::parse("emails = 1200\nseed = 9\nbeta.Scarcity = 0.05\nalpha = 3.5\nmedian.Authority = 7\n");
    const auto spec = synth_spec_from(kv);
    CHECK(spec.beta[5] == 0.05);
    CHECK(spec.triggers[3].median == 7.0);
    synth_corpus(spec, a.path());
    synth_corpus(spec, b.path());
    CHECK(slurp_dir(a.path()) == slurp_dir(b.path()));

    const auto gt = json::parse(testsupport::read_text(a / "ground_truth.json"));
    CHECK(gt["spec"]["beta"]["Scarcity"].get<double>() == 0.05);
    CHECK(gt["spec"]["alpha"].get<double>() == 3.5);

    // Features are drawn per family; with zero_prob below one half the median
    // template count is the configured median.
    std::vector<double> auth;
    for (const auto& f : gt["families"]) auth.push_back(f["template_triggers"][3].get<double>());
    REQUIRE(auth.size() >= 100);
    CHECK(std::abs(stats::quantile(auth, 0.5) - 7.0) <= 1.5);

    // Rate is exp(alpha + beta . x) with the stored features.
    const auto& labels = llda::default_labels();
    for (const auto& e : gt["emails"]) {
        if (e["kind"] != "family") continue;
        double eta = 3.5 + spec.beta_spoof * e["spoof_distance"].get<double>();
        for (std::size_t k = 0; k < labels.size(); ++k) eta += spec.beta[k] * e["triggers"][labels[k]].get<double>();
        CHECK(e["rate"].get<double>() == doctest::Approx(std::exp(eta)).epsilon(1e-9));
        break;
    }
    CHECK_THROWS_AS(synth_spec_from(KeyValueFile::parse("unknown_key = 1\n")), UsageError);
}

TEST_CASE("synthetic corpus: trigger correlations near their targets") {
    testsupport::TempDir dir("synth_corr");
    SynthSpec s;
    s.emails = 3000;
    s.seed = 21;
    synth_corpus(s, dir.path());
    const auto gt = json::parse(testsupport::read_text(dir / "ground_truth.json"));
    std::vector<double> sc, sp, li, sd;
    for (const auto& f : gt["families"]) {
        const auto& t = f["template_triggers"];
        sp.push_back(t[2].get<double>());
        li.push_back(t[4].get<double>());
        sc.push_back(t[5].get<double>());
        sd.push_back(f["template_spoof_distance"].get<double>());
    }
    REQUIRE(sc.size() >= 300);
    const auto r1 = stats::pearson(sc, sp), r2 = stats::pearson(li, sd);
    REQUIRE(r1.has_value());
    REQUIRE(r2.has_value());
    CHECK(std::abs(*r1 - 0.50) <= 0.15);
    CHECK(std::abs(*r2 - 0.57) <= 0.15);
}

TEST_CASE("pipeline: end-to-end run is reproducible and writes a manifest") {
    testsupport::TempDir world("pipe_world"), out1("pipe_out1"), out2("pipe_out2");
    const auto cfg_path = small_world(world.path(), 300, 5);
    const auto cfg = load_pipeline_config(cfg_path);
    const auto r1 = run_pipeline(cfg, world / "messages.jsonl", out1.path());
    const auto r2 = run_pipeline(cfg, world / "messages.jsonl", out2.path());
    CHECK(r1.manifest["status"] == "ok");
    CHECK(r1.manifest["stages"].size() == std::size(kPipelineStages));
    CHECK_FALSE(r1.queue.empty());
    for (std::size_t i = 0; i + 1 < r1.queue.size(); ++i)
        CHECK(r1.queue[i].predicted_clicks_q50 >= r1.queue[i + 1].predicted_clicks_q50);
    CHECK(slurp_dir(out1.path()) == slurp_dir(out2.path()));
    // Every recorded digest matches the file on disk.
    for (const auto& st : r1.manifest["stages"])
        for (const auto& a : st["artifacts"])
            CHECK(sha256_file(out1 / a["file"].get<std::string>()) == a["sha256"].get<std::string>());
}

TEST_CASE("pipeline: a corpus without suspicious emails yields an empty queue") {
    testsupport::TempDir world("pipe_clean"), out("pipe_clean_out");
    const auto cfg_path = small_world(world.path(), 150, 6, 0.0);
    const auto r = run_pipeline(load_pipeline_config(cfg_path), world / "messages.jsonl", out.path());
    CHECK(r.queue.empty());
    CHECK(fs::exists(out / "queue.csv"));
    CHECK(fs::exists(out / "report" / "report.json"));
}

TEST_CASE("pipeline: a corrupt click file fails the url stage and marks the manifest") {
    testsupport::TempDir world("pipe_bad"), out("pipe_bad_out");
    const auto cfg_path = small_world(world.path(), 150, 7);
    testsupport::write_text(world / "clicks.csv", "landing_url,clicks,observed_at\nhttp://x/,many,0\n");
    const auto cfg = load_pipeline_config(cfg_path);
    try {
        run_pipeline(cfg, world / "messages.jsonl", out.path());
        FAIL("expected a stage error");
    } catch (const StageError& e) {
        CHECK(e.stage() == "urlintel");
    }
    const auto mf = json::parse(testsupport::read_text(out / "manifest.json"));
    CHECK(mf["status"] == "failed");
    CHECK(mf["stages"].back()["stage"] == "urlintel");
    CHECK(mf["stages"].back()["status"] == "failed");
    CHECK(fs::exists(out / "sanitized.jsonl"));
}

TEST_CASE("cli exit codes") {
    testsupport::TempDir dir("cli");
    CHECK(testsupport::run_triage("") == 1);
    CHECK(testsupport::run_triage("no-such-command") == 1);
    CHECK(testsupport::run_triage("fit --design") == 1);
    testsupport::write_text(dir / "bad.csv", "not,a,design\n1,2,3\n");
    CHECK(testsupport::run_triage("fit --design " + (dir / "bad.csv").string() + " --out " +
                                  (dir / "f.json").string()) == 2);
    CHECK(testsupport::run_triage("synth --emails 60 --seed 3 --out-dir " + (dir / "w").string()) == 0);
    auto kv = KeyValueFile::load(dir / "w" / "pipeline.conf");
    testsupport::write_text(dir / "w" / "clicks.csv", "garbage\n");
    kv.set("llda.iterations", "20");
    kv.set("dedup.bootstrap_n", "50");
    kv.set("dedup.sample_size", "20");
    testsupport::write_text(dir / "w" / "pipeline.conf", kv.serialize());
    CHECK(testsupport::run_triage("run --config " + (dir / "w" / "pipeline.conf").string() + " --input " +
                                  (dir / "w" / "messages.jsonl").string() + " --out-dir " +
                                  (dir / "out").string()) == 3);
}

TEST_CASE("shipped data files load") {
    const fs::path data(DATA_DIR);
    const auto lex = corpus::LabelLexicon::load(data / "lexicon.txt");
    CHECK(lex.months.at("maart") == 3);
    CHECK(lex.months.at("diciembre") == 12);
    CHECK(corpus::parse_date("5 maart 2018 10:00", lex) == parse_iso8601("2018-03-05T10:00:00Z"));
    const auto nl = textproc::load_word_list(data / "stopwords" / "nl.txt");
    CHECK(nl.count("het") == 1);
    CHECK(nl.size() >= 90);
    const auto spec = synth_spec_from(KeyValueFile::load(data / "synth.spec"));
    CHECK(spec.emails == 2000);
    CHECK(spec.beta_spoof == -0.09);
}
