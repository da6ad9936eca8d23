#include <cstdlib>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "phishtriage/config.hpp"
#include "phishtriage/corpus.hpp"
#include "phishtriage/dedup.hpp"
#include "phishtriage/econometrics.hpp"
#include "phishtriage/llda.hpp"
#include "phishtriage/parallel.hpp"
#include "phishtriage/pipeline.hpp"
#include "phishtriage/report.hpp"
#include "phishtriage/robustness.hpp"
#include "phishtriage/synth.hpp"
#include "phishtriage/urlintel.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace phishtriage;

namespace {

void write_json(const fs::path& path, const json& j) {
    if (path.empty() || path == "-") {
        std::cout << j.dump(1) << '\n';
        return;
    }
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(1) << '\n';
}

json read_json(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    try {
        return json::parse(in);
    } catch (const json::exception& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

textproc::TokenizerConfig tokenizer(const std::string& stopwords, const std::string& stemmer) {
    auto cfg = textproc::TokenizerConfig::english();
    if (!stopwords.empty()) cfg.stopwords = textproc::load_word_list(stopwords);
    if (stemmer != "porter" && stemmer != "none") throw UsageError("--stemmer must be 'porter' or 'none'");
    cfg.stemmer = stemmer;
    return cfg;
}

std::set<std::string> domain_set(const std::vector<std::string>& v) {
    std::set<std::string> out;
    for (const auto& d : v) out.insert(to_lower_ascii(d));
    return out;
}

struct TokenizerFlags {
    std::string stopwords;
    std::string stemmer = "porter";
    void add(CLI::App* c) {
        c->add_option("--stopwords", stopwords, "Stopword list (one per line)")->check(CLI::ExistingFile);
        c->add_option("--stemmer", stemmer, "porter or none");
    }
    textproc::TokenizerConfig get() const { return tokenizer(stopwords, stemmer); }
};

struct LldaFlags {
    llda::LldaConfig cfg;
    std::optional<std::size_t> burn_in;
    void add(CLI::App* c) {
        c->add_option("--alpha", cfg.alpha, "Dirichlet prior on label proportions");
        c->add_option("--beta", cfg.beta, "Dirichlet prior on label-word distributions");
        c->add_option("--iterations", cfg.n_iterations, "Gibbs sweeps");
        c->add_option("--burn-in", burn_in, "Burn-in sweeps (default 90% of iterations)");
        c->add_option("--average-sweeps", cfg.average_sweeps, "Inference sweeps averaged for label probabilities");
        c->add_option("--seed", cfg.seed, "Sampler seed")->required();
    }
    llda::LldaConfig get() const {
        auto c = cfg;
        c.burn_in = burn_in ? *burn_in : c.n_iterations * 9 / 10;
        c.validate();
        return c;
    }
};

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Phishing report triage: ingest, deduplicate, classify, resolve, model and rank reported emails"};
    app.require_subcommand(1);
    unsigned workers = 0;
    app.add_option("--workers", workers, "Worker threads (0 = hardware concurrency)");

    // ingest
    auto* c_ingest = app.add_subcommand("ingest", "Read raw messages and recover the original headers");
    fs::path ingest_in, ingest_out, ingest_lexicon, ingest_warn;
    std::string ingest_format = "jsonl";
    c_ingest->add_option("--input", ingest_in, "Input file or .eml directory")->required();
    c_ingest->add_option("--format", ingest_format, "eml, mbox or jsonl");
    c_ingest->add_option("--lexicon", ingest_lexicon, "Header label lexicon")->check(CLI::ExistingFile);
    c_ingest->add_option("--out", ingest_out, "Corpus JSONL")->required();
    c_ingest->add_option("--warnings", ingest_warn, "Write warnings here");

    // sanitize
    auto* c_san = app.add_subcommand("sanitize", "Drop SMS-like and other-organization reports");
    fs::path san_in, san_out, san_report, san_comp;
    std::string san_org;
    std::size_t san_sms = 200;
    c_san->add_option("--in", san_in, "Corpus JSONL")->required()->check(CLI::ExistingFile);
    c_san->add_option("--org", san_org, "Organization name")->required();
    c_san->add_option("--competitors", san_comp, "Competitor names, one per line")->check(CLI::ExistingFile);
    c_san->add_option("--sms-max-length", san_sms, "SMS-like body length bound");
    c_san->add_option("--out", san_out, "Sanitized corpus JSONL")->required();
    c_san->add_option("--report", san_report, "Sanitization counts JSON");

    // tune-threshold
    auto* c_tune = app.add_subcommand("tune-threshold", "Bootstrap-tune the cosine duplicate threshold");
    fs::path tune_in, tune_labels, tune_out;
    std::size_t tune_B = 10000, tune_S = 300;
    std::uint64_t tune_seed = 0;
    TokenizerFlags tune_tok;
    c_tune->add_option("--in", tune_in, "Corpus JSONL")->required()->check(CLI::ExistingFile);
    c_tune->add_option("--labels", tune_labels, "CSV with email_id, similarity_group_id")->required()->check(CLI::ExistingFile);
    c_tune->add_option("--bootstrap-n", tune_B, "Bootstrap replicates");
    c_tune->add_option("--sample-size", tune_S, "Emails per replicate");
    c_tune->add_option("--seed", tune_seed, "Bootstrap seed")->required();
    c_tune->add_option("--out", tune_out, "Tuning result JSON")->required();
    tune_tok.add(c_tune);

    // dedup
    auto* c_dedup = app.add_subcommand("dedup", "Assign duplicate ids and summarize campaigns");
    fs::path dedup_in, dedup_out, dedup_camp, dedup_tuning;
    std::optional<double> dedup_threshold;
    TokenizerFlags dedup_tok;
    c_dedup->add_option("--in", dedup_in, "Corpus JSONL")->required()->check(CLI::ExistingFile);
    auto* o_thr = c_dedup->add_option("--threshold", dedup_threshold, "Cosine threshold");
    c_dedup->add_option("--tuning", dedup_tuning, "Use chosen_threshold from a tuning JSON")->excludes(o_thr)->check(CLI::ExistingFile);
    c_dedup->add_option("--out", dedup_out, "Corpus JSONL with duplicate_id")->required();
    c_dedup->add_option("--campaigns", dedup_camp, "Campaign CSV");
    dedup_tok.add(c_dedup);

    // train
    auto* c_train = app.add_subcommand("train", "Train the labeled topic model");
    fs::path train_in, train_labels, train_out;
    LldaFlags train_flags;
    TokenizerFlags train_tok;
    c_train->add_option("--in", train_in, "Corpus JSONL")->required()->check(CLI::ExistingFile);
    c_train->add_option("--labels", train_labels, "Label JSONL (email_id, labels)")->required()->check(CLI::ExistingFile);
    c_train->add_option("--out", train_out, "Model JSON")->required();
    train_flags.add(c_train);
    train_tok.add(c_train);

    // classify
    auto* c_cls = app.add_subcommand("classify", "Infer cognitive profiles");
    fs::path cls_in, cls_model, cls_out;
    double cls_margin = llda::kDefaultPresenceMargin;
    TokenizerFlags cls_tok;
    c_cls->add_option("--in", cls_in, "Corpus JSONL")->required()->check(CLI::ExistingFile);
    c_cls->add_option("--model", cls_model, "Model JSON")->required()->check(CLI::ExistingFile);
    c_cls->add_option("--margin", cls_margin, "Presence margin over the uniform probability");
    c_cls->add_option("--out", cls_out, "Profiles JSONL")->required();
    cls_tok.add(c_cls);

    // evaluate
    auto* c_eval = app.add_subcommand("evaluate", "Repeated k-fold evaluation of the topic model");
    fs::path eval_in, eval_labels, eval_out;
    std::size_t eval_repeats = 5, eval_folds = 5;
    std::uint64_t eval_seed = 0;
    LldaFlags eval_flags;
    TokenizerFlags eval_tok;
    c_eval->add_option("--in", eval_in, "Corpus JSONL")->required()->check(CLI::ExistingFile);
    c_eval->add_option("--labels", eval_labels, "Label JSONL")->required()->check(CLI::ExistingFile);
    c_eval->add_option("--repeats", eval_repeats, "Repeats");
    c_eval->add_option("--folds", eval_folds, "Folds");
    c_eval->add_option("--cv-seed", eval_seed, "Fold assignment seed")->required();
    c_eval->add_option("--out", eval_out, "Evaluation JSON");
    eval_flags.add(c_eval);
    eval_tok.add(c_eval);

    // resolve-urls
    auto* c_res = app.add_subcommand("resolve-urls", "Extract suspicious URLs and resolve landing pages");
    fs::path res_in, res_allow, res_fixture, res_out, res_susp, res_emails, res_prior;
    std::vector<std::string> res_org;
    std::string res_resolver = "fixture";
    std::size_t res_visits = 3;
    int res_depth = urlintel::kDefaultMaxDepth;
    std::uint64_t res_seed = 0;
    c_res->add_option("--in", res_in, "Corpus JSONL")->required()->check(CLI::ExistingFile);
    c_res->add_option("--org-domains", res_org, "Organization domains")->delimiter(',')->required();
    c_res->add_option("--allowlist", res_allow, "Allowlisted domains, one per line")->check(CLI::ExistingFile);
    c_res->add_option("--resolver", res_resolver, "fixture or live");
    c_res->add_option("--fixture", res_fixture, "Redirect fixture")->check(CLI::ExistingFile);
    c_res->add_option("--visits", res_visits, "Visits per URL");
    c_res->add_option("--max-depth", res_depth, "Maximum redirect hops");
    c_res->add_option("--seed", res_seed, "Fixture walk seed");
    c_res->add_option("--prior", res_prior, "Earlier redirects JSONL to merge with")->check(CLI::ExistingFile);
    c_res->add_option("--suspicious-out", res_susp, "Suspicious URL CSV")->required();
    c_res->add_option("--emails-out", res_emails, "Corpus JSONL with suspicious flags");
    c_res->add_option("--out", res_out, "Redirect records JSONL")->required();

    // match-clicks
    auto* c_match = app.add_subcommand("match-clicks", "Attach landing-page clicks to emails");
    fs::path match_susp, match_red, match_clicks, match_out;
    c_match->add_option("--suspicious", match_susp, "Suspicious URL CSV")->required()->check(CLI::ExistingFile);
    c_match->add_option("--redirects", match_red, "Redirect records JSONL")->required()->check(CLI::ExistingFile);
    c_match->add_option("--clicks", match_clicks, "Click CSV (landing_url, clicks, observed_at)")->required()->check(CLI::ExistingFile);
    c_match->add_option("--out", match_out, "Per-email clicks CSV")->required();

    // design (helper for fit)
    auto* c_design = app.add_subcommand("design", "Build the regression design from emails, profiles and clicks");
    fs::path des_emails, des_profiles, des_model, des_clicks, des_out, des_features;
    std::string des_org, des_strategy = "avg";
    c_design->add_option("--emails", des_emails, "Corpus JSONL with suspicious flags")->required()->check(CLI::ExistingFile);
    c_design->add_option("--profiles", des_profiles, "Profiles JSONL")->required()->check(CLI::ExistingFile);
    c_design->add_option("--model", des_model, "Topic model JSON (label order)")->required()->check(CLI::ExistingFile);
    c_design->add_option("--clicks", des_clicks, "Per-email clicks CSV")->required()->check(CLI::ExistingFile);
    c_design->add_option("--org", des_org, "Organization name")->required();
    c_design->add_option("--strategy", des_strategy, "avg, sum or max");
    c_design->add_option("--out", des_out, "Design CSV (emails with matched clicks)")->required();
    c_design->add_option("--features-out", des_features, "Feature CSV for every suspicious email");

    // fit
    auto* c_fit = app.add_subcommand("fit", "Fit a Poisson model");
    fs::path fit_design, fit_out, fit_stepwise, fit_scan;
    std::string fit_model = "PM1";
    double fit_min = econ::kDefaultMinClicks;
    c_fit->add_option("--design", fit_design, "Design CSV")->required()->check(CLI::ExistingFile);
    c_fit->add_option("--model", fit_model, "M1..M7, PM1 or PM2");
    c_fit->add_option("--min-clicks", fit_min, "Minimum rounded clicks");
    c_fit->add_option("--out", fit_out, "Fit artifact JSON")->required();
    c_fit->add_option("--stepwise", fit_stepwise, "Write M1..M7 fits with chi-square comparisons");
    c_fit->add_option("--scan", fit_scan, "Write single-regressor scan CSV");

    // bootstrap
    auto* c_boot = app.add_subcommand("bootstrap", "Case-resampling bootstrap of a Poisson model");
    fs::path boot_design, boot_out;
    std::string boot_model = "PM1";
    double boot_min = econ::kDefaultMinClicks;
    std::size_t boot_B = 5000;
    std::uint64_t boot_seed = 0;
    bool boot_binary = false;
    c_boot->add_option("--design", boot_design, "Design CSV")->required()->check(CLI::ExistingFile);
    c_boot->add_option("--model", boot_model, "M1..M7, PM1 or PM2");
    c_boot->add_option("--min-clicks", boot_min, "Minimum rounded clicks");
    c_boot->add_option("-B,--replicates", boot_B, "Replicates");
    c_boot->add_option("--seed", boot_seed, "Bootstrap seed")->required();
    c_boot->add_flag("--binary-draws", boot_binary, "Store draws in a float64 sidecar");
    c_boot->add_option("--out", boot_out, "Artifact JSON")->required();

    // predict
    auto* c_pred = app.add_subcommand("predict", "Simulate predicted clicks from bootstrap draws");
    fs::path pred_art, pred_feat, pred_out;
    std::size_t pred_draws = 50000;
    std::uint64_t pred_seed = 0;
    c_pred->add_option("--artifact", pred_art, "Artifact with bootstrap draws")->required()->check(CLI::ExistingFile);
    c_pred->add_option("--features", pred_feat, "Design-format CSV of emails to score")->required()->check(CLI::ExistingFile);
    c_pred->add_option("--draws", pred_draws, "Simulation draws per email");
    c_pred->add_option("--seed", pred_seed, "Simulation seed")->required();
    c_pred->add_option("--out", pred_out, "Predictions CSV")->required();

    // rank
    auto* c_rank = app.add_subcommand("rank", "Order predictions into a triage queue");
    fs::path rank_in, rank_out;
    c_rank->add_option("--in", rank_in, "Predictions CSV")->required()->check(CLI::ExistingFile);
    c_rank->add_option("--out", rank_out, "Queue CSV")->required();

    // report
    auto* c_rep = app.add_subcommand("report", "Exploratory statistics as CSV tables");
    fs::path rep_emails, rep_profiles, rep_model, rep_design, rep_out;
    std::string rep_org;
    std::size_t rep_spoof = 3;
    c_rep->add_option("--emails", rep_emails, "Corpus JSONL with duplicate ids and suspicious flags")->required()->check(CLI::ExistingFile);
    c_rep->add_option("--profiles", rep_profiles, "Profiles JSONL")->required()->check(CLI::ExistingFile);
    c_rep->add_option("--model", rep_model, "Topic model JSON (label order)")->required()->check(CLI::ExistingFile);
    c_rep->add_option("--design", rep_design, "Design CSV for the correlation matrix")->check(CLI::ExistingFile);
    c_rep->add_option("--org", rep_org, "Organization name")->required();
    c_rep->add_option("--spoof-threshold", rep_spoof, "Distance at or below which a sender counts as spoofed");
    c_rep->add_option("--out-dir", rep_out, "Output directory")->required();

    // synth
    auto* c_syn = app.add_subcommand("synth", "Generate a synthetic corpus with ground truth");
    fs::path syn_out, syn_spec;
    std::optional<std::size_t> syn_emails;
    std::optional<std::uint64_t> syn_seed;
    c_syn->add_option("--spec", syn_spec, "Generator key = value file")->check(CLI::ExistingFile);
    c_syn->add_option("--emails", syn_emails, "Family emails");
    c_syn->add_option("--seed", syn_seed, "Generator seed");
    c_syn->add_option("--out-dir", syn_out, "Output directory")->required();

    // robustness
    auto* c_rob = app.add_subcommand("robustness", "Clicked-to-reported ratio per similarity group");
    fs::path rob_emails, rob_profiles, rob_model, rob_clicks, rob_out, rob_json;
    std::string rob_group = "family";
    std::size_t rob_min = 5;
    c_rob->add_option("--emails", rob_emails, "Corpus JSONL with duplicate ids and suspicious flags")->required()->check(CLI::ExistingFile);
    c_rob->add_option("--clicks", rob_clicks, "Per-email clicks CSV")->required()->check(CLI::ExistingFile);
    c_rob->add_option("--profiles", rob_profiles, "Profiles JSONL (signature grouping)")->check(CLI::ExistingFile);
    c_rob->add_option("--model", rob_model, "Topic model JSON (signature grouping)")->check(CLI::ExistingFile);
    c_rob->add_option("--group", rob_group, "family or signature");
    c_rob->add_option("--min-group", rob_min, "Smallest group kept");
    c_rob->add_option("--out", rob_out, "Ratio CSV")->required();
    c_rob->add_option("--json", rob_json, "Summary JSON");

    // simulate
    auto* c_sim = app.add_subcommand("simulate", "Monte Carlo delivery/report/click simulation");
    app::SkewScenario sim;
    std::size_t sim_min = 5;
    fs::path sim_out;
    c_sim->add_option("--families", sim.families, "Email families");
    c_sim->add_option("--emails-per-family", sim.emails_per_family, "Emails per family");
    c_sim->add_option("--users", sim.users, "Users");
    c_sim->add_option("--base-delivery", sim.base_delivery, "Delivery probability per (email, user)");
    c_sim->add_option("--skew-fraction", sim.skew_fraction, "Share of families with boosted delivery");
    c_sim->add_option("--skew-factor", sim.skew_factor, "Delivery multiplier for boosted families");
    c_sim->add_option("--p-detect", sim.p_detect, "Detection probability");
    c_sim->add_option("--p-notify", sim.p_notify, "Report probability after detection");
    c_sim->add_option("--p-click", sim.p_click, "Click probability when undetected");
    c_sim->add_option("--seed", sim.seed, "Simulation seed")->required();
    c_sim->add_option("--min-group", sim_min, "Smallest family kept");
    c_sim->add_option("--out", sim_out, "Result JSON (default stdout)");

    // run
    auto* c_run = app.add_subcommand("run", "Run every stage from a config file");
    fs::path run_cfg, run_in, run_out;
    c_run->add_option("--config", run_cfg, "Pipeline config")->required()->check(CLI::ExistingFile);
    c_run->add_option("--input", run_in, "Raw messages (file or directory)")->required()->check(CLI::ExistingFile | CLI::ExistingDirectory);
    c_run->add_option("--out-dir", run_out, "Artifact directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    }

    try {
        if (workers > 0) set_default_workers(workers);

        if (*c_ingest) {
            auto res = corpus::ingest(ingest_in, corpus::parse_input_format(ingest_format));
            const auto lex = ingest_lexicon.empty() ? corpus::LabelLexicon::defaults() : corpus::LabelLexicon::load(ingest_lexicon);
            auto warnings = res.warnings;
            const auto emails = app::recover_all(res.messages, lex, warnings);
            corpus::write_corpus_jsonl(ingest_out, emails);
            if (!ingest_warn.empty()) {
                std::ofstream w(ingest_warn, std::ios::binary);
                for (const auto& s : warnings) w << s << '\n';
            }
            std::cerr << "messages " << res.messages.size() << ", recovered " << emails.size() << ", skipped "
                      << res.skipped << ", warnings " << warnings.size() << '\n';
        } else if (*c_san) {
            const auto emails = corpus::read_corpus_jsonl(san_in);
            std::vector<std::string> comp;
            if (!san_comp.empty()) comp = app::load_name_list(san_comp);
            corpus::SmsHeuristics sms;
            sms.max_length = san_sms;
            const auto r = corpus::sanitize(emails, san_org, comp, sms);
            corpus::write_corpus_jsonl(san_out, r.emails);
            write_json(san_report.empty() ? fs::path("-") : san_report, corpus::to_json(r.report));
        } else if (*c_tune) {
            const auto emails = corpus::read_corpus_jsonl(tune_in);
            const auto docs = app::tokenize_all(emails, tune_tok.get());
            const auto vocab = textproc::Vocabulary::build(docs);
            std::vector<textproc::TfVector> vecs;
            for (const auto& d : docs) vecs.push_back(textproc::tf_vector(d, vocab, true));
            const auto t = dedup::tune_threshold(dedup::read_labels_csv(tune_labels), vecs, tune_B, tune_S, tune_seed);
            write_json(tune_out, dedup::to_json(t));
            std::cerr << "chosen threshold " << t.chosen_threshold << '\n';
        } else if (*c_dedup) {
            auto emails = corpus::read_corpus_jsonl(dedup_in);
            if (!dedup_threshold && dedup_tuning.empty()) throw UsageError("dedup needs --threshold or --tuning");
            const double thr = dedup_threshold ? *dedup_threshold : read_json(dedup_tuning).at("chosen_threshold").get<double>();
            const auto docs = app::tokenize_all(emails, dedup_tok.get());
            const auto dd = app::run_dedup(emails, docs, thr, {}, 0, 0, 0);
            corpus::write_corpus_jsonl(dedup_out, emails);
            if (!dedup_camp.empty()) dedup::write_campaigns_csv(dedup_camp, dd.campaigns);
            std::cerr << "campaigns " << dd.campaigns.size() << '\n';
        } else if (*c_train) {
            const auto emails = corpus::read_corpus_jsonl(train_in);
            const auto docs = app::tokenize_all(emails, train_tok.get());
            std::size_t used = 0;
            const auto model = app::train_on_labeled(docs, llda::read_labels_jsonl(train_labels), train_flags.get(), &used);
            llda::save_model(train_out, model);
            std::cerr << "trained on " << used << " documents, invariant checks " << model.diagnostics.checks
                      << ", violations " << model.diagnostics.violations() << '\n';
            if (model.diagnostics.violations() > 0) throw StageError("train", "Gibbs invariant violations");
        } else if (*c_cls) {
            const auto emails = corpus::read_corpus_jsonl(cls_in);
            const auto model = llda::load_model(cls_model);
            const auto docs = app::tokenize_all(emails, cls_tok.get());
            const auto profiles = app::classify_all(model, docs, model.config, cls_margin);
            llda::write_profiles_jsonl(cls_out, profiles, model.config.labels);
        } else if (*c_eval) {
            const auto emails = corpus::read_corpus_jsonl(eval_in);
            const auto labels = llda::read_labels_jsonl(eval_labels);
            const auto all = app::tokenize_all(emails, eval_tok.get());
            std::vector<textproc::TokenDoc> docs;
            for (const auto& d : all)
                if (labels.count(d.email_id)) docs.push_back(d);
            const auto rep = llda::cross_validate(docs, labels, eval_flags.get(), eval_repeats, eval_folds, eval_seed);
            write_json(eval_out.empty() ? fs::path("-") : eval_out, llda::to_json(rep));
        } else if (*c_res) {
            auto emails = corpus::read_corpus_jsonl(res_in);
            const auto allow = res_allow.empty() ? std::set<std::string>{} : app::load_domain_list(res_allow);
            std::vector<urlintel::SuspiciousUrl> susp;
            for (auto& e : emails) {
                auto s = urlintel::extract_suspicious(e, domain_set(res_org), allow);
                susp.insert(susp.end(), s.begin(), s.end());
            }
            std::vector<std::string> urls;
            for (const auto& s : susp) urls.push_back(s.url);
            std::sort(urls.begin(), urls.end());
            urls.erase(std::unique(urls.begin(), urls.end()), urls.end());
            urlintel::Resolver resolver;
            if (res_resolver == "live") {
                urlintel::LiveOptions lo;
                lo.max_depth = res_depth;
                resolver = urlintel::live_resolver(lo);
            } else if (res_resolver == "fixture") {
                if (res_fixture.empty()) throw UsageError("fixture resolver needs --fixture");
                resolver = urlintel::fixture_resolver(urlintel::RedirectFixture::load(res_fixture), res_seed, res_depth);
            } else {
                throw UsageError("--resolver must be 'fixture' or 'live'");
            }
            std::vector<urlintel::RedirectRecord> prior;
            if (!res_prior.empty()) prior = urlintel::read_redirects_jsonl(res_prior);
            const auto recs = urlintel::resolve_all(urls, resolver, res_visits, prior);
            urlintel::write_suspicious_csv(res_susp, susp);
            urlintel::write_redirects_jsonl(res_out, recs);
            if (!res_emails.empty()) corpus::write_corpus_jsonl(res_emails, emails);
            std::cerr << "suspicious urls " << susp.size() << ", unique " << urls.size() << '\n';
        } else if (*c_match) {
            const auto m = urlintel::match_clicks(urlintel::read_suspicious_csv(match_susp), urlintel::read_redirects_jsonl(match_red),
                                                  urlintel::read_clicks_csv(match_clicks));
            urlintel::write_email_clicks_csv(match_out, m);
            std::cerr << "emails with clicks " << m.size() << '\n';
        } else if (*c_design) {
            const auto emails = corpus::read_corpus_jsonl(des_emails);
            const auto model = llda::load_model(des_model);
            const auto profiles = llda::read_profiles_jsonl(des_profiles, model.config.labels);
            const auto clicks = urlintel::read_email_clicks_csv(des_clicks);
            const auto strategy = urlintel::parse_strategy(des_strategy);
            econ::write_design_csv(des_out, app::design_rows(emails, profiles, model.config.labels, clicks, strategy, des_org, true));
            if (!des_features.empty())
                econ::write_design_csv(des_features, app::design_rows(emails, profiles, model.config.labels, clicks, strategy, des_org, false));
        } else if (*c_fit) {
            const auto rows = econ::read_design_csv(fit_design);
            const auto d = econ::make_design(rows, econ::model_regressors(fit_model), fit_min);
            econ::FitArtifact a;
            a.model_id = fit_model;
            a.fit = econ::fit_poisson(d);
            a.training_stats = econ::regressor_stats(d);
            a.min_clicks = fit_min;
            econ::save_artifact(fit_out, a);
            if (!fit_stepwise.empty()) {
                const auto fits = econ::stepwise(rows, econ::stepwise_order(), fit_min);
                json models = json::array();
                for (std::size_t i = 0; i < fits.size(); ++i) {
                    json m{{"model", "M" + std::to_string(i + 1)}, {"fit", econ::to_json(fits[i])}};
                    if (i > 0) {
                        const auto an = econ::anova_chisq(fits[i - 1], fits[i]);
                        m["anova_vs_previous"] = {{"delta_deviance", an.delta_deviance}, {"delta_df", an.delta_df}, {"p_value", an.p_value}};
                    }
                    models.push_back(std::move(m));
                }
                write_json(fit_stepwise, models);
            }
            if (!fit_scan.empty()) {
                const auto s = econ::simple_poisson_scan(rows, fit_min);
                json j = json::array();
                for (const auto& r : s.results)
                    j.push_back({{"regressor", r.regressor}, {"beta", r.beta}, {"se", r.se}, {"p_value", r.p_value}, {"n", r.n},
                                 {"pearson", r.pearson ? json(*r.pearson) : json()}, {"spearman", r.spearman ? json(*r.spearman) : json()}});
                write_json(fit_scan, j);
            }
            std::cerr << "n " << a.fit.n << ", converged " << a.fit.converged << ", loglik " << a.fit.loglik << '\n';
        } else if (*c_boot) {
            const auto rows = econ::read_design_csv(boot_design);
            const auto d = econ::make_design(rows, econ::model_regressors(boot_model), boot_min);
            econ::FitArtifact a;
            a.model_id = boot_model;
            a.fit = econ::fit_poisson(d);
            a.training_stats = econ::regressor_stats(d);
            a.min_clicks = boot_min;
            a.bootstrap = econ::bootstrap_fit(d, boot_B, boot_seed);
            if (a.bootstrap->warning) std::cerr << "warning: " << *a.bootstrap->warning << '\n';
            econ::save_artifact(boot_out, a, boot_binary);
        } else if (*c_pred) {
            const auto a = econ::load_artifact(pred_art);
            if (!a.bootstrap) throw DataError(pred_art.string() + " has no bootstrap draws");
            std::vector<std::string> regs(a.fit.columns.begin() + 1, a.fit.columns.end());
            const auto rows = econ::read_design_csv(pred_feat);
            const auto scores = econ::predict_clicks(*a.bootstrap, econ::prediction_inputs(rows, regs), a.model_id, pred_draws,
                                                     pred_seed, a.training_stats);
            econ::write_scores_csv(pred_out, scores);
        } else if (*c_rank) {
            econ::write_scores_csv(rank_out, econ::triage_rank(econ::read_scores_csv(rank_in)));
        } else if (*c_rep) {
            const auto emails = corpus::read_corpus_jsonl(rep_emails);
            const auto model = llda::load_model(rep_model);
            const auto profiles = llda::read_profiles_jsonl(rep_profiles, model.config.labels);
            std::vector<econ::DesignRow> rows;
            if (!rep_design.empty()) rows = econ::read_design_csv(rep_design);
            const auto camps = dedup::campaigns(emails);
            app::ReportOptions ro;
            ro.org_name = rep_org;
            ro.spoof_threshold = rep_spoof;
            app::write_report(rep_out, app::report_stats(emails, camps, profiles, model.config.labels, rows, ro));
        } else if (*c_syn) {
            app::SynthSpec spec;
            if (!syn_spec.empty()) spec = app::synth_spec_from(app::KeyValueFile::load(syn_spec));
            if (syn_emails) spec.emails = *syn_emails;
            if (syn_seed) spec.seed = *syn_seed;
            const auto s = app::synth_corpus(spec, syn_out);
            std::cerr << "messages " << s.messages << ", families " << s.families << ", suspicious " << s.suspicious << '\n';
        } else if (*c_rob) {
            const auto emails = corpus::read_corpus_jsonl(rob_emails);
            const auto grouping = app::parse_grouping(rob_group);
            std::vector<llda::CognitiveProfile> profiles;
            std::vector<std::string> labels;
            if (grouping == app::Grouping::Signature) {
                if (rob_profiles.empty() || rob_model.empty()) throw UsageError("signature grouping needs --profiles and --model");
                labels = llda::load_model(rob_model).config.labels;
                profiles = llda::read_profiles_jsonl(rob_profiles, labels);
            }
            const auto recs = app::robustness_records(emails, profiles, labels, urlintel::read_email_clicks_csv(rob_clicks), grouping);
            const auto t = app::robustness_ratio(recs, rob_min);
            app::write_robustness_csv(rob_out, t);
            if (!rob_json.empty()) write_json(rob_json, app::to_json(t));
        } else if (*c_sim) {
            const auto m = app::skewed_model(sim);
            const auto r = app::simulate_click_generation(m);
            const auto t = app::robustness_ratio(app::simulated_records(m, r), sim_min);
            json j{{"reported", r.reported_events},
                   {"clicked", r.click_events},
                   {"reported_clicked", r.reported_clicked},
                   {"expected_reported", app::expected_reports(m)},
                   {"expected_clicked", app::expected_clicks(m)},
                   {"sd_reported", std::sqrt(app::variance_reports(m))},
                   {"sd_clicked", std::sqrt(app::variance_clicks(m))},
                   {"ratios", app::to_json(t)}};
            write_json(sim_out.empty() ? fs::path("-") : sim_out, j);
        } else if (*c_run) {
            const auto cfg = app::load_pipeline_config(run_cfg);
            const auto r = app::run_pipeline(cfg, run_in, run_out);
            std::cerr << "queue length " << r.queue.size() << '\n';
        }
    } catch (const StageError& e) {
        std::cerr << "triage: stage failed: " << e.what() << '\n';
        return 3;
    } catch (const Error& e) {
        std::cerr << "triage: " << e.what() << '\n';
        return e.exit_code();
    } catch (const std::exception& e) {
        std::cerr << "triage: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
