#include "phishtriage/pipeline.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <iostream>
#include <unordered_map>

#include <openssl/evp.h>

#include "phishtriage/csv.hpp"
#include "phishtriage/parallel.hpp"
#include "phishtriage/robustness.hpp"

namespace phishtriage::app {

namespace fs = std::filesystem;
using nlohmann::json;

std::vector<corpus::Email> recover_all(std::span<const corpus::RawMessage> messages,
                                       const corpus::LabelLexicon& lex, std::vector<std::string>& warnings) {
    std::vector<std::optional<corpus::Email>> slots(messages.size());
    parallel_for(messages.size(), [&](std::size_t i) { slots[i] = corpus::recover_original_headers(messages[i], lex); });
    std::vector<corpus::Email> out;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        if (slots[i]) out.push_back(std::move(*slots[i]));
        else warnings.push_back(messages[i].id + ": no complete From/To/Date/Subject header layer");
    }
    return out;
}

std::vector<textproc::TokenDoc> tokenize_all(std::span<const corpus::Email> emails,
                                             const textproc::TokenizerConfig& cfg) {
    std::vector<textproc::TokenDoc> docs(emails.size());
    parallel_for(emails.size(), [&](std::size_t i) { docs[i] = textproc::clean_and_tokenize(emails[i].body_text, cfg, emails[i].id); });
    return docs;
}

DedupOutcome run_dedup(std::vector<corpus::Email>& emails, std::span<const textproc::TokenDoc> docs,
                       std::optional<double> threshold, std::span<const dedup::LabeledDoc> labels,
                       std::size_t bootstrap_n, std::size_t sample_size, std::uint64_t seed) {
    DedupOutcome out;
    const auto vocab = textproc::Vocabulary::build(docs);
    std::vector<textproc::TfVector> vecs(docs.size());
    parallel_for(docs.size(), [&](std::size_t i) { vecs[i] = textproc::tf_vector(docs[i], vocab, true); });

    if (threshold) {
        out.threshold = *threshold;
    } else {
        std::unordered_map<std::string, bool> present;
        for (const auto& e : emails) present[e.id] = true;
        std::vector<dedup::LabeledDoc> kept;
        for (const auto& l : labels) {
            if (present.count(l.email_id)) kept.push_back(l);
            else ++out.labeled_missing;
        }
        out.labeled_used = kept.size();
        out.tuning = dedup::tune_threshold(kept, vecs, bootstrap_n, std::min(sample_size, kept.size()), seed);
        out.threshold = out.tuning->chosen_threshold;
    }
    const auto floor = std::min(dedup::kDefaultStorageFloor, out.threshold);
    const auto matrix = dedup::similarity_matrix(vecs, floor);
    std::vector<std::optional<Timestamp>> dates;
    for (const auto& e : emails) dates.push_back(e.date);
    const auto ids = dedup::assign_duplicate_ids(matrix, out.threshold, dates);
    for (std::size_t i = 0; i < emails.size(); ++i) emails[i].duplicate_id = ids[i];
    out.campaigns = dedup::campaigns(emails);
    return out;
}

llda::LldaModel train_on_labeled(std::span<const textproc::TokenDoc> docs, const llda::LabelMap& labels,
                                 const llda::LldaConfig& cfg, std::size_t* used) {
    std::vector<textproc::TokenDoc> train_docs;
    llda::LabelMap train_labels;
    for (const auto& d : docs) {
        const auto it = labels.find(d.email_id);
        if (it == labels.end()) continue;
        train_docs.push_back(d);
        train_labels[d.email_id] = it->second;
    }
    if (used) *used = train_docs.size();
    if (train_docs.empty()) throw DataError("no labeled document found in the corpus");
    return llda::train(train_docs, train_labels, cfg);
}

std::vector<llda::CognitiveProfile> classify_all(const llda::LldaModel& model,
                                                 std::span<const textproc::TokenDoc> docs,
                                                 const llda::LldaConfig& cfg, double presence_margin) {
    auto profiles = llda::infer_all(model, docs, cfg);
    for (auto& p : profiles) llda::mark_present(p, presence_margin);
    return profiles;
}

std::vector<econ::DesignRow> design_rows(std::span<const corpus::Email> emails,
                                         std::span<const llda::CognitiveProfile> profiles,
                                         const std::vector<std::string>& labels,
                                         std::span<const urlintel::EmailClicks> clicks, urlintel::Strategy strategy,
                                         const std::string& org_name, bool matched_only) {
    const auto& names = llda::default_labels();
    std::vector<std::optional<std::size_t>> slot(names.size());
    for (std::size_t k = 0; k < names.size(); ++k) {
        const auto it = std::find(labels.begin(), labels.end(), names[k]);
        if (it != labels.end()) slot[k] = static_cast<std::size_t>(it - labels.begin());
    }
    std::unordered_map<std::string, const llda::CognitiveProfile*> prof;
    for (const auto& p : profiles) prof[p.email_id] = &p;
    std::unordered_map<std::string, const urlintel::EmailClicks*> clk;
    for (const auto& c : clicks) clk[c.email_id] = &c;

    std::vector<econ::DesignRow> rows;
    for (const auto& e : emails) {
        if (!e.suspicious) continue;
        const auto c = clk.find(e.id);
        if (matched_only && c == clk.end()) continue;
        const auto p = prof.find(e.id);
        if (p == prof.end()) throw DataError("email " + e.id + " has no cognitive profile");
        econ::DesignRow r;
        r.email_id = e.id;
        r.clicks_avg = c == clk.end() ? 0.0 : urlintel::aggregate(*c->second, strategy);
        std::size_t present = 0;
        for (std::size_t k = 0; k < names.size(); ++k) {
            if (!slot[k]) continue;
            r.triggers[k] = static_cast<double>(p->second->trigger_counts.at(*slot[k]));
            if (*slot[k] < p->second->vulns_present.size() && p->second->vulns_present[*slot[k]]) ++present;
        }
        r.n_vulns = static_cast<double>(present);
        r.spoof_dist = static_cast<double>(urlintel::spoof_distance(e.from_domain, org_name));
        rows.push_back(std::move(r));
    }
    return rows;
}

std::string sha256_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    EVP_MD_CTX* ctx = EVP_MD_CTX_new();
    EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
    std::array<char, 1 << 16> buf{};
    while (in) {
        in.read(buf.data(), buf.size());
        if (in.gcount() > 0) EVP_DigestUpdate(ctx, buf.data(), static_cast<std::size_t>(in.gcount()));
    }
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    EVP_DigestFinal_ex(ctx, md, &len);
    EVP_MD_CTX_free(ctx);
    static const char* hex = "0123456789abcdef";
    std::string out;
    for (unsigned i = 0; i < len; ++i) {
        out.push_back(hex[md[i] >> 4]);
        out.push_back(hex[md[i] & 15]);
    }
    return out;
}

namespace {

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << j.dump(1) << '\n';
}

void write_lines(const fs::path& path, const std::vector<std::string>& lines) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& l : lines) out << l << '\n';
}

json stepwise_json(std::span<const econ::DesignRow> rows, double min_clicks) {
    const auto fits = econ::stepwise(rows, econ::stepwise_order(), min_clicks);
    json models = json::array();
    for (std::size_t i = 0; i < fits.size(); ++i) {
        json m{{"model", "M" + std::to_string(i + 1)}, {"fit", econ::to_json(fits[i])}};
        if (i > 0) {
            const auto a = econ::anova_chisq(fits[i - 1], fits[i]);
            m["anova_vs_previous"] = {{"delta_deviance", a.delta_deviance}, {"delta_df", a.delta_df}, {"p_value", a.p_value}};
        }
        models.push_back(std::move(m));
    }
    return models;
}

void write_scan_csv(const fs::path& path, const econ::ScanReport& s) {
    csv::Writer w(path);
    w.row({"regressor", "beta", "se", "p_value", "n", "pearson", "spearman"});
    for (const auto& r : s.results)
        w.row({r.regressor, csv::fmt(r.beta), csv::fmt(r.se), csv::fmt(r.p_value), std::to_string(r.n),
               r.pearson ? csv::fmt(*r.pearson) : "NA", r.spearman ? csv::fmt(*r.spearman) : "NA"});
}

class Manifest {
public:
    explicit Manifest(fs::path dir) : dir_(std::move(dir)) {}

    void begin(std::string_view stage) { stages_.push_back({{"stage", stage}, {"status", "running"}, {"artifacts", json::array()}, {"notes", json::array()}}); }
    void artifact(const std::string& name) { stages_.back()["artifacts"].push_back({{"file", name}, {"sha256", sha256_file(dir_ / name)}}); }
    void note(const std::string& n) { stages_.back()["notes"].push_back(n); }
    void set(const std::string& key, json v) { stages_.back()[key] = std::move(v); }
    void finish(const std::string& status) { stages_.back()["status"] = status; }
    json to_json(const std::string& status) const { return {{"status", status}, {"stages", stages_}}; }
    void save(const std::string& status) const { write_json(dir_ / "manifest.json", to_json(status)); }

private:
    fs::path dir_;
    json stages_ = json::array();
};

}  // namespace

PipelineResult run_pipeline(const PipelineConfig& cfg, const fs::path& input, const fs::path& out_dir) {
    fs::create_directories(out_dir);
    if (cfg.workers > 0) set_default_workers(static_cast<unsigned>(cfg.workers));
    Manifest mf(out_dir);
    PipelineResult result;
    std::string stage;

    auto run = [&](std::string_view name, auto&& body) {
        stage = std::string(name);
        mf.begin(name);
        std::clog << "[triage] stage " << name << '\n';
        try {
            body();
        } catch (const StageError& e) {
            mf.finish("failed");
            mf.note(e.what());
            mf.save("failed");
            throw;
        } catch (const std::exception& e) {
            mf.finish("failed");
            mf.note(e.what());
            mf.save("failed");
            throw StageError(stage, e.what());
        }
        mf.finish("ok");
    };

    corpus::IngestResult ingested;
    std::vector<corpus::Email> emails;
    std::vector<textproc::TokenDoc> docs;
    DedupOutcome dd;
    llda::LldaModel model;
    std::vector<llda::CognitiveProfile> profiles;
    std::vector<urlintel::EmailClicks> clicks;
    std::vector<econ::DesignRow> fit_rows, all_rows;
    std::optional<econ::FitArtifact> artifact;
    std::vector<econ::TriageScore> predictions;

    run("ingest", [&] {
        ingested = corpus::ingest(input, cfg.input_format);
        write_json(out_dir / "ingest.json", {{"input", input.filename().string()},
                                            {"messages", ingested.messages.size()},
                                            {"skipped", ingested.skipped},
                                            {"warnings", ingested.warnings}});
        mf.artifact("ingest.json");
    });
    run("recover", [&] {
        std::vector<std::string> warnings;
        emails = recover_all(ingested.messages, cfg.lexicon, warnings);
        corpus::write_corpus_jsonl(out_dir / "recovered.jsonl", emails);
        write_lines(out_dir / "recover_warnings.txt", warnings);
        mf.artifact("recovered.jsonl");
        mf.artifact("recover_warnings.txt");
        mf.set("recovered", emails.size());
        mf.set("unrecoverable", warnings.size());
    });
    run("sanitize", [&] {
        auto s = corpus::sanitize(emails, cfg.org_name, cfg.competitors, cfg.sms);
        emails = std::move(s.emails);
        corpus::write_corpus_jsonl(out_dir / "sanitized.jsonl", emails);
        write_json(out_dir / "sanitization.json", corpus::to_json(s.report));
        mf.artifact("sanitized.jsonl");
        mf.artifact("sanitization.json");
    });
    run("dedup", [&] {
        docs = tokenize_all(emails, cfg.tokenizer);
        std::vector<dedup::LabeledDoc> labels;
        if (!cfg.dedup_threshold) labels = dedup::read_labels_csv(*cfg.dedup_labels);
        dd = run_dedup(emails, docs, cfg.dedup_threshold, labels, cfg.dedup_bootstrap_n, cfg.dedup_sample_size,
                       cfg.dedup_seed);
        json t = dd.tuning ? dedup::to_json(*dd.tuning) : json{{"chosen_threshold", dd.threshold}, {"source", "config"}};
        if (dd.tuning) {
            t["labeled_used"] = dd.labeled_used;
            t["labeled_missing"] = dd.labeled_missing;
        }
        write_json(out_dir / "threshold.json", t);
        dedup::write_campaigns_csv(out_dir / "campaigns.csv", dd.campaigns);
        mf.artifact("threshold.json");
        mf.artifact("campaigns.csv");
        mf.set("threshold", dd.threshold);
        mf.set("campaigns", dd.campaigns.size());
    });
    run("classify", [&] {
        if (cfg.llda_model) {
            model = llda::load_model(*cfg.llda_model);
        } else {
            std::size_t used = 0;
            model = train_on_labeled(docs, llda::read_labels_jsonl(*cfg.llda_labels), cfg.llda, &used);
            mf.set("training_documents", used);
            mf.set("gibbs_checks", model.diagnostics.checks);
            mf.set("gibbs_violations", model.diagnostics.violations());
            if (model.diagnostics.violations() > 0)
                throw StageError("classify", "Gibbs invariant violations: " + std::to_string(model.diagnostics.violations()));
        }
        llda::save_model(out_dir / "llda_model.json", model);
        profiles = classify_all(model, docs, model.config, cfg.presence_margin);
        llda::write_profiles_jsonl(out_dir / "profiles.jsonl", profiles, model.config.labels);
        mf.artifact("llda_model.json");
        mf.artifact("profiles.jsonl");
    });
    run("urlintel", [&] {
        std::vector<urlintel::SuspiciousUrl> suspicious;
        for (auto& e : emails) {
            auto s = urlintel::extract_suspicious(e, cfg.org_domains, cfg.allowlist);
            suspicious.insert(suspicious.end(), s.begin(), s.end());
        }
        urlintel::write_suspicious_csv(out_dir / "suspicious_urls.csv", suspicious);
        std::vector<std::string> urls;
        for (const auto& s : suspicious) urls.push_back(s.url);
        std::sort(urls.begin(), urls.end());
        urls.erase(std::unique(urls.begin(), urls.end()), urls.end());
        urlintel::Resolver resolver;
        if (cfg.resolver == "live") {
            urlintel::LiveOptions lo;
            lo.max_depth = cfg.url_max_depth;
            resolver = urlintel::live_resolver(lo);
        } else {
            resolver = urlintel::fixture_resolver(urlintel::RedirectFixture::load(*cfg.redirect_fixture), cfg.url_seed,
                                                  cfg.url_max_depth);
        }
        const auto redirects = urlintel::resolve_all(urls, resolver, cfg.url_visits);
        urlintel::write_redirects_jsonl(out_dir / "redirects.jsonl", redirects);
        if (cfg.clicks) clicks = urlintel::match_clicks(suspicious, redirects, urlintel::read_clicks_csv(*cfg.clicks));
        else mf.note("no click file configured");
        urlintel::write_email_clicks_csv(out_dir / "email_clicks.csv", clicks);
        corpus::write_corpus_jsonl(out_dir / "emails.jsonl", emails);
        for (const char* f : {"suspicious_urls.csv", "redirects.jsonl", "email_clicks.csv", "emails.jsonl"}) mf.artifact(f);
        mf.set("suspicious_emails", static_cast<std::size_t>(std::count_if(emails.begin(), emails.end(), [](const auto& e) { return e.suspicious; })));
        mf.set("matched_emails", clicks.size());
    });
    run("design", [&] {
        fit_rows = design_rows(emails, profiles, model.config.labels, clicks, cfg.strategy, cfg.org_name, true);
        all_rows = design_rows(emails, profiles, model.config.labels, clicks, cfg.strategy, cfg.org_name, false);
        econ::write_design_csv(out_dir / "design.csv", fit_rows);
        econ::write_design_csv(out_dir / "features.csv", all_rows);
        mf.artifact("design.csv");
        mf.artifact("features.csv");
    });
    const auto regs = econ::model_regressors(cfg.model);
    run("fit", [&] {
        const auto d = econ::make_design(fit_rows, regs, cfg.min_clicks);
        mf.set("observations", d.n());
        if (all_rows.empty()) {
            mf.note("no suspicious emails: fit skipped");
            return;
        }
        econ::FitArtifact a;
        a.model_id = cfg.model;
        a.fit = econ::fit_poisson(d);
        a.training_stats = econ::regressor_stats(d);
        a.min_clicks = cfg.min_clicks;
        artifact = std::move(a);
        econ::save_artifact(out_dir / "fit.json", *artifact);
        mf.artifact("fit.json");
        try {
            write_json(out_dir / "stepwise.json", stepwise_json(fit_rows, cfg.min_clicks));
            mf.artifact("stepwise.json");
        } catch (const DataError& e) {
            mf.note(std::string("stepwise models skipped: ") + e.what());
        }
        write_scan_csv(out_dir / "scan.csv", econ::simple_poisson_scan(fit_rows, cfg.min_clicks));
        mf.artifact("scan.csv");
    });
    run("bootstrap", [&] {
        if (!artifact) return mf.note("no fitted model: bootstrap skipped");
        const auto d = econ::make_design(fit_rows, regs, cfg.min_clicks);
        artifact->bootstrap = econ::bootstrap_fit(d, cfg.bootstrap_B, cfg.bootstrap_seed);
        if (artifact->bootstrap->warning) mf.note(*artifact->bootstrap->warning);
        econ::save_artifact(out_dir / "model.json", *artifact, true);
        mf.artifact("model.json");
        mf.artifact("model.draws.bin");
    });
    run("predict", [&] {
        if (artifact) {
            const auto inputs = econ::prediction_inputs(all_rows, regs);
            predictions = econ::predict_clicks(*artifact->bootstrap, inputs, cfg.model, cfg.predict_draws,
                                               cfg.predict_seed, artifact->training_stats);
        }
        econ::write_scores_csv(out_dir / "predictions.csv", predictions);
        mf.artifact("predictions.csv");
    });
    run("rank", [&] {
        result.queue = econ::triage_rank(predictions);
        econ::write_scores_csv(out_dir / "queue.csv", result.queue);
        mf.artifact("queue.csv");
        mf.set("queue_length", result.queue.size());
    });
    run("report", [&] {
        ReportOptions ro;
        ro.org_name = cfg.org_name;
        ro.spoof_threshold = cfg.spoof_threshold;
        result.report = report_stats(emails, dd.campaigns, profiles, model.config.labels, fit_rows, ro);
        write_report(out_dir / "report", result.report);
        std::vector<std::string> files;
        for (const auto& entry : fs::directory_iterator(out_dir / "report")) files.push_back("report/" + entry.path().filename().string());
        std::sort(files.begin(), files.end());
        for (const auto& f : files) mf.artifact(f);

        for (const auto grouping : {Grouping::Family, Grouping::Signature}) {
            const std::string tag = grouping == Grouping::Family ? "family" : "signature";
            const auto recs = robustness_records(emails, profiles, model.config.labels, clicks, grouping);
            const auto table = robustness_ratio(recs, cfg.robustness_min_group);
            write_robustness_csv(out_dir / ("robustness_" + tag + ".csv"), table);
            write_json(out_dir / ("robustness_" + tag + ".json"), to_json(table));
            mf.artifact("robustness_" + tag + ".csv");
            mf.artifact("robustness_" + tag + ".json");
        }
    });
    mf.save("ok");
    result.manifest = mf.to_json("ok");
    return result;
}

}  // namespace phishtriage::app
