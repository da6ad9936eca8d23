#include "phishtriage/llda.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "phishtriage/parallel.hpp"

namespace phishtriage::llda {

const std::vector<std::string>& default_labels() {
    static const std::vector<std::string> labels{"Reciprocity", "Consistency", "SocialProof",
                                                 "Authority",   "Liking",      "Scarcity"};
    return labels;
}

void LldaConfig::validate() const {
    if (!(alpha > 0.0)) throw UsageError("llda: alpha must be > 0");
    if (!(beta > 0.0)) throw UsageError("llda: beta must be > 0");
    if (k_labels != labels.size()) throw UsageError("llda: k_labels must equal the number of labels");
    if (k_labels == 0) throw UsageError("llda: at least one label is required");
    if (burn_in > n_iterations) throw UsageError("llda: burn_in must not exceed n_iterations");
    if (n_iterations == 0) throw UsageError("llda: n_iterations must be >= 1");
    if (average_sweeps == 0 || average_sweeps > n_iterations)
        throw UsageError("llda: average_sweeps must be in [1, n_iterations]");
    std::set<std::string> uniq(labels.begin(), labels.end());
    if (uniq.size() != labels.size()) throw UsageError("llda: duplicate label names");
}

std::size_t LldaConfig::label_index(std::string_view name) const {
    for (std::size_t k = 0; k < labels.size(); ++k)
        if (labels[k] == name) return k;
    throw DataError("unknown label '" + std::string(name) + "'");
}

LabelMap read_labels_jsonl(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    LabelMap out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            auto& set = out[j.at("email_id").get<std::string>()];
            for (const auto& l : j.at("labels")) set.insert(l.get<std::string>());
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_labels_jsonl(const std::filesystem::path& path, const LabelMap& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& [id, set] : labels)
        out << nlohmann::json{{"email_id", id}, {"labels", set}}.dump() << '\n';
}

double LldaModel::phi(std::size_t k, std::size_t w) const {
    const double v = static_cast<double>(vocab.size());
    return (static_cast<double>(count(k, w)) + config.beta) /
           (static_cast<double>(label_totals[k]) + v * config.beta);
}

std::optional<std::size_t> LldaModel::word_id(std::string_view token) const {
    const auto it = std::lower_bound(vocab.begin(), vocab.end(), token);
    if (it == vocab.end() || *it != token) return std::nullopt;
    return static_cast<std::size_t>(it - vocab.begin());
}

std::vector<std::string> LldaModel::top_words(std::size_t k, std::size_t n) const {
    std::vector<std::size_t> idx(vocab.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(),
                     [&](std::size_t a, std::size_t b) { return count(k, a) > count(k, b); });
    std::vector<std::string> out;
    for (std::size_t i = 0; i < idx.size() && out.size() < n; ++i)
        if (count(k, idx[i]) > 0) out.push_back(vocab[idx[i]]);
    return out;
}

bool same_state(const LldaModel& a, const LldaModel& b) {
    return a.vocab == b.vocab && a.label_word_counts == b.label_word_counts &&
           a.label_totals == b.label_totals && a.config == b.config;
}

namespace {

std::size_t sample_discrete(Rng& rng, const double* cum, std::size_t n) {
    const double u = uniform01(rng) * cum[n - 1];
    for (std::size_t i = 0; i + 1 < n; ++i)
        if (u < cum[i]) return i;
    return n - 1;
}

}  // namespace

LldaModel train(std::span<const textproc::TokenDoc> docs, const LabelMap& labels,
                const LldaConfig& cfg, const TrainOptions& opts) {
    cfg.validate();
    const std::size_t K = cfg.k_labels;

    std::vector<textproc::TokenDoc> used;
    std::vector<std::vector<std::uint8_t>> allowed;
    std::vector<std::size_t> label_docs(K, 0);
    for (const auto& d : docs) {
        const auto it = labels.find(d.email_id);
        if (it == labels.end()) continue;
        if (it->second.empty()) throw DataError("labeled email '" + d.email_id + "' has no labels");
        std::vector<std::uint8_t> ks;
        for (const auto& name : it->second) ks.push_back(static_cast<std::uint8_t>(cfg.label_index(name)));
        std::sort(ks.begin(), ks.end());
        for (auto k : ks) ++label_docs[k];
        used.push_back(d);
        allowed.push_back(std::move(ks));
    }
    if (!opts.allow_absent_labels)
        for (std::size_t k = 0; k < K; ++k)
            if (label_docs[k] == 0) throw DataError("label '" + cfg.labels[k] + "' is absent from all training docs");

    const auto vocab = textproc::Vocabulary::build(used);
    if (vocab.size() == 0) throw DataError("llda: empty vocabulary");
    const std::size_t V = vocab.size();
    const double vbeta = static_cast<double>(V) * cfg.beta;

    const std::size_t D = used.size();
    std::vector<std::vector<std::uint32_t>> words(D);
    std::vector<std::vector<std::uint8_t>> z(D);
    for (std::size_t d = 0; d < D; ++d)
        for (const auto& t : used[d].tokens) words[d].push_back(*vocab.id(t));

    std::vector<std::int64_t> nwk(V * K, 0);  // word-major for the inner loop
    std::vector<std::int64_t> nk(K, 0);
    std::vector<std::int64_t> nkd(D * K, 0);
    std::size_t total_tokens = 0;

    Rng rng = make_rng(cfg.seed, 0);
    for (std::size_t d = 0; d < D; ++d) {
        z[d].resize(words[d].size());
        for (std::size_t i = 0; i < words[d].size(); ++i) {
            const std::uint8_t k = allowed[d][uniform_index(rng, allowed[d].size())];
            z[d][i] = k;
            ++nwk[words[d][i] * K + k];
            ++nk[k];
            ++nkd[d * K + k];
        }
        total_tokens += words[d].size();
    }

    GibbsDiagnostics diag;
    auto check = [&] {
        ++diag.checks;
        std::int64_t grand = 0;
        for (std::size_t k = 0; k < K; ++k) {
            std::int64_t row = 0;
            for (std::size_t w = 0; w < V; ++w) {
                if (nwk[w * K + k] < 0) ++diag.conservation_violations;
                row += nwk[w * K + k];
            }
            if (row != nk[k]) ++diag.conservation_violations;
            grand += row;
        }
        if (grand != static_cast<std::int64_t>(total_tokens)) ++diag.conservation_violations;
        for (std::size_t d = 0; d < D; ++d) {
            std::int64_t s = 0;
            for (std::size_t k = 0; k < K; ++k) s += nkd[d * K + k];
            if (s != static_cast<std::int64_t>(words[d].size())) ++diag.conservation_violations;
            for (const auto k : z[d])
                if (!std::binary_search(allowed[d].begin(), allowed[d].end(), k))
                    ++diag.restriction_violations;
        }
    };

    std::vector<double> cum(K);
    for (std::size_t sweep = 1; sweep <= cfg.n_iterations; ++sweep) {
        for (std::size_t d = 0; d < D; ++d) {
            const auto& ks = allowed[d];
            std::int64_t* nd = &nkd[d * K];
            for (std::size_t i = 0; i < words[d].size(); ++i) {
                const std::size_t w = words[d][i];
                std::int64_t* nw = &nwk[w * K];
                const std::uint8_t old = z[d][i];
                --nw[old];
                --nk[old];
                --nd[old];
                double acc = 0.0;
                for (std::size_t j = 0; j < ks.size(); ++j) {
                    const std::size_t k = ks[j];
                    acc += (static_cast<double>(nw[k]) + cfg.beta) /
                           (static_cast<double>(nk[k]) + vbeta) *
                           (static_cast<double>(nd[k]) + cfg.alpha);
                    cum[j] = acc;
                }
                const std::uint8_t nz = ks[sample_discrete(rng, cum.data(), ks.size())];
                z[d][i] = nz;
                ++nw[nz];
                ++nk[nz];
                ++nd[nz];
            }
        }
        if (cfg.check_every && sweep % cfg.check_every == 0) check();
    }

    LldaModel m;
    m.vocab = vocab.tokens();
    m.config = cfg;
    m.label_word_counts.assign(K * V, 0);
    for (std::size_t w = 0; w < V; ++w)
        for (std::size_t k = 0; k < K; ++k) m.label_word_counts[k * V + w] = nwk[w * K + k];
    m.label_totals = nk;
    m.diagnostics = diag;
    return m;
}

namespace {

// phi laid out word-major.
std::vector<double> phi_table(const LldaModel& m) {
    const std::size_t K = m.config.k_labels, V = m.vocab.size();
    std::vector<double> t(V * K);
    for (std::size_t w = 0; w < V; ++w)
        for (std::size_t k = 0; k < K; ++k) t[w * K + k] = m.phi(k, w);
    return t;
}

CognitiveProfile infer_with(const LldaModel& model, const std::vector<double>& phi,
                            const textproc::TokenDoc& doc, const LldaConfig& cfg) {
    const std::size_t K = model.config.k_labels;
    CognitiveProfile p;
    p.email_id = doc.email_id;
    p.trigger_counts.assign(K, 0);
    p.label_probs.assign(K, 1.0 / static_cast<double>(K));

    std::vector<std::uint32_t> words;
    for (const auto& t : doc.tokens)
        if (auto id = model.word_id(t)) words.push_back(static_cast<std::uint32_t>(*id));
    p.n_tokens = words.size();
    if (words.empty()) {
        p.no_signal = true;
        return p;
    }

    Rng rng = make_rng(derive_seed(cfg.seed, doc.email_id), 0);
    std::vector<std::uint8_t> z(words.size());
    std::vector<std::int64_t> nd(K, 0);
    for (std::size_t i = 0; i < words.size(); ++i) {
        z[i] = static_cast<std::uint8_t>(uniform_index(rng, K));
        ++nd[z[i]];
    }
    const double alpha = model.config.alpha;
    const double denom = static_cast<double>(words.size()) + static_cast<double>(K) * alpha;
    std::vector<double> cum(K), avg(K, 0.0);
    const std::size_t iters = cfg.n_iterations;
    const std::size_t first_avg = iters - cfg.average_sweeps + 1;
    for (std::size_t sweep = 1; sweep <= iters; ++sweep) {
        for (std::size_t i = 0; i < words.size(); ++i) {
            const double* ph = &phi[words[i] * K];
            --nd[z[i]];
            double acc = 0.0;
            for (std::size_t k = 0; k < K; ++k) {
                acc += ph[k] * (static_cast<double>(nd[k]) + alpha);
                cum[k] = acc;
            }
            z[i] = static_cast<std::uint8_t>(sample_discrete(rng, cum.data(), K));
            ++nd[z[i]];
        }
        if (sweep >= first_avg)
            for (std::size_t k = 0; k < K; ++k) avg[k] += (static_cast<double>(nd[k]) + alpha) / denom;
    }
    for (std::size_t k = 0; k < K; ++k) {
        p.trigger_counts[k] = nd[k];
        p.label_probs[k] = avg[k] / static_cast<double>(cfg.average_sweeps);
    }
    return p;
}

}  // namespace

CognitiveProfile infer(const LldaModel& model, const textproc::TokenDoc& doc,
                       const LldaConfig& cfg) {
    cfg.validate();
    return infer_with(model, phi_table(model), doc, cfg);
}

std::vector<CognitiveProfile> infer_all(const LldaModel& model,
                                        std::span<const textproc::TokenDoc> docs,
                                        const LldaConfig& cfg) {
    cfg.validate();
    const auto phi = phi_table(model);
    std::vector<CognitiveProfile> out(docs.size());
    parallel_for(docs.size(), [&](std::size_t i) { out[i] = infer_with(model, phi, docs[i], cfg); });
    return out;
}

void mark_present(CognitiveProfile& p, double margin) {
    const double cut = 1.0 / static_cast<double>(p.label_probs.size()) + margin;
    p.vulns_present.assign(p.label_probs.size(), false);
    if (p.no_signal) return;
    for (std::size_t k = 0; k < p.label_probs.size(); ++k) p.vulns_present[k] = p.label_probs[k] >= cut;
}

std::size_t topn(std::size_t n_train_docs, std::size_t n_test_docs, std::size_t n_train_pos) {
    if (n_train_docs == 0) throw UsageError("proportional cutoff needs n_train_docs > 0");
    const unsigned __int128 num = static_cast<unsigned __int128>(n_test_docs) * n_train_pos;
    const unsigned __int128 t = (num + n_train_docs - 1) / n_train_docs;
    return t > n_test_docs ? n_test_docs : static_cast<std::size_t>(t);
}

std::vector<std::vector<bool>> proportional_cutoff(const std::vector<std::vector<double>>& scores,
                                                   std::size_t n_train_docs,
                                                   std::size_t n_test_docs,
                                                   std::span<const std::size_t> n_train_pos) {
    if (scores.size() != n_train_pos.size())
        throw UsageError("proportional cutoff: one training count per label required");
    std::vector<std::vector<bool>> out(scores.size());
    for (std::size_t k = 0; k < scores.size(); ++k) {
        if (scores[k].size() != n_test_docs)
            throw UsageError("proportional cutoff: score vector length differs from n_test_docs");
        const std::size_t n = topn(n_train_docs, n_test_docs, n_train_pos[k]);
        std::vector<std::size_t> order(n_test_docs);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](std::size_t a, std::size_t b) { return scores[k][a] > scores[k][b]; });
        out[k].assign(n_test_docs, false);
        for (std::size_t i = 0; i < n; ++i) out[k][order[i]] = true;
    }
    return out;
}

Confusion& Confusion::operator+=(const Confusion& o) {
    tp += o.tp;
    fp += o.fp;
    tn += o.tn;
    fn += o.fn;
    return *this;
}

namespace {

struct RawMetrics {
    std::optional<double> sens, spec, prec, f1;
};

std::optional<double> ratio(std::size_t a, std::size_t b) {
    if (b == 0) return std::nullopt;
    return static_cast<double>(a) / static_cast<double>(b);
}

RawMetrics metrics_of(const Confusion& c) {
    return {ratio(c.tp, c.tp + c.fn), ratio(c.tn, c.tn + c.fp), ratio(c.tp, c.tp + c.fp),
            ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn)};
}

struct MetricAcc {
    std::vector<double> sens, spec, prec, f1;
    void add(const RawMetrics& m) {
        if (m.sens) sens.push_back(*m.sens);
        if (m.spec) spec.push_back(*m.spec);
        if (m.prec) prec.push_back(*m.prec);
        if (m.f1) f1.push_back(*m.f1);
    }
    static Metric summarize(const std::vector<double>& xs) {
        return {stats::mean(xs), stats::sd(xs), xs.size()};
    }
    MetricSet summarize() const {
        return {summarize(sens), summarize(spec), summarize(prec), summarize(f1)};
    }
};

MetricSet pooled_with_sd(const Confusion& pooled, const MetricAcc& per_fold) {
    const auto m = metrics_of(pooled);
    MetricSet s = per_fold.summarize();
    auto set = [](Metric& dst, const std::optional<double>& v) {
        dst.mean = v.value_or(0.0);
        if (!v) dst.n = 0;
    };
    set(s.sensitivity, m.sens);
    set(s.specificity, m.spec);
    set(s.precision, m.prec);
    set(s.f1, m.f1);
    return s;
}

nlohmann::json metric_json(const Metric& m) {
    return {{"mean", m.mean}, {"sd", m.sd}, {"n", m.n}};
}

nlohmann::json set_json(const MetricSet& s) {
    return {{"sensitivity", metric_json(s.sensitivity)},
            {"specificity", metric_json(s.specificity)},
            {"precision", metric_json(s.precision)},
            {"f1", metric_json(s.f1)}};
}

}  // namespace

nlohmann::json to_json(const EvalReport& r) {
    nlohmann::json per = nlohmann::json::array();
    for (const auto& l : r.per_label)
        per.push_back({{"label", l.label},
                       {"macro", set_json(l.macro)},
                       {"micro", set_json(l.micro)},
                       {"tp", l.pooled.tp},
                       {"fp", l.pooled.fp},
                       {"tn", l.pooled.tn},
                       {"fn", l.pooled.fn},
                       {"folds_skipped", l.folds_skipped}});
    return {{"repeats", r.repeats},
            {"folds", r.folds},
            {"macro", set_json(r.macro)},
            {"micro", set_json(r.micro)},
            {"per_label", per},
            {"skipped", r.skipped},
            {"gibbs_checks", r.diagnostics.checks},
            {"gibbs_violations", r.diagnostics.violations()}};
}

std::vector<std::size_t> stratified_folds(const std::vector<std::set<std::size_t>>& doc_labels,
                                          std::size_t folds, Rng& rng) {
    const std::size_t n = doc_labels.size();
    if (folds < 2 || n < folds) throw UsageError("cross-validation needs at least `folds` (>= 2) documents");
    std::size_t n_labels = 0;
    for (const auto& s : doc_labels)
        if (!s.empty()) n_labels = std::max(n_labels, *s.rbegin() + 1);
    std::vector<std::size_t> freq(n_labels, 0);
    for (const auto& s : doc_labels)
        for (auto k : s) ++freq[k];

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t i = n; i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    auto rarity = [&](std::size_t d) {
        std::size_t r = std::numeric_limits<std::size_t>::max();
        for (auto k : doc_labels[d]) r = std::min(r, freq[k]);
        return r;
    };
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return rarity(a) < rarity(b); });

    // Sizes differ by at most one: only n % folds folds may exceed n / folds.
    const std::size_t floor_size = n / folds, extra = n % folds;
    std::size_t at_ceiling = 0;
    std::vector<std::size_t> size(folds, 0), assign(n, 0);
    std::vector<std::vector<std::size_t>> count(folds, std::vector<std::size_t>(n_labels, 0));
    for (const auto d : order) {
        std::size_t best = folds;
        std::size_t best_load = 0;
        for (std::size_t f = 0; f < folds; ++f) {
            if (size[f] > floor_size || (size[f] == floor_size && at_ceiling == extra)) continue;
            std::size_t load = 0;
            for (auto k : doc_labels[d]) load += count[f][k];
            if (best == folds || load < best_load || (load == best_load && size[f] < size[best])) {
                best = f;
                best_load = load;
            }
        }
        assign[d] = best;
        if (++size[best] == floor_size + 1) ++at_ceiling;
        for (auto k : doc_labels[d]) ++count[best][k];
    }
    return assign;
}

EvalReport cross_validate(std::span<const textproc::TokenDoc> docs, const LabelMap& labels,
                          const LldaConfig& cfg, std::size_t repeats, std::size_t folds,
                          std::uint64_t seed) {
    cfg.validate();
    if (repeats == 0) throw UsageError("repeats must be >= 1");
    const std::size_t K = cfg.k_labels;

    std::vector<const textproc::TokenDoc*> used;
    std::vector<std::set<std::size_t>> doc_labels;
    for (const auto& d : docs) {
        const auto it = labels.find(d.email_id);
        if (it == labels.end()) continue;
        std::set<std::size_t> ks;
        for (const auto& name : it->second) ks.insert(cfg.label_index(name));
        used.push_back(&d);
        doc_labels.push_back(std::move(ks));
    }
    const std::size_t n = used.size();
    if (n < folds) throw UsageError("cross-validation needs at least `folds` labeled documents");

    std::vector<std::vector<std::size_t>> assignments(repeats);
    for (std::size_t r = 0; r < repeats; ++r) {
        Rng rng = make_rng(seed, r);
        assignments[r] = stratified_folds(doc_labels, folds, rng);
    }

    struct FoldResult {
        std::vector<Confusion> conf;
        std::vector<bool> skipped;
        GibbsDiagnostics diag;
    };
    const std::size_t tasks = repeats * folds;
    std::vector<FoldResult> results(tasks);
    parallel_for(tasks, [&](std::size_t t) {
        const std::size_t r = t / folds, f = t % folds;
        std::vector<textproc::TokenDoc> train_docs, test_docs;
        std::vector<std::size_t> test_idx;
        LabelMap train_labels;
        std::vector<std::size_t> n_pos(K, 0);
        for (std::size_t d = 0; d < n; ++d) {
            if (assignments[r][d] == f) {
                test_docs.push_back(*used[d]);
                test_idx.push_back(d);
            } else {
                train_docs.push_back(*used[d]);
                train_labels[used[d]->email_id] = labels.at(used[d]->email_id);
                for (auto k : doc_labels[d]) ++n_pos[k];
            }
        }
        LldaConfig c = cfg;
        c.seed = derive_seed(seed, 0x10000 + t);
        const auto model = train(train_docs, train_labels, c, {.allow_absent_labels = true});
        const auto profiles = infer_all(model, test_docs, c);
        std::vector<std::vector<double>> scores(K, std::vector<double>(test_docs.size()));
        for (std::size_t i = 0; i < test_docs.size(); ++i)
            for (std::size_t k = 0; k < K; ++k) scores[k][i] = profiles[i].label_probs[k];
        const auto pos = proportional_cutoff(scores, train_docs.size(), test_docs.size(), n_pos);

        FoldResult& res = results[t];
        res.conf.assign(K, {});
        res.skipped.assign(K, false);
        res.diag = model.diagnostics;
        for (std::size_t k = 0; k < K; ++k) {
            if (n_pos[k] == 0) {
                res.skipped[k] = true;
                continue;
            }
            for (std::size_t i = 0; i < test_docs.size(); ++i) {
                const bool truth = doc_labels[test_idx[i]].count(k) > 0;
                if (pos[k][i] && truth) ++res.conf[k].tp;
                else if (pos[k][i]) ++res.conf[k].fp;
                else if (truth) ++res.conf[k].fn;
                else ++res.conf[k].tn;
            }
        }
    });

    EvalReport rep;
    rep.repeats = repeats;
    rep.folds = folds;
    std::vector<MetricAcc> label_acc(K);
    std::vector<Confusion> label_pooled(K);
    std::vector<std::size_t> label_skipped(K, 0);
    MetricAcc macro_acc, micro_acc;
    Confusion all_pooled;
    for (std::size_t t = 0; t < tasks; ++t) {
        const auto& res = results[t];
        rep.diagnostics.checks += res.diag.checks;
        rep.diagnostics.conservation_violations += res.diag.conservation_violations;
        rep.diagnostics.restriction_violations += res.diag.restriction_violations;
        MetricAcc fold_labels;
        Confusion fold_pooled;
        for (std::size_t k = 0; k < K; ++k) {
            if (res.skipped[k]) {
                ++label_skipped[k];
                rep.skipped.push_back(std::to_string(t / folds) + "/" + std::to_string(t % folds) +
                                      ": " + cfg.labels[k]);
                continue;
            }
            const auto m = metrics_of(res.conf[k]);
            label_acc[k].add(m);
            fold_labels.add(m);
            label_pooled[k] += res.conf[k];
            fold_pooled += res.conf[k];
        }
        // Fold-level macro: mean over labels with defined values.
        RawMetrics fold_macro;
        auto mean_or = [](const std::vector<double>& xs) -> std::optional<double> {
            if (xs.empty()) return std::nullopt;
            return stats::mean(xs);
        };
        fold_macro.sens = mean_or(fold_labels.sens);
        fold_macro.spec = mean_or(fold_labels.spec);
        fold_macro.prec = mean_or(fold_labels.prec);
        fold_macro.f1 = mean_or(fold_labels.f1);
        macro_acc.add(fold_macro);
        micro_acc.add(metrics_of(fold_pooled));
        all_pooled += fold_pooled;
    }
    for (std::size_t k = 0; k < K; ++k) {
        LabelEval le;
        le.label = cfg.labels[k];
        le.macro = label_acc[k].summarize();
        le.micro = pooled_with_sd(label_pooled[k], label_acc[k]);
        le.pooled = label_pooled[k];
        le.folds_skipped = label_skipped[k];
        rep.per_label.push_back(std::move(le));
    }
    rep.macro = macro_acc.summarize();
    rep.micro = pooled_with_sd(all_pooled, micro_acc);
    return rep;
}

nlohmann::json to_json(const LldaConfig& c) {
    return {{"alpha", c.alpha},
            {"beta", c.beta},
            {"k_labels", c.k_labels},
            {"n_iterations", c.n_iterations},
            {"seed", c.seed},
            {"burn_in", c.burn_in},
            {"labels", c.labels},
            {"average_sweeps", c.average_sweeps},
            {"check_every", c.check_every}};
}

LldaConfig config_from_json(const nlohmann::json& j) {
    LldaConfig c;
    c.alpha = j.at("alpha").get<double>();
    c.beta = j.at("beta").get<double>();
    c.k_labels = j.at("k_labels").get<std::size_t>();
    c.n_iterations = j.at("n_iterations").get<std::size_t>();
    c.seed = j.at("seed").get<std::uint64_t>();
    c.burn_in = j.at("burn_in").get<std::size_t>();
    c.labels = j.at("labels").get<std::vector<std::string>>();
    c.average_sweeps = j.value("average_sweeps", std::size_t{1});
    c.check_every = j.value("check_every", std::size_t{100});
    c.validate();
    return c;
}

nlohmann::json to_json(const LldaModel& m) {
    const std::size_t K = m.config.k_labels, V = m.vocab.size();
    nlohmann::json counts = nlohmann::json::array();
    for (std::size_t k = 0; k < K; ++k)
        counts.push_back(std::vector<std::int64_t>(m.label_word_counts.begin() + static_cast<std::ptrdiff_t>(k * V),
                                                   m.label_word_counts.begin() + static_cast<std::ptrdiff_t>((k + 1) * V)));
    return {{"format_version", kFormatVersion},
            {"config", to_json(m.config)},
            {"vocab", m.vocab},
            {"label_word_counts", counts},
            {"label_totals", m.label_totals}};
}

LldaModel model_from_json(const nlohmann::json& j) {
    try {
        const int version = j.at("format_version").get<int>();
        if (version != kFormatVersion)
            throw DataError("unsupported model format_version " + std::to_string(version));
        LldaModel m;
        m.config = config_from_json(j.at("config"));
        m.vocab = j.at("vocab").get<std::vector<std::string>>();
        if (!std::is_sorted(m.vocab.begin(), m.vocab.end()))
            throw DataError("model vocabulary is not sorted");
        const auto& counts = j.at("label_word_counts");
        if (counts.size() != m.config.k_labels) throw DataError("model counts have the wrong label dimension");
        for (const auto& row : counts) {
            auto r = row.get<std::vector<std::int64_t>>();
            if (r.size() != m.vocab.size()) throw DataError("model counts have the wrong vocabulary dimension");
            m.label_word_counts.insert(m.label_word_counts.end(), r.begin(), r.end());
        }
        m.label_totals = j.at("label_totals").get<std::vector<std::int64_t>>();
        for (std::size_t k = 0; k < m.config.k_labels; ++k) {
            std::int64_t s = 0;
            for (std::size_t w = 0; w < m.vocab.size(); ++w) {
                if (m.count(k, w) < 0) throw DataError("negative count in model");
                s += m.count(k, w);
            }
            if (s != m.label_totals.at(k)) throw DataError("model label_totals disagree with counts");
        }
        return m;
    } catch (const nlohmann::json::exception& e) {
        throw DataError(std::string("malformed model: ") + e.what());
    }
}

void save_model(const std::filesystem::path& path, const LldaModel& m) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    out << to_json(m).dump() << '\n';
}

LldaModel load_model(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    try {
        return model_from_json(nlohmann::json::parse(in));
    } catch (const nlohmann::json::parse_error& e) {
        throw DataError(path.string() + ": " + e.what());
    }
}

nlohmann::json to_json(const CognitiveProfile& p, const std::vector<std::string>& labels) {
    nlohmann::json counts = nlohmann::json::object(), probs = nlohmann::json::object(),
                   present = nlohmann::json::object();
    for (std::size_t k = 0; k < labels.size(); ++k) {
        counts[labels[k]] = p.trigger_counts.at(k);
        probs[labels[k]] = p.label_probs.at(k);
        if (!p.vulns_present.empty()) present[labels[k]] = static_cast<bool>(p.vulns_present[k]);
    }
    nlohmann::json j{{"email_id", p.email_id},
                     {"trigger_counts", counts},
                     {"label_probs", probs},
                     {"n_tokens", p.n_tokens},
                     {"no_signal", p.no_signal}};
    if (!p.vulns_present.empty()) j["vulns_present"] = present;
    return j;
}

CognitiveProfile profile_from_json(const nlohmann::json& j, const std::vector<std::string>& labels) {
    CognitiveProfile p;
    p.email_id = j.at("email_id").get<std::string>();
    for (const auto& l : labels) {
        p.trigger_counts.push_back(j.at("trigger_counts").at(l).get<std::int64_t>());
        p.label_probs.push_back(j.at("label_probs").at(l).get<double>());
        if (j.contains("vulns_present")) p.vulns_present.push_back(j.at("vulns_present").at(l).get<bool>());
    }
    p.n_tokens = j.value("n_tokens", std::size_t{0});
    p.no_signal = j.value("no_signal", false);
    return p;
}

void write_profiles_jsonl(const std::filesystem::path& path, std::span<const CognitiveProfile> profiles,
                          const std::vector<std::string>& labels) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& p : profiles) out << to_json(p, labels).dump() << '\n';
}

std::vector<CognitiveProfile> read_profiles_jsonl(const std::filesystem::path& path,
                                                  const std::vector<std::string>& labels) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::vector<CognitiveProfile> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            out.push_back(profile_from_json(nlohmann::json::parse(line), labels));
        } catch (const nlohmann::json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace phishtriage::llda
