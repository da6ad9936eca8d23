#include "phishtriage/dedup.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <unordered_map>

#include <nlohmann/json.hpp>

#include "phishtriage/csv.hpp"
#include "phishtriage/parallel.hpp"

namespace phishtriage::dedup {

SimilarityMatrix::SimilarityMatrix(std::vector<std::string> ids, std::vector<bool> nonempty,
                                   double floor)
    : ids_(std::move(ids)), nonempty_(std::move(nonempty)), rows_(ids_.size()), floor_(floor) {}

double SimilarityMatrix::score(std::size_t i, std::size_t j) const {
    if (i == j) return nonempty_.at(i) ? 1.0 : 0.0;
    if (j < i) std::swap(i, j);
    const auto& r = rows_.at(i);
    const auto it = std::lower_bound(r.begin(), r.end(), j,
                                     [](const Entry& e, std::size_t c) { return e.col < c; });
    return (it != r.end() && it->col == j) ? it->score : 0.0;
}

std::size_t SimilarityMatrix::stored_entries() const {
    std::size_t n = 0;
    for (const auto& r : rows_) n += r.size();
    return n;
}

void SimilarityMatrix::set(std::size_t i, std::size_t j, double s) {
    if (i == j) return;
    if (j < i) std::swap(i, j);
    if (s < floor_) return;
    auto& r = rows_.at(i);
    const auto it = std::lower_bound(r.begin(), r.end(), j,
                                     [](const Entry& e, std::size_t c) { return e.col < c; });
    if (it != r.end() && it->col == j) it->score = s;
    else r.insert(it, Entry{static_cast<std::uint32_t>(j), s});
}

SimilarityMatrix similarity_matrix(std::span<const textproc::TfVector> docs,
                                   double storage_floor) {
    const std::size_t n = docs.size();
    std::vector<std::string> ids;
    std::vector<bool> nonempty;
    std::vector<double> norms(n);
    std::uint32_t max_term = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ids.push_back(docs[i].email_id);
        norms[i] = docs[i].norm();
        nonempty.push_back(norms[i] > 0.0);
        for (const auto& tw : docs[i].weights) max_term = std::max(max_term, tw.term + 1);
    }
    SimilarityMatrix m(std::move(ids), std::move(nonempty), storage_floor);

    // Inverted index; postings ascending by document.
    std::vector<std::vector<std::pair<std::uint32_t, double>>> postings(max_term);
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& tw : docs[i].weights)
            postings[tw.term].emplace_back(static_cast<std::uint32_t>(i), tw.weight);

    std::vector<std::vector<SimilarityMatrix::Entry>> rows(n);
    parallel_for(n, [&](std::size_t i) {
        if (norms[i] == 0.0) return;
        // Terms are visited in ascending order, so each pair's dot product
        // accumulates in the same order as textproc::dot.
        std::vector<double> acc(n, 0.0);
        std::vector<std::uint32_t> touched;
        for (const auto& tw : docs[i].weights) {
            const auto& plist = postings[tw.term];
            auto it = std::upper_bound(plist.begin(), plist.end(), static_cast<std::uint32_t>(i),
                                       [](std::uint32_t v, const auto& p) { return v < p.first; });
            for (; it != plist.end(); ++it) {
                if (acc[it->first] == 0.0) touched.push_back(it->first);
                acc[it->first] += tw.weight * it->second;
            }
        }
        std::sort(touched.begin(), touched.end());
        for (const auto j : touched) {
            double s = acc[j] / (norms[i] * norms[j]);
            if (s > 1.0 - 1e-12) s = 1.0;
            s = std::clamp(s, 0.0, 1.0);
            if (s >= storage_floor && s > 0.0) rows[i].push_back({j, s});
        }
    });
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& e : rows[i]) m.set(i, e.col, e.score);
    return m;
}

std::vector<LabeledDoc> read_labels_csv(const std::filesystem::path& path) {
    const auto t = csv::Table::read(path);
    std::vector<LabeledDoc> out;
    for (std::size_t r = 0; r < t.rows(); ++r)
        out.push_back({trim(t.at(r, "email_id")), trim(t.at(r, "similarity_group_id"))});
    return out;
}

nlohmann::json to_json(const ThresholdTuning& t) {
    return nlohmann::json{{"threshold_grid", t.threshold_grid},
                          {"sensitivity_mean", t.sensitivity_mean},
                          {"specificity_mean", t.specificity_mean},
                          {"chosen_threshold", t.chosen_threshold},
                          {"chosen_sensitivity", t.chosen_sensitivity()},
                          {"chosen_specificity", t.chosen_specificity()},
                          {"bootstrap_n", t.bootstrap_n},
                          {"sample_size", t.sample_size},
                          {"seed", t.seed}};
}

std::vector<double> threshold_grid() {
    std::vector<double> g(101);
    for (int k = 0; k <= 100; ++k) g[static_cast<std::size_t>(k)] = k / 100.0;
    return g;
}

std::size_t grid_bin(double score) {
    if (!(score > 0.0)) return 0;
    auto k = static_cast<long>(std::floor(score * 100.0));
    k = std::clamp(k, 0L, 100L);
    while (k < 100 && score >= (k + 1) / 100.0) ++k;
    while (k > 0 && score < k / 100.0) --k;
    return static_cast<std::size_t>(k);
}

ThresholdTuning tune_threshold(std::span<const LabeledDoc> labeled,
                               std::span<const textproc::TfVector> docs,
                               std::size_t bootstrap_n, std::size_t sample_size,
                               std::uint64_t seed) {
    if (bootstrap_n < 1) throw UsageError("tune_threshold: bootstrap_n must be >= 1");
    if (sample_size < 2 || sample_size > labeled.size())
        throw UsageError("tune_threshold: sample_size must be in [2, number of labeled emails]");

    std::unordered_map<std::string, const textproc::TfVector*> by_id;
    for (const auto& d : docs) by_id.emplace(d.email_id, &d);
    std::vector<const textproc::TfVector*> vecs;
    std::vector<std::string> groups;
    for (const auto& l : labeled) {
        const auto it = by_id.find(l.email_id);
        if (it == by_id.end()) throw DataError("labeled email '" + l.email_id + "' has no vector");
        vecs.push_back(it->second);
        groups.push_back(l.group_id);
    }
    {
        auto g = groups;
        std::sort(g.begin(), g.end());
        if (std::unique(g.begin(), g.end()) - g.begin() < 2)
            throw DataError("cannot tune: single class");
    }

    const std::size_t n = vecs.size();
    constexpr std::size_t kBins = 101;
    // Upper-triangle pair bins and duplicate flags, row-major.
    std::vector<std::uint8_t> bin(n * n, 0);
    std::vector<std::uint8_t> same(n * n, 0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            bin[i * n + j] = static_cast<std::uint8_t>(grid_bin(textproc::cosine(*vecs[i], *vecs[j])));
            same[i * n + j] = groups[i] == groups[j];
        }

    std::vector<double> sens(bootstrap_n * kBins, 0.0), spec(bootstrap_n * kBins, 0.0);
    std::vector<std::uint8_t> sens_ok(bootstrap_n, 0), spec_ok(bootstrap_n, 0);
    parallel_for(bootstrap_n, [&](std::size_t b) {
        Rng rng = make_rng(seed, b);
        std::vector<double> count(n, 0.0);
        for (std::size_t s = 0; s < sample_size; ++s) count[uniform_index(rng, n)] += 1.0;
        std::vector<std::size_t> drawn;
        for (std::size_t i = 0; i < n; ++i)
            if (count[i] > 0) drawn.push_back(i);

        std::array<double, kBins> dup{}, non{};
        for (std::size_t a = 0; a < drawn.size(); ++a) {
            const std::size_t i = drawn[a];
            for (std::size_t c = a + 1; c < drawn.size(); ++c) {
                const std::size_t j = drawn[c];
                const double w = count[i] * count[j];
                if (same[i * n + j]) dup[bin[i * n + j]] += w;
                else non[bin[i * n + j]] += w;
            }
        }
        const double total_dup = std::accumulate(dup.begin(), dup.end(), 0.0);
        const double total_non = std::accumulate(non.begin(), non.end(), 0.0);
        // Predicted duplicate at threshold k iff bin >= k.
        double dup_at_or_above = total_dup;
        double non_below = 0.0;
        for (std::size_t k = 0; k < kBins; ++k) {
            if (k > 0) {
                dup_at_or_above -= dup[k - 1];
                non_below += non[k - 1];
            }
            if (total_dup > 0) sens[b * kBins + k] = dup_at_or_above / total_dup;
            if (total_non > 0) spec[b * kBins + k] = non_below / total_non;
        }
        sens_ok[b] = total_dup > 0;
        spec_ok[b] = total_non > 0;
    });

    ThresholdTuning t;
    t.threshold_grid = threshold_grid();
    t.sensitivity_mean.assign(kBins, 0.0);
    t.specificity_mean.assign(kBins, 0.0);
    std::size_t n_sens = 0, n_spec = 0;
    for (std::size_t b = 0; b < bootstrap_n; ++b) {
        if (sens_ok[b]) {
            ++n_sens;
            for (std::size_t k = 0; k < kBins; ++k) t.sensitivity_mean[k] += sens[b * kBins + k];
        }
        if (spec_ok[b]) {
            ++n_spec;
            for (std::size_t k = 0; k < kBins; ++k) t.specificity_mean[k] += spec[b * kBins + k];
        }
    }
    if (n_sens == 0 || n_spec == 0)
        throw DataError("cannot tune: no resample contained both duplicate and distinct pairs");
    for (std::size_t k = 0; k < kBins; ++k) {
        t.sensitivity_mean[k] /= static_cast<double>(n_sens);
        t.specificity_mean[k] /= static_cast<double>(n_spec);
    }

    double best = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < kBins; ++k) {
        const double gap = std::abs(t.sensitivity_mean[k] - t.specificity_mean[k]);
        if (gap <= best) {  // ties go to the higher threshold
            best = gap;
            t.chosen_index = k;
        }
    }
    t.chosen_threshold = t.threshold_grid[t.chosen_index];
    t.bootstrap_n = bootstrap_n;
    t.sample_size = sample_size;
    t.seed = seed;
    return t;
}

namespace {

struct UnionFind {
    std::vector<std::size_t> parent;
    explicit UnionFind(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
    std::size_t find(std::size_t x) {
        while (parent[x] != x) {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        return x;
    }
    void unite(std::size_t a, std::size_t b) {
        a = find(a);
        b = find(b);
        if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
};

}  // namespace

std::vector<std::int64_t> assign_duplicate_ids(const SimilarityMatrix& m, double threshold,
                                               std::span<const std::optional<Timestamp>> timestamps) {
    if (!(threshold >= 0.0)) throw UsageError("threshold must be >= 0");
    if (threshold < m.storage_floor())
        throw UsageError("threshold below the similarity matrix storage floor");
    if (!timestamps.empty() && timestamps.size() != m.size())
        throw UsageError("timestamps must align with the similarity matrix");

    const std::size_t n = m.size();
    UnionFind uf(n);
    for (std::size_t i = 0; i < n; ++i)
        for (const auto& e : m.row(i))
            if (e.score >= threshold) uf.unite(i, e.col);

    // Order components by (earliest timestamp, first row).
    struct Key {
        bool dated = false;
        Timestamp earliest = 0;
        std::size_t first_row = 0;
    };
    std::unordered_map<std::size_t, Key> keys;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t root = uf.find(i);
        auto [it, inserted] = keys.try_emplace(root, Key{false, 0, i});
        if (!timestamps.empty() && timestamps[i]) {
            if (!it->second.dated || *timestamps[i] < it->second.earliest) {
                it->second.dated = true;
                it->second.earliest = *timestamps[i];
            }
        }
    }
    std::vector<std::pair<Key, std::size_t>> order;
    for (const auto& [root, key] : keys) order.emplace_back(key, root);
    std::sort(order.begin(), order.end(), [](const auto& a, const auto& b) {
        if (a.first.dated != b.first.dated) return a.first.dated;
        if (a.first.dated && a.first.earliest != b.first.earliest)
            return a.first.earliest < b.first.earliest;
        return a.first.first_row < b.first.first_row;
    });
    std::unordered_map<std::size_t, std::int64_t> dense;
    for (std::size_t k = 0; k < order.size(); ++k)
        dense[order[k].second] = static_cast<std::int64_t>(k);

    std::vector<std::int64_t> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = dense[uf.find(i)];
    return out;
}

std::string_view to_string(DurationClass c) {
    switch (c) {
        case DurationClass::SingleDay: return "SINGLE-DAY";
        case DurationClass::Short: return "SHORT";
        case DurationClass::Long: return "LONG";
    }
    return "?";
}

DurationClass classify_duration(double days) {
    if (days <= 1.0) return DurationClass::SingleDay;
    if (days <= 100.0) return DurationClass::Short;
    return DurationClass::Long;
}

std::vector<CampaignCluster> campaigns(std::span<const corpus::Email> emails) {
    std::map<std::int64_t, CampaignCluster> by_id;
    for (const auto& e : emails) {
        if (!e.duplicate_id) throw DataError("email " + e.id + " has no duplicate_id");
        auto& c = by_id[*e.duplicate_id];
        c.duplicate_id = *e.duplicate_id;
        c.member_ids.push_back(e.id);
        ++c.samples;
        if (e.date) {
            if (!c.first_seen || *e.date < *c.first_seen) c.first_seen = e.date;
            if (!c.last_seen || *e.date > *c.last_seen) c.last_seen = e.date;
        }
    }
    std::vector<CampaignCluster> out;
    for (auto& [id, c] : by_id) {
        if (c.first_seen)
            c.duration_days = static_cast<double>(*c.last_seen - *c.first_seen) / kSecondsPerDay;
        c.duration_class = classify_duration(c.duration_days);
        out.push_back(std::move(c));
    }
    return out;
}

void write_campaigns_csv(const std::filesystem::path& path,
                         std::span<const CampaignCluster> clusters) {
    csv::Writer w(path);
    w.row({"duplicate_id", "samples", "first_seen", "last_seen", "duration_days",
           "duration_class", "member_ids"});
    for (const auto& c : clusters) {
        std::string members;
        for (std::size_t i = 0; i < c.member_ids.size(); ++i) {
            if (i) members += ';';
            members += c.member_ids[i];
        }
        w.row({std::to_string(c.duplicate_id), std::to_string(c.samples),
               c.first_seen ? format_iso8601(*c.first_seen) : "",
               c.last_seen ? format_iso8601(*c.last_seen) : "", csv::fmt(c.duration_days),
               std::string(to_string(c.duration_class)), members});
    }
}

}  // namespace phishtriage::dedup
