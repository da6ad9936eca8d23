#include <doctest.h>

#include <map>

#include "phishtriage/dedup.hpp"
#include "phishtriage/synth.hpp"
#include "phishtriage/parallel.hpp"
#include "support.hpp"

using namespace phishtriage;
using namespace phishtriage::dedup;
using testsupport::Gen;

namespace {

std::vector<textproc::TfVector> vectors(const std::vector<textproc::TokenDoc>& docs) {
    const auto vocab = textproc::Vocabulary::build(docs);
    std::vector<textproc::TfVector> out;
    for (const auto& d : docs) out.push_back(textproc::tf_vector(d, vocab, true));
    return out;
}

std::vector<textproc::TokenDoc> random_docs(Gen& g, std::size_t n) {
    std::vector<textproc::TokenDoc> docs;
    for (std::size_t i = 0; i < n; ++i) docs.push_back({"d" + std::to_string(i), g.words(g.index(12), 8)});
    return docs;
}

// Same partition up to relabeling.
bool same_partition(const std::vector<std::int64_t>& a, const std::vector<std::size_t>& b) {
    std::map<std::int64_t, std::size_t> ab;
    std::map<std::size_t, std::int64_t> ba;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (ab.emplace(a[i], b[i]).first->second != b[i]) return false;
        if (ba.emplace(b[i], a[i]).first->second != a[i]) return false;
    }
    return true;
}

}  // namespace

TEST_CASE("similarity matrix agrees with dense cosine above the floor") {
    const auto bad = testsupport::for_all(60, 21, [](Gen& g) {
        const auto docs = random_docs(g, 2 + g.index(25));
        const auto vecs = vectors(docs);
        const double floor = g.coin() ? 0.0 : 0.3;
        const auto m = similarity_matrix(vecs, floor);
        for (std::size_t i = 0; i < docs.size(); ++i)
            for (std::size_t j = 0; j < docs.size(); ++j) {
                const double oracle = testsupport::dense_cosine(docs[i].tokens, docs[j].tokens);
                const double expect = (i == j && !docs[i].tokens.empty()) ? 1.0 : (oracle >= floor ? oracle : 0.0);
                if (i != j && std::abs(m.score(i, j) - expect) > 1e-12) return false;
                if (m.score(i, j) != m.score(j, i)) return false;
            }
        return true;
    });
    CHECK(bad == SIZE_MAX);
}

TEST_CASE("duplicate ids match brute-force connected components") {
    const auto bad = testsupport::for_all(80, 23, [](Gen& g) {
        const auto docs = random_docs(g, 1 + g.index(30));
        const auto vecs = vectors(docs);
        const auto m = similarity_matrix(vecs, 0.05);
        const double t = 0.05 + g.real(0.0, 0.9);
        const auto ids = assign_duplicate_ids(m, t);
        std::vector<std::vector<double>> dense(docs.size(), std::vector<double>(docs.size()));
        for (std::size_t i = 0; i < docs.size(); ++i)
            for (std::size_t j = 0; j < docs.size(); ++j) dense[i][j] = i == j ? 1.0 : m.score(i, j);
        return same_partition(ids, testsupport::brute_components(dense, t));
    });
    CHECK(bad == SIZE_MAX);
}

TEST_CASE("duplicate ids are dense and ordered by earliest timestamp") {
    const std::vector<textproc::TokenDoc> docs{
        {"a", {"x", "y"}}, {"b", {"p", "q"}}, {"c", {"x", "y"}}, {"d", {"r"}}, {"e", {}}};
    const auto m = similarity_matrix(vectors(docs));
    const std::vector<std::optional<Timestamp>> ts{500, 100, 50, std::nullopt, 10};
    const auto ids = assign_duplicate_ids(m, 0.9, ts);
    // components: {a,c} earliest 50, {b} 100, {e} 10, {d} undated
    CHECK(ids == std::vector<std::int64_t>{1, 2, 1, 3, 0});
    CHECK(assign_duplicate_ids(m, 0.9) == std::vector<std::int64_t>{0, 1, 0, 2, 3});
    CHECK_THROWS_AS(assign_duplicate_ids(m, 0.01), UsageError);
}

TEST_CASE("threshold grid binning") {
    CHECK(grid_bin(0.0) == 0);
    CHECK(grid_bin(0.29) == 29);
    CHECK(grid_bin(0.3) == 30);
    CHECK(grid_bin(1.0) == 100);
    CHECK(grid_bin(0.999999) == 99);
    const auto bad = testsupport::for_all(1000, 29, [](Gen& g) {
        const double s = g.real(0.0, 1.0);
        const auto k = grid_bin(s);
        return s >= k / 100.0 && (k == 100 || s < (k + 1) / 100.0);
    });
    CHECK(bad == SIZE_MAX);
}

TEST_CASE("bootstrap tuning tracks the exhaustive grid and is deterministic") {
    const auto fc = app::synth_family_corpus(12, 5, 60, 800, 0.05, 77);
    const auto vecs = vectors(fc.docs);
    const auto t1 = tune_threshold(fc.labels, vecs, 400, 60, 5);
    const auto t2 = tune_threshold(fc.labels, vecs, 400, 60, 5);
    CHECK(t1 == t2);
    set_default_workers(3);
    CHECK(tune_threshold(fc.labels, vecs, 400, 60, 5) == t1);
    set_default_workers(1);

    std::vector<std::vector<double>> dense(vecs.size(), std::vector<double>(vecs.size()));
    std::vector<std::string> groups;
    for (std::size_t i = 0; i < vecs.size(); ++i) {
        groups.push_back(fc.labels[i].group_id);
        for (std::size_t j = 0; j < vecs.size(); ++j) dense[i][j] = textproc::cosine(vecs[i], vecs[j]);
    }
    const auto grid = testsupport::exhaustive_grid(dense, groups);
    CHECK(std::abs(t1.chosen_threshold - grid.threshold) <= 0.05);
    for (std::size_t k = 0; k + 1 < t1.sensitivity_mean.size(); ++k) {
        CHECK(t1.sensitivity_mean[k] >= t1.sensitivity_mean[k + 1] - 1e-12);
        CHECK(t1.specificity_mean[k] <= t1.specificity_mean[k + 1] + 1e-12);
    }
    CHECK(t1.chosen_sensitivity() >= 0.9);
    CHECK(t1.chosen_specificity() >= 0.9);

    CHECK_THROWS_AS(tune_threshold(fc.labels, vecs, 0, 10, 1), UsageError);
    CHECK_THROWS_AS(tune_threshold(fc.labels, vecs, 10, 1, 1), UsageError);
    std::vector<LabeledDoc> one_class{{fc.labels[0].email_id, "g"}, {fc.labels[1].email_id, "g"}};
    CHECK_THROWS_AS(tune_threshold(one_class, vecs, 10, 2, 1), DataError);
}

TEST_CASE("family corpus: intra-family cosine exceeds inter-family on average") {
    const auto fc = app::synth_family_corpus(20, 5, 60, 800, 0.05, 3);
    const auto vecs = vectors(fc.docs);
    double intra = 0, inter = 0;
    std::size_t ni = 0, nx = 0;
    for (std::size_t i = 0; i < vecs.size(); ++i)
        for (std::size_t j = i + 1; j < vecs.size(); ++j) {
            const double c = textproc::cosine(vecs[i], vecs[j]);
            if (fc.labels[i].group_id == fc.labels[j].group_id) intra += c, ++ni;
            else inter += c, ++nx;
        }
    CHECK(intra / ni > inter / nx + 0.3);
}

TEST_CASE("campaign durations and classes") {
    CHECK(classify_duration(0.0) == DurationClass::SingleDay);
    CHECK(classify_duration(1.0) == DurationClass::SingleDay);
    CHECK(classify_duration(1.5) == DurationClass::Short);
    CHECK(classify_duration(100.0) == DurationClass::Short);
    CHECK(classify_duration(100.5) == DurationClass::Long);

    std::vector<corpus::Email> es;
    auto add = [&](std::string id, std::int64_t dup, std::optional<Timestamp> t) {
        auto e = corpus::make_email(std::move(id), "a@b.c", "t", t, "s", "b");
        e.duplicate_id = dup;
        es.push_back(e);
    };
    add("x1", 0, 0);
    add("x2", 0, static_cast<Timestamp>(3 * kSecondsPerDay));
    add("x3", 0, std::nullopt);
    add("y1", 1, 1000);
    const auto cs = campaigns(es);
    REQUIRE(cs.size() == 2);
    CHECK(cs[0].samples == 3);
    CHECK(cs[0].duration_days == doctest::Approx(3.0));
    CHECK(cs[0].duration_class == DurationClass::Short);
    CHECK(cs[1].duration_class == DurationClass::SingleDay);
    es.push_back(corpus::make_email("z", "a@b.c", "t", std::nullopt, "s", "b"));
    CHECK_THROWS_AS(campaigns(es), DataError);
}
