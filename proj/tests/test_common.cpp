#include <doctest.h>

#include <cmath>
#include <set>

#include "phishtriage/common.hpp"
#include "phishtriage/config.hpp"
#include "phishtriage/csv.hpp"
#include "phishtriage/parallel.hpp"
#include "support.hpp"

using namespace phishtriage;
using testsupport::Gen;

TEST_CASE("iso8601 round trip over random timestamps") {
    const auto bad = testsupport::for_all(500, 7, [](Gen& g) {
        const Timestamp t = g.integer(0, 4102444800LL);  // 1970..2100
        const auto back = parse_iso8601(format_iso8601(t));
        return back && *back == t;
    });
    CHECK(bad == SIZE_MAX);
    CHECK(format_iso8601(days_from_civil_utc(2018, 2, 1)) == "2018-02-01T00:00:00Z");
    CHECK(days_from_civil_utc(1970, 1, 2) == 86400);
    CHECK_FALSE(parse_iso8601("2018-13-01T00:00:00Z"));
    CHECK_FALSE(parse_iso8601("not a date"));
}

TEST_CASE("derived seeds are stable and distinct") {
    CHECK(derive_seed(1, 0) == derive_seed(1, 0));
    std::set<std::uint64_t> seen;
    for (std::uint64_t s = 0; s < 1000; ++s) seen.insert(derive_seed(42, s));
    CHECK(seen.size() == 1000);
    CHECK(derive_seed(1, std::string_view("a")) != derive_seed(1, std::string_view("b")));
}

TEST_CASE("uniform_index stays in range and covers it") {
    Rng rng = make_rng(3, 0);
    std::vector<int> hits(7, 0);
    for (int i = 0; i < 7000; ++i) {
        const auto k = uniform_index(rng, 7);
        REQUIRE(k < 7);
        ++hits[k];
    }
    for (int h : hits) CHECK(h > 800);
    for (int i = 0; i < 1000; ++i) {
        const double u = uniform01(rng);
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("stats helpers against direct formulas") {
    const std::vector<double> xs{2, 4, 4, 4, 5, 5, 7, 9};
    CHECK(stats::mean(xs) == doctest::Approx(5.0));
    // sample variance: sum of squared deviations 32 over 7
    CHECK(stats::sd(xs) == doctest::Approx(std::sqrt(32.0 / 7.0)));
    CHECK(stats::quantile(xs, 0.5) == doctest::Approx(4.5));
    CHECK(stats::quantile(xs, 0.0) == doctest::Approx(2.0));
    CHECK(stats::quantile(xs, 1.0) == doctest::Approx(9.0));
    // type 7: h = 7 * 0.25 = 1.75 -> 4 + 0.75 * 0
    CHECK(stats::quantile(xs, 0.25) == doctest::Approx(4.0));

    const std::vector<double> a{1, 2, 3, 4, 5}, b{2, 4, 6, 8, 10}, c{5, 4, 3, 2, 1}, k{3, 3, 3, 3, 3};
    CHECK(*stats::pearson(a, b) == doctest::Approx(1.0));
    CHECK(*stats::pearson(a, c) == doctest::Approx(-1.0));
    CHECK_FALSE(stats::pearson(a, k));
    const std::vector<double> sq{1, 4, 9, 16, 25};
    CHECK(*stats::spearman(a, sq) == doctest::Approx(1.0));
    const auto r = stats::ranks(std::vector<double>{10, 20, 20, 30});
    CHECK(r == std::vector<double>{1, 2.5, 2.5, 4});
}

TEST_CASE("round_half_up and string helpers") {
    CHECK(round_half_up(2.5) == 3);
    CHECK(round_half_up(2.4999) == 2);
    CHECK(round_half_up(0.5) == 1);
    CHECK(trim("  a b \t") == "a b");
    CHECK(split("a,,b", ',') == std::vector<std::string>{"a", "", "b"});
    CHECK(iequals("AbC", "aBc"));
    CHECK(to_lower_ascii("MiXeD") == "mixed");
}

TEST_CASE("parallel_for gives the same result for any worker count") {
    std::vector<std::uint64_t> one(1000), many(1000);
    parallel_for(one.size(), [&](std::size_t i) { one[i] = derive_seed(9, i); }, 1);
    parallel_for(many.size(), [&](std::size_t i) { many[i] = derive_seed(9, i); }, 4);
    CHECK(one == many);
    CHECK_THROWS_AS(parallel_for(10, [](std::size_t i) { if (i == 7) throw DataError("x"); }, 3), DataError);
}

TEST_CASE("csv parse handles quotes, separators and newlines") {
    const auto t = csv::Table::parse("a,b\n\"x,1\",\"he said \"\"hi\"\"\"\n\"multi\nline\",2\n");
    REQUIRE(t.rows() == 2);
    CHECK(t.at(0, "a") == "x,1");
    CHECK(t.at(0, "b") == "he said \"hi\"");
    CHECK(t.at(1, "a") == "multi\nline");
    CHECK(t.number(1, "b") == 2.0);
    CHECK_THROWS_AS(t.number(0, "a"), DataError);
    CHECK_THROWS_AS(t.column("zzz"), DataError);

    const auto bad = testsupport::for_all(300, 11, [](Gen& g) {
        const double v = g.real(-1e6, 1e6) * (g.coin() ? 1e-9 : 1.0);
        return std::stod(csv::fmt(v)) == v;
    });
    CHECK(bad == SIZE_MAX);
    CHECK(csv::fmt(std::nan("")) == "NA");
}

TEST_CASE("key-value config parsing") {
    const auto kv = app::KeyValueFile::parse("# comment\n a = 1 \nlist = x, y ,z\n\nname = hello world\n");
    CHECK(kv.integer("a") == 1);
    CHECK(kv.list("list") == std::vector<std::string>{"x", "y", "z"});
    CHECK(kv.get("name") == "hello world");
    CHECK(kv.number_or("missing", 2.5) == 2.5);
    CHECK_THROWS_AS(kv.get("missing"), Error);
    CHECK_THROWS_AS(app::KeyValueFile::parse("no equals sign here\n"), Error);
}

TEST_CASE("pipeline config requires version and seeds") {
    const std::string base =
        "config_version = 1\norg_name = org\norg_domains = org.com\ndedup.threshold = 0.5\n"
        "llda.model = m.json\nllda.seed = 1\nurls.seed = 2\nbootstrap.seed = 3\npredict.seed = 4\n"
        "urls.fixture = f.txt\nclicks = c.csv\n";
    testsupport::TempDir dir("cfg");
    for (const char* f : {"m.json", "f.txt", "c.csv"}) testsupport::write_text(dir / f, "");
    const auto ok = app::pipeline_config_from(app::KeyValueFile::parse(base), dir.path());
    CHECK(ok.org_name == "org");
    CHECK(ok.org_domains.count("org.com") == 1);
    CHECK(ok.bootstrap_seed == 3);
    CHECK(ok.llda_model->filename() == "m.json");

    CHECK_THROWS_AS(app::pipeline_config_from(app::KeyValueFile::parse("config_version = 2\n"), dir.path()), UsageError);
    std::string no_seed = base;
    no_seed.replace(no_seed.find("predict.seed = 4\n"), 17, "");
    CHECK_THROWS_AS(app::pipeline_config_from(app::KeyValueFile::parse(no_seed), dir.path()), UsageError);
    std::string missing_file = base;
    missing_file.replace(missing_file.find("clicks = c.csv"), 14, "clicks = nope.csv");
    CHECK_THROWS_AS(app::pipeline_config_from(app::KeyValueFile::parse(missing_file), dir.path()), UsageError);
    CHECK_THROWS_AS(app::pipeline_config_from(app::KeyValueFile::parse(base + "unknown.key = 1\n"), dir.path()),
                    UsageError);
}
