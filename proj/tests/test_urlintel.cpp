#include <doctest.h>

#include <thread>

#include <httplib.h>

#include "phishtriage/urlintel.hpp"
#include "phishtriage/parallel.hpp"
#include "support.hpp"

using namespace phishtriage;
using namespace phishtriage::urlintel;
using testsupport::Gen;

TEST_CASE("url canonicalization") {
    CHECK(canonicalize("HTTP://Evil.EXAMPLE/Path?q=A#frag") == "http://evil.example/Path?q=A");
    CHECK(canonicalize("www.Site.org/x") == "http://www.site.org/x");
    CHECK(canonicalize("https://user:pw@Host.com:8443/a") == "https://host.com:8443/a");
    CHECK(host_of("https://a.b.example.co.uk/x") == "a.b.example.co.uk");
    CHECK(registrable_domain("a.b.example.co.uk") == "example.co.uk");
    CHECK(registrable_domain("login.acmebank.com") == "acmebank.com");
    CHECK(registrable_domain("localhost") == "localhost");
    const auto bad = testsupport::for_all(300, 31, [](Gen& g) {
        const std::string url = std::string(g.coin() ? "HTTP" : "https") + "://" + g.string("abcXYZ.", 10) + "x.com/" +
                                g.string("aB/?=&#", 8);
        const auto c = canonicalize(url);
        return canonicalize(c) == c && c.find('#') == std::string::npos;
    });
    CHECK(bad == SIZE_MAX);
}

TEST_CASE("url extraction trims trailing punctuation") {
    const auto urls = extract_urls("Go to http://a.com/x. Or (www.b.org/y), or <https://c.net/z?a=1>! Also http://a.com/x");
    CHECK(urls == std::vector<std::string>{"http://a.com/x", "www.b.org/y", "https://c.net/z?a=1", "http://a.com/x"});
    CHECK(extract_urls("no links here").empty());
}

TEST_CASE("suspicious urls exclude org-owned and allowlisted domains") {
    auto e = corpus::make_email("e1", "a@x.com", "t", std::nullopt, "s",
                                "https://www.acme.com/help https://login.acme.com/ http://evil.top/p "
                                "https://youtube.com/watch?v=1 http://acme.com.evil.net/");
    const auto s = extract_suspicious(e, {"acme.com"}, {"youtube.com"});
    REQUIRE(s.size() == 2);
    CHECK(s[0].url == "http://evil.top/p");
    CHECK(s[0].domain == "evil.top");
    CHECK(s[1].domain == "evil.net");
    CHECK(e.suspicious);
    auto clean = corpus::make_email("e2", "a@x.com", "t", std::nullopt, "s", "https://acme.com/");
    CHECK(extract_suspicious(clean, {"acme.com"}, {}).empty());
    CHECK_FALSE(clean.suspicious);
}

TEST_CASE("fixture resolver: deterministic walks, loops and depth limit") {
    const auto fx = RedirectFixture::parse(
        "http://s.top/a -> http://hop.top/1\n"
        "http://hop.top/1 -> http://land.top/x 0.7\n"
        "http://hop.top/1 -> http://land.top/y 0.3\n"
        "# loop\n"
        "http://loop.top/a -> http://loop.top/b\n"
        "http://loop.top/b -> http://loop.top/a\n");
    CHECK(fx.size() == 4);
    const auto r = fixture_resolver(fx, 7);
    CHECK(r("http://nothing.top/", 0) == "http://nothing.top/");
    CHECK(r("http://loop.top/a", 0) == kUnresolved);
    const auto rec = resolve_redirects("http://s.top/a", r, 50);
    CHECK(rec.visits == 50);
    CHECK(rec.landing_urls == std::set<std::string>{"http://land.top/x", "http://land.top/y"});
    CHECK(resolve_redirects("http://s.top/a", r, 50) == rec);
    CHECK(fixture_resolver(fx, 7, 1)("http://s.top/a", 0) == kUnresolved);

    // A longer chain than the depth limit.
    RedirectFixture chain;
    for (int i = 0; i < 12; ++i)
        chain.add("http://c.top/" + std::to_string(i), "http://c.top/" + std::to_string(i + 1));
    CHECK(fixture_resolver(chain, 1)("http://c.top/0", 0) == kUnresolved);
    CHECK(fixture_resolver(chain, 1, 20)("http://c.top/0", 0) == "http://c.top/12");
    CHECK(RedirectFixture::parse(chain.serialize()).serialize() == chain.serialize());
    CHECK_THROWS_AS(RedirectFixture::parse("bad line\n"), DataError);
}

TEST_CASE("resolve_all merges prior records and follows input order") {
    RedirectFixture fx;
    fx.add("http://a.top/", "http://l.top/1");
    const std::vector<std::string> urls{"http://b.top/", "http://a.top/"};
    const std::vector<RedirectRecord> prior{{"http://a.top/", {"http://old.top/"}, 2}};
    set_default_workers(2);
    const auto recs = resolve_all(urls, fixture_resolver(fx, 1), 3, prior);
    set_default_workers(1);
    REQUIRE(recs.size() == 2);
    CHECK(recs[0].suspicious_url == "http://b.top/");
    CHECK(recs[1].landing_urls == std::set<std::string>{"http://l.top/1", "http://old.top/"});
    CHECK(recs[1].visits == 5);
    const auto m = merge(recs[1], RedirectRecord{"http://a.top/", {"http://z.top/"}, 1});
    CHECK(m.landing_urls.size() == 3);
    CHECK(m.visits == 6);
}

TEST_CASE("click matching keeps the latest observation and aggregates per email") {
    const std::vector<SuspiciousUrl> s{{"e1", "http://s.top/1", "s.top"}, {"e1", "http://s.top/2", "s.top"},
                                       {"e2", "http://s.top/3", "s.top"}, {"e3", "http://s.top/4", "s.top"}};
    const std::vector<RedirectRecord> r{{"http://s.top/1", {"http://l.top/a", "http://l.top/b"}, 3},
                                        {"http://s.top/2", {"http://L.TOP/a"}, 3},
                                        {"http://s.top/3", {std::string(kUnresolved)}, 3},
                                        {"http://s.top/4", {"http://l.top/none"}, 3}};
    const std::vector<ClickRecord> c{{"http://l.top/a", 5, 100}, {"http://l.top/a", 9, 200},
                                     {"http://l.top/b", 20, 50}, {"http://l.top/a", 1, 150},
                                     {"http://unrelated.top/", 99, 10}};
    const auto m = match_clicks(s, r, c);
    REQUIRE(m.size() == 1);
    CHECK(m[0].email_id == "e1");
    CHECK(m[0].matched_landing_count == 2);
    CHECK(m[0].clicks_sum == 29);
    CHECK(m[0].clicks_max == 20);
    CHECK(m[0].clicks_avg == doctest::Approx(14.5));
    CHECK(aggregate(m[0], Strategy::Sum) == 29.0);
    CHECK(aggregate(m[0], Strategy::Max) == 20.0);
    CHECK_THROWS_AS(parse_strategy("median"), UsageError);
}

TEST_CASE("csv and jsonl round trips") {
    testsupport::TempDir dir("url");
    const std::vector<ClickRecord> c{{"http://l.top/a,b", 5, 100}};
    write_clicks_csv(dir / "c.csv", c);
    const auto back = read_clicks_csv(dir / "c.csv");
    REQUIRE(back.size() == 1);
    CHECK(back[0].landing_url == "http://l.top/a,b");
    CHECK(back[0].observed_at == 100);
    const std::vector<RedirectRecord> r{{"http://s/", {"http://a/", "unresolved"}, 4}};
    write_redirects_jsonl(dir / "r.jsonl", r);
    CHECK(read_redirects_jsonl(dir / "r.jsonl") == r);
    const std::vector<SuspiciousUrl> s{{"e", "http://s/", "s"}};
    write_suspicious_csv(dir / "s.csv", s);
    CHECK(read_suspicious_csv(dir / "s.csv") == s);
    testsupport::write_text(dir / "bad.csv", "landing_url,clicks,observed_at\nx,-1,0\n");
    CHECK_THROWS_AS(read_clicks_csv(dir / "bad.csv"), DataError);
}

TEST_CASE("spoof distance") {
    CHECK(normalize_for_spoof("AcmeBank.com") == "acmebank");
    CHECK(spoof_distance("acmebank.com", "acmebank") == 0);
    CHECK(spoof_distance("acmebank-ab.com", "acmebank") == 3);
    CHECK(spoof_distance("acrnebank.net", "acmebank.com") == 2);
    const auto bad = testsupport::for_all(300, 37, [](Gen& g) {
        const auto d = g.string("abcdefgh", 10);
        return spoof_distance(d + ".com", "org") == textproc::levenshtein(d, "org");
    });
    CHECK(bad == SIZE_MAX);
}

TEST_CASE("live resolver follows HTTP redirects on a local server") {
    httplib::Server srv;
    srv.Get("/start", [](const httplib::Request&, httplib::Response& res) { res.set_redirect("/hop", 302); });
    srv.Get("/hop", [](const httplib::Request&, httplib::Response& res) { res.set_redirect("/land", 301); });
    srv.Get("/land", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });
    srv.Get("/loop", [](const httplib::Request&, httplib::Response& res) { res.set_redirect("/loop", 302); });
    const int port = srv.bind_to_any_port("127.0.0.1");
    if (port <= 0) {
        MESSAGE("cannot bind a local port; live resolver test skipped");
        return;
    }
    std::thread t([&] { srv.listen_after_bind(); });
    srv.wait_until_ready();
    const std::string base = "http://127.0.0.1:" + std::to_string(port);
    LiveOptions opts;
    opts.timeout = std::chrono::milliseconds(2000);
    const auto r = live_resolver(opts);
    CHECK(r(base + "/start", 0) == base + "/land");
    CHECK(r(base + "/loop", 0) == kUnresolved);
    CHECK(r("http://127.0.0.1:1/unreachable", 0) == kUnresolved);
    srv.stop();
    t.join();
}
