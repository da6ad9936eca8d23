#include <doctest.h>

#include <fstream>
#include <sstream>

#include "phishtriage/textproc.hpp"
#include "support.hpp"

using namespace phishtriage;
using namespace phishtriage::textproc;
using testsupport::Gen;

TEST_CASE("hand-tokenized fixture") {
    const auto cfg = TokenizerConfig::english();
    const auto doc = clean_and_tokenize(
        "Dear customer, your account has been SUSPENDED! Visit http://evil.example/login or mail "
        "help@bank.com before Friday.",
        cfg, "e1");
    CHECK(doc.email_id == "e1");
    // stopwords your/has/been/or/before dropped; URL and address removed;
    // customer -> custom, suspended -> suspend, friday -> fridai
    CHECK(doc.tokens == std::vector<std::string>{"dear", "custom", "account", "suspend", "visit", "mail", "fridai"});

    auto raw = TokenizerConfig::english();
    raw.stemmer = "none";
    CHECK(clean_and_tokenize("Ünïcode-Wörds 42 go www.x.org here", raw).tokens ==
          std::vector<std::string>{"ünïcode", "wörds", "go"});
    raw.keep_digits = true;
    CHECK(clean_and_tokenize("code 42 b2b", raw).tokens == std::vector<std::string>{"code", "42", "b2b"});
}

TEST_CASE("NFC normalization merges composed and decomposed forms") {
    auto cfg = TokenizerConfig::english();
    cfg.stemmer = "none";
    const auto a = clean_and_tokenize("caf\xC3\xA9", cfg);   // precomposed
    const auto b = clean_and_tokenize("cafe\xCC\x81", cfg);  // e + combining acute
    CHECK(a.tokens == b.tokens);
}

TEST_CASE("porter stemmer matches the reference vocabulary") {
    std::ifstream in(std::string(FIXTURE_DIR) + "/porter_pairs.txt");
    REQUIRE(in);
    std::string line;
    std::size_t n = 0, mismatches = 0;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        std::istringstream ss(line);
        std::string word, expected;
        ss >> word >> expected;
        ++n;
        if (porter_stem(word) != expected) {
            if (++mismatches <= 10) MESSAGE(word << " -> " << porter_stem(word) << " expected " << expected);
        }
    }
    CHECK(n > 5000);
    CHECK(mismatches == 0);
}

TEST_CASE("tokenizing joined tokens is the identity") {
    const auto cfg = TokenizerConfig::english();
    static const std::vector<std::string> words{"generalizations", "relational", "urgently", "verification",
                                                "accounts", "happy", "the", "running", "conditional",
                                                "electrical", "ponies", "agreed", "immediately", "hopefulness"};
    const auto bad = testsupport::for_all(300, 5, [&](Gen& g) {
        std::string text;
        const auto n = g.index(30);
        for (std::size_t i = 0; i < n; ++i) text += words[g.index(words.size())] + (g.coin() ? " " : ", ");
        const auto once = clean_and_tokenize(text, cfg);
        std::string joined;
        for (const auto& t : once.tokens) joined += t + " ";
        return clean_and_tokenize(joined, cfg).tokens == once.tokens;
    });
    CHECK(bad == SIZE_MAX);
}

TEST_CASE("levenshtein properties") {
    CHECK(levenshtein("kitten", "sitting") == 3);
    CHECK(levenshtein("", "abc") == 3);
    CHECK(levenshtein("acmebank", "acmebank") == 0);
    CHECK(levenshtein("é", "e") == 1);  // code points, not bytes
    const auto bad = testsupport::for_all(2000, 13, [](Gen& g) {
        const auto a = g.unicode_string(8), b = g.unicode_string(8), c = g.unicode_string(8);
        const auto ab = levenshtein(a, b);
        const std::size_t la = utf8_length(a), lb = utf8_length(b);
        return ab == levenshtein(b, a) && ab <= levenshtein(a, c) + levenshtein(c, b) &&
               ab >= (la > lb ? la - lb : lb - la) && ab <= std::max(la, lb) &&
               ab == testsupport::levenshtein_recursive(utf8_to_u32(a), utf8_to_u32(b));
    });
    CHECK(bad == SIZE_MAX);
}

TEST_CASE("cosine against dense oracle") {
    const auto bad = testsupport::for_all(500, 17, [](Gen& g) {
        TokenDoc a{"a", g.words(g.index(40), 15)};
        TokenDoc b{"b", g.words(g.index(40), 15)};
        const std::vector<TokenDoc> docs{a, b};
        const auto vocab = Vocabulary::build(docs);
        const auto va = tf_vector(a, vocab, true), vb = tf_vector(b, vocab, true);
        const double c = cosine(va, vb);
        return std::abs(c - testsupport::dense_cosine(a.tokens, b.tokens)) < 1e-12 && c >= 0.0 && c <= 1.0 &&
               std::abs(c - cosine(vb, va)) < 1e-15;
    });
    CHECK(bad == SIZE_MAX);

    const Vocabulary v(std::vector<std::string>{"x", "y"});
    const auto empty = tf_vector(TokenDoc{"e", {}}, v, true);
    const auto x = tf_vector(TokenDoc{"x", {"x", "x"}}, v, true);
    CHECK(empty.empty());
    CHECK(cosine(empty, x) == 0.0);
    CHECK(cosine(x, x) == 1.0);
    CHECK(x.norm() == doctest::Approx(1.0));
}

TEST_CASE("vocabulary is sorted and unique") {
    const std::vector<TokenDoc> docs{{"1", {"b", "a", "b"}}, {"2", {"c", "a"}}};
    const auto v = Vocabulary::build(docs);
    CHECK(v.tokens() == std::vector<std::string>{"a", "b", "c"});
    CHECK(*v.id("c") == 2);
    CHECK_FALSE(v.id("zz"));
}

TEST_CASE("word lists ignore comments and blanks") {
    testsupport::TempDir dir("words");
    testsupport::write_text(dir / "w.txt", "# header\nfoo\n\n  bar \n");
    const auto w = load_word_list(dir / "w.txt");
    CHECK(w.size() == 2);
    CHECK(w.count("bar") == 1);
    CHECK_THROWS_AS(load_word_list(dir / "missing.txt"), DataError);
    CHECK_THROWS_AS(stem("x", TokenizerConfig{"snowball", {}, false}), UsageError);
}
