#include "phishtriage/textproc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include "phishtriage/common.hpp"

namespace phishtriage::textproc {

const std::vector<std::string>& english_stopwords() {
    static const std::vector<std::string> words = {
        "a",       "about",   "above",  "after",  "again",   "against", "all",     "am",
        "an",      "and",     "any",    "are",    "as",      "at",      "be",      "because",
        "been",    "before",  "being",  "below",  "between", "both",    "but",     "by",
        "can",     "could",   "did",    "do",     "does",    "doing",   "down",    "during",
        "each",    "few",     "for",    "from",   "further", "had",     "has",     "have",
        "having",  "he",      "her",    "here",   "hers",    "herself", "him",     "himself",
        "his",     "how",     "i",      "if",     "in",      "into",    "is",      "it",
        "its",     "itself",  "just",   "me",     "more",    "most",    "my",      "myself",
        "no",      "nor",     "not",    "of",     "off",     "on",      "once",    "only",
        "or",      "other",   "our",    "ours",   "ourselves", "out",   "over",    "own",
        "same",    "she",     "should", "so",     "some",    "such",    "than",    "that",
        "the",     "their",   "theirs", "them",   "themselves", "then", "there",   "these",
        "they",    "this",    "those",  "through", "to",     "too",     "under",   "until",
        "up",      "very",    "was",    "we",     "were",    "what",    "when",    "where",
        "which",   "while",   "who",    "whom",   "why",     "will",    "with",    "would",
        "you",     "your",    "yours",  "yourself", "yourselves",
    };
    return words;
}

TokenizerConfig TokenizerConfig::english() {
    TokenizerConfig cfg;
    cfg.stopwords.insert(english_stopwords().begin(), english_stopwords().end());
    return cfg;
}

std::unordered_set<std::string> load_word_list(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read word list " + path.string());
    std::unordered_set<std::string> out;
    std::string line;
    while (std::getline(in, line)) {
        auto t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        out.insert(std::move(t));
    }
    return out;
}

namespace {

const icu::Normalizer2& nfc() {
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* n = icu::Normalizer2::getNFCInstance(status);
    if (U_FAILURE(status) || n == nullptr) throw Error("ICU NFC normalizer unavailable");
    return *n;
}

std::string to_nfc(std::string_view s) {
    UErrorCode status = U_ZERO_ERROR;
    const auto src = icu::UnicodeString::fromUTF8(icu::StringPiece(s.data(), static_cast<int32_t>(s.size())));
    const icu::UnicodeString norm = nfc().normalize(src, status);
    if (U_FAILURE(status)) return std::string(s);
    std::string out;
    norm.toUTF8String(out);
    return out;
}

bool is_url_chunk(std::string_view chunk) {
    if (chunk.find("://") != std::string_view::npos) return true;
    const auto lower = to_lower_ascii(chunk.substr(0, std::min<std::size_t>(chunk.size(), 8)));
    const auto p = lower.find_first_not_of("<([\"'");
    return p != std::string::npos && lower.compare(p, 4, "www.") == 0;
}

bool is_email_chunk(std::string_view chunk) {
    const auto at = chunk.find('@');
    if (at == std::string_view::npos || at == 0) return false;
    return chunk.find('.', at) != std::string_view::npos;
}

void append_utf8(std::string& out, UChar32 c) {
    char buf[U8_MAX_LENGTH];
    int32_t len = 0;
    UBool err = false;
    U8_APPEND(reinterpret_cast<uint8_t*>(buf), len, U8_MAX_LENGTH, c, err);
    if (!err) out.append(buf, static_cast<std::size_t>(len));
}

}  // namespace

std::string stem(std::string_view word, const TokenizerConfig& cfg) {
    if (cfg.stemmer == "none") return std::string(word);
    if (cfg.stemmer != "porter") throw UsageError("unknown stemmer '" + cfg.stemmer + "'");
    std::string cur(word);
    for (;;) {
        std::string next = porter_stem(cur);
        if (next == cur) return cur;
        cur = std::move(next);
    }
}

TokenDoc clean_and_tokenize(std::string_view body, const TokenizerConfig& cfg,
                            std::string email_id) {
    TokenDoc doc{std::move(email_id), {}};
    const std::string text = to_nfc(body);

    // Blank out URL and address chunks first, keeping the rest intact.
    std::string kept;
    kept.reserve(text.size());
    std::size_t i = 0;
    while (i < text.size()) {
        if (std::isspace(static_cast<unsigned char>(text[i]))) {
            kept.push_back(' ');
            ++i;
            continue;
        }
        std::size_t j = i;
        while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
        const std::string_view chunk(text.data() + i, j - i);
        if (!is_url_chunk(chunk) && !is_email_chunk(chunk)) kept.append(chunk);
        kept.push_back(' ');
        i = j;
    }

    auto flush = [&](std::string& tok) {
        if (tok.empty()) return;
        if (!cfg.stopwords.contains(tok)) {
            std::string s = stem(tok, cfg);
            if (!s.empty() && !cfg.stopwords.contains(s)) doc.tokens.push_back(std::move(s));
        }
        tok.clear();
    };

    std::string tok;
    const auto* bytes = reinterpret_cast<const uint8_t*>(kept.data());
    const auto len = static_cast<int32_t>(kept.size());
    int32_t pos = 0;
    while (pos < len) {
        UChar32 c;
        U8_NEXT(bytes, pos, len, c);
        if (c < 0) {
            flush(tok);
            continue;
        }
        if (u_isalpha(c) || (cfg.keep_digits && u_isdigit(c))) {
            append_utf8(tok, u_tolower(c));
        } else {
            flush(tok);
        }
    }
    flush(tok);
    return doc;
}

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    std::sort(tokens_.begin(), tokens_.end());
    tokens_.erase(std::unique(tokens_.begin(), tokens_.end()), tokens_.end());
    index_.reserve(tokens_.size());
    for (std::uint32_t i = 0; i < tokens_.size(); ++i) index_.emplace(tokens_[i], i);
}

Vocabulary Vocabulary::build(std::span<const TokenDoc> docs) {
    std::unordered_set<std::string> seen;
    for (const auto& d : docs) seen.insert(d.tokens.begin(), d.tokens.end());
    return Vocabulary(std::vector<std::string>(seen.begin(), seen.end()));
}

std::optional<std::uint32_t> Vocabulary::id(std::string_view token) const {
    const auto it = index_.find(std::string(token));
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

double TfVector::norm() const {
    double s = 0.0;
    for (const auto& tw : weights) s += tw.weight * tw.weight;
    return std::sqrt(s);
}

TfVector tf_vector(const TokenDoc& doc, const Vocabulary& vocab, bool normalize) {
    std::vector<std::uint32_t> ids;
    ids.reserve(doc.tokens.size());
    for (const auto& t : doc.tokens)
        if (auto id = vocab.id(t)) ids.push_back(*id);
    std::sort(ids.begin(), ids.end());

    TfVector v{doc.email_id, {}};
    for (std::size_t i = 0; i < ids.size();) {
        std::size_t j = i;
        while (j < ids.size() && ids[j] == ids[i]) ++j;
        v.weights.push_back({ids[i], static_cast<double>(j - i)});
        i = j;
    }
    if (normalize && !v.weights.empty()) {
        const double n = v.norm();
        for (auto& tw : v.weights) tw.weight /= n;
    }
    return v;
}

double dot(const TfVector& a, const TfVector& b) {
    double s = 0.0;
    auto ia = a.weights.begin();
    auto ib = b.weights.begin();
    while (ia != a.weights.end() && ib != b.weights.end()) {
        if (ia->term < ib->term) ++ia;
        else if (ib->term < ia->term) ++ib;
        else {
            s += ia->weight * ib->weight;
            ++ia;
            ++ib;
        }
    }
    return s;
}

double cosine(const TfVector& a, const TfVector& b) {
    const double na = a.norm();
    const double nb = b.norm();
    if (na == 0.0 || nb == 0.0) return 0.0;
    const double c = dot(a, b) / (na * nb);
    // identical directions score exactly 1 despite rounding
    if (c > 1.0 - 1e-12) return 1.0;
    return std::clamp(c, 0.0, 1.0);
}

std::u32string utf8_to_u32(std::string_view s) {
    std::u32string out;
    const auto* bytes = reinterpret_cast<const uint8_t*>(s.data());
    const auto len = static_cast<int32_t>(s.size());
    int32_t pos = 0;
    while (pos < len) {
        UChar32 c;
        U8_NEXT(bytes, pos, len, c);
        out.push_back(c < 0 ? U'\uFFFD' : static_cast<char32_t>(c));
    }
    return out;
}

std::size_t utf8_length(std::string_view s) { return utf8_to_u32(s).size(); }

namespace {

template <typename S>
std::size_t edit_distance(const S& x, const S& y) {
    thread_local std::vector<std::size_t> row;
    row.resize(y.size() + 1);
    for (std::size_t j = 0; j <= y.size(); ++j) row[j] = j;
    for (std::size_t i = 1; i <= x.size(); ++i) {
        std::size_t diag = row[0];
        row[0] = i;
        const auto xi = x[i - 1];
        for (std::size_t j = 1; j <= y.size(); ++j) {
            const std::size_t up = row[j];
            const std::size_t sub = diag + (xi == y[j - 1] ? 0 : 1);
            row[j] = std::min({up + 1, row[j - 1] + 1, sub});
            diag = up;
        }
    }
    return row[y.size()];
}

bool is_ascii(std::string_view s) {
    for (unsigned char c : s)
        if (c >= 0x80) return false;
    return true;
}

}  // namespace

std::size_t levenshtein(std::string_view a, std::string_view b) {
    if (is_ascii(a) && is_ascii(b)) return edit_distance(a, b);
    return edit_distance(utf8_to_u32(a), utf8_to_u32(b));
}

}  // namespace phishtriage::textproc
