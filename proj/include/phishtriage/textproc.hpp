#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace phishtriage::textproc {

struct TokenizerConfig {
    /// "porter" or "none".
    std::string stemmer = "porter";
    std::unordered_set<std::string> stopwords;
    /// Digits are part of the alphabet only when set; otherwise they split tokens.
    bool keep_digits = false;

    /// Porter stemming with the built-in English stopword list.
    static TokenizerConfig english();
};

const std::vector<std::string>& english_stopwords();

/// One token per line; blank lines and lines starting with '#' are ignored.
std::unordered_set<std::string> load_word_list(const std::filesystem::path& path);

struct TokenDoc {
    std::string email_id;
    std::vector<std::string> tokens;
};

/// NFC-normalizes, drops URLs, e-mail addresses and everything outside the
/// alphabet, lowercases, removes stopwords and stems. Tokens are stemmed to a
/// fixpoint so that re-tokenizing the joined output is the identity.
TokenDoc clean_and_tokenize(std::string_view body, const TokenizerConfig& cfg,
                            std::string email_id = {});

/// Porter (1980) suffix stripping for lowercase ASCII words. Words holding any
/// non-ASCII byte are returned unchanged.
std::string porter_stem(std::string_view word);

std::string stem(std::string_view word, const TokenizerConfig& cfg);

/// Sorted token dictionary shared by all vectors of one corpus.
class Vocabulary {
public:
    Vocabulary() = default;
    explicit Vocabulary(std::vector<std::string> tokens);
    static Vocabulary build(std::span<const TokenDoc> docs);

    std::optional<std::uint32_t> id(std::string_view token) const;
    const std::string& token(std::uint32_t id) const { return tokens_.at(id); }
    std::size_t size() const noexcept { return tokens_.size(); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

private:
    std::vector<std::string> tokens_;
    std::unordered_map<std::string, std::uint32_t> index_;
};

struct TermWeight {
    std::uint32_t term;
    double weight;
    friend bool operator==(const TermWeight&, const TermWeight&) = default;
};

struct TfVector {
    std::string email_id;
    /// Sorted by term id; weights strictly positive.
    std::vector<TermWeight> weights;

    double norm() const;
    bool empty() const noexcept { return weights.empty(); }
};

/// Raw term counts, divided by the Euclidean norm when `normalize` is set.
/// Tokens missing from the vocabulary are ignored.
TfVector tf_vector(const TokenDoc& doc, const Vocabulary& vocab, bool normalize);

double dot(const TfVector& a, const TfVector& b);

/// Cosine of the angle between two term vectors, clamped to [0, 1]. A zero
/// vector on either side yields 0.
double cosine(const TfVector& a, const TfVector& b);

/// Unit-cost edit distance over Unicode code points.
std::size_t levenshtein(std::string_view a, std::string_view b);

/// UTF-8 code point count.
std::size_t utf8_length(std::string_view s);
std::u32string utf8_to_u32(std::string_view s);

}  // namespace phishtriage::textproc
