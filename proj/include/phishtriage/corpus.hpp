#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "phishtriage/common.hpp"

namespace phishtriage::corpus {

struct RawMessage {
    std::string id;
    std::string source_path;
    std::string raw_bytes;
    Timestamp received_at = 0;
};

enum class InputFormat { EmlDir, Mbox, Jsonl };
InputFormat parse_input_format(std::string_view name);

struct IngestResult {
    std::vector<RawMessage> messages;
    std::vector<std::string> warnings;
    std::size_t skipped = 0;
};

/// Reads every stored message in deterministic order: lexicographic by file
/// name for .eml directories, record order for mbox and JSONL. Malformed
/// records are skipped with a warning.
IngestResult ingest(const std::filesystem::path& path, InputFormat format);

/// Localized labels used to find forwarded header blocks in quoted text and to
/// read localized dates.
struct LabelLexicon {
    std::vector<std::string> from{"From", "Van", "Von", "De"};
    std::vector<std::string> to{"To", "Aan", "An", "Para", "À"};
    std::vector<std::string> date{"Date", "Sent", "Datum", "Verzonden", "Gesendet", "Envoyé"};
    std::vector<std::string> subject{"Subject", "Onderwerp", "Betreff", "Objet", "Asunto"};
    /// Lowercase month names or abbreviations, mapped to 1..12.
    std::map<std::string, int> months;

    static LabelLexicon defaults();
    /// Flat `key = label1, label2` file with keys from/to/date/subject and
    /// `month.<n> = name1, name2`. Keys present in the file replace defaults.
    static LabelLexicon load(const std::filesystem::path& path);
};

struct Email {
    std::string id;
    std::string from_addr;
    std::string from_domain;
    std::string to_addr;
    std::optional<Timestamp> date;
    std::string subject;
    std::string body_text;
    std::size_t body_length = 0;
    bool suspicious = false;
    std::optional<std::int64_t> duplicate_id;
    /// 0 when the message's own headers were used; otherwise how many
    /// forwarding layers were peeled off.
    int header_depth = 0;
    std::optional<std::string> language;

    friend bool operator==(const Email&, const Email&) = default;
};

/// Builds an Email with derived fields (domain, body length) filled in.
Email make_email(std::string id, std::string from, std::string to, std::optional<Timestamp> date,
                 std::string subject, std::string body, int header_depth = 0);

/// Address inside a From:/To: value ("Name <a@b>", "a@b", "[mailto:a@b]").
std::string extract_address(std::string_view value);
std::string domain_of(std::string_view address);

std::optional<Timestamp> parse_date(std::string_view text, const LabelLexicon& lex);

/// From/To/Date/Subject and body of the innermost forwarded original that
/// carries all four headers. nullopt when no such layer exists.
std::optional<Email> recover_original_headers(const RawMessage& msg, const LabelLexicon& lex);

/// Renders an Email as a plain RFC 5322 message.
std::string render_rfc822(const Email& e);

nlohmann::json to_json(const Email& e);
Email email_from_json(const nlohmann::json& j);
void write_corpus_jsonl(const std::filesystem::path& path, std::span<const Email> emails);
std::vector<Email> read_corpus_jsonl(const std::filesystem::path& path);

struct SmsHeuristics {
    std::size_t max_length = 200;
};

struct SanitizationReport {
    std::size_t total_in = 0;
    std::size_t removed_sms_like = 0;
    std::size_t removed_other_org = 0;
    std::size_t retained = 0;

    SanitizationReport& operator+=(const SanitizationReport& o);
    bool balanced() const noexcept {
        return total_in == removed_sms_like + removed_other_org + retained;
    }
    friend bool operator==(const SanitizationReport&, const SanitizationReport&) = default;
};

nlohmann::json to_json(const SanitizationReport& r);

struct SanitizeResult {
    std::vector<Email> emails;
    SanitizationReport report;
};

/// Case-insensitive whole-word occurrence.
bool mentions(std::string_view text, std::string_view name);

bool is_sms_like(const Email& e, const SmsHeuristics& h);

/// Drops SMS-like records, then records naming a competitor but never `org_name`.
SanitizeResult sanitize(std::span<const Email> emails, std::string_view org_name,
                        std::span<const std::string> competitor_names,
                        const SmsHeuristics& sms = {});

}  // namespace phishtriage::corpus
