#include "phishtriage/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "phishtriage/mime.hpp"
#include "phishtriage/textproc.hpp"

namespace phishtriage::corpus {

namespace fs = std::filesystem;
using nlohmann::json;

InputFormat parse_input_format(std::string_view name) {
    if (name == "eml-dir") return InputFormat::EmlDir;
    if (name == "mbox") return InputFormat::Mbox;
    if (name == "jsonl") return InputFormat::Jsonl;
    throw UsageError("unknown input format '" + std::string(name) +
                     "' (expected eml-dir, mbox or jsonl)");
}

// ---------------------------------------------------------------------------
// Lexicon

LabelLexicon LabelLexicon::defaults() {
    LabelLexicon lex;
    const std::vector<std::vector<std::string>> names = {
        {"jan", "january", "januari", "januar", "janvier", "jänner"},
        {"feb", "february", "februari", "februar", "fevrier", "février"},
        {"mar", "march", "maart", "märz", "mars", "mrt"},
        {"apr", "april", "avril"},
        {"may", "mei", "mai"},
        {"jun", "june", "juni", "juin"},
        {"jul", "july", "juli", "juillet"},
        {"aug", "august", "augustus", "aout", "août"},
        {"sep", "sept", "september", "septembre"},
        {"oct", "october", "oktober", "okt", "octobre"},
        {"nov", "november", "novembre"},
        {"dec", "december", "dezember", "dez", "décembre", "decembre"},
    };
    for (std::size_t m = 0; m < names.size(); ++m)
        for (const auto& n : names[m]) lex.months[n] = static_cast<int>(m + 1);
    return lex;
}

LabelLexicon LabelLexicon::load(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read label lexicon " + path.string());
    LabelLexicon lex = defaults();
    std::string line;
    bool months_replaced = false;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t.front() == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos) throw DataError("lexicon line without '=': " + t);
        const std::string key = to_lower_ascii(trim(t.substr(0, eq)));
        std::vector<std::string> values;
        for (auto& v : split(t.substr(eq + 1), ',')) {
            auto s = trim(v);
            if (!s.empty()) values.push_back(std::move(s));
        }
        if (key == "from") lex.from = values;
        else if (key == "to") lex.to = values;
        else if (key == "date") lex.date = values;
        else if (key == "subject") lex.subject = values;
        else if (key.starts_with("month.")) {
            if (!months_replaced) {
                lex.months.clear();
                months_replaced = true;
            }
            const int m = std::stoi(key.substr(6));
            if (m < 1 || m > 12) throw DataError("month index out of range: " + key);
            for (const auto& v : values) lex.months[to_lower_ascii(v)] = m;
        } else {
            throw DataError("unknown lexicon key '" + key + "'");
        }
    }
    return lex;
}

// ---------------------------------------------------------------------------
// Ingest

namespace {

std::string read_file(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    if (!in) throw DataError("cannot read " + p.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Timestamp top_level_date(std::string_view raw) {
    mime::HeaderList headers;
    std::string_view body;
    if (!mime::split_header_block(raw, headers, body)) return 0;
    for (const auto& [k, v] : headers)
        if (iequals(k, "Date"))
            return parse_date(v, LabelLexicon::defaults()).value_or(0);
    return 0;
}

}  // namespace

IngestResult ingest(const fs::path& path, InputFormat format) {
    std::error_code ec;
    if (!fs::exists(path, ec)) throw DataError("input path does not exist: " + path.string());
    IngestResult out;

    switch (format) {
        case InputFormat::EmlDir: {
            if (!fs::is_directory(path)) throw DataError("not a directory: " + path.string());
            std::vector<fs::path> files;
            for (const auto& entry : fs::directory_iterator(path)) {
                if (!entry.is_regular_file()) continue;
                if (to_lower_ascii(entry.path().extension().string()) != ".eml") continue;
                files.push_back(entry.path());
            }
            std::sort(files.begin(), files.end(),
                      [](const fs::path& a, const fs::path& b) {
                          return a.filename().string() < b.filename().string();
                      });
            for (const auto& f : files) {
                std::string raw = read_file(f);
                if (raw.empty()) {
                    out.warnings.push_back(f.filename().string() + ": empty message skipped");
                    ++out.skipped;
                    continue;
                }
                RawMessage m{f.stem().string(), f.string(), std::move(raw), 0};
                m.received_at = top_level_date(m.raw_bytes);
                out.messages.push_back(std::move(m));
            }
            break;
        }
        case InputFormat::Mbox: {
            const std::string data = read_file(path);
            const std::string stem = path.stem().string();
            std::vector<std::pair<std::string, std::string>> records;  // separator, body
            std::istringstream in(data);
            std::string line;
            bool prev_blank = true;
            while (std::getline(in, line)) {
                if (!line.empty() && line.back() == '\r') line.pop_back();
                if (prev_blank && line.starts_with("From ")) {
                    records.emplace_back(line, std::string{});
                } else if (!records.empty()) {
                    // mboxrd quoting: ">From " lines lose one '>'.
                    std::string_view l = line;
                    const auto first_non = l.find_first_not_of('>');
                    if (first_non != std::string_view::npos && first_non > 0 &&
                        l.substr(first_non).starts_with("From ")) {
                        l.remove_prefix(1);
                    }
                    records.back().second.append(l);
                    records.back().second.push_back('\n');
                } else if (!trim(line).empty()) {
                    out.warnings.push_back("mbox: content before first separator ignored");
                }
                prev_blank = line.empty();
            }
            for (std::size_t i = 0; i < records.size(); ++i) {
                auto& [sep, body] = records[i];
                // The separator's trailing blank line belongs to the envelope.
                if (body.size() >= 2 && body.ends_with("\n\n")) body.pop_back();
                char idbuf[32];
                std::snprintf(idbuf, sizeof idbuf, "%06zu", i);
                if (trim(body).empty()) {
                    out.warnings.push_back(stem + "-" + idbuf + ": empty record skipped");
                    ++out.skipped;
                    continue;
                }
                RawMessage m{stem + "-" + idbuf, path.string(), std::move(body), 0};
                const auto sep_date = parse_date(std::string_view(sep).substr(5),
                                                 LabelLexicon::defaults());
                m.received_at = sep_date ? *sep_date : top_level_date(m.raw_bytes);
                out.messages.push_back(std::move(m));
            }
            break;
        }
        case InputFormat::Jsonl: {
            std::ifstream in(path);
            if (!in) throw DataError("cannot read " + path.string());
            std::string line;
            std::size_t lineno = 0;
            while (std::getline(in, line)) {
                ++lineno;
                if (trim(line).empty()) continue;
                const std::string where = path.filename().string() + ":" + std::to_string(lineno);
                try {
                    const json j = json::parse(line);
                    RawMessage m;
                    m.id = j.at("id").get<std::string>();
                    m.raw_bytes = j.at("raw").get<std::string>();
                    m.source_path = path.string();
                    const auto& ra = j.at("received_at");
                    if (ra.is_number_integer()) {
                        m.received_at = ra.get<Timestamp>();
                    } else {
                        const auto t = parse_iso8601(ra.get<std::string>());
                        if (!t) throw DataError("bad received_at");
                        m.received_at = *t;
                    }
                    if (m.id.empty() || m.raw_bytes.empty()) throw DataError("empty id or raw");
                    out.messages.push_back(std::move(m));
                } catch (const std::exception& e) {
                    out.warnings.push_back(where + ": malformed record skipped (" + e.what() + ")");
                    ++out.skipped;
                }
            }
            break;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Dates

namespace {

struct DateToken {
    enum Kind { Number, Word, Punct } kind;
    std::string text;
};

std::vector<DateToken> tokenize_date(std::string_view s) {
    std::vector<DateToken> out;
    std::size_t i = 0;
    while (i < s.size()) {
        const auto c = static_cast<unsigned char>(s[i]);
        if (std::isspace(c) || c == ',') {
            ++i;
        } else if (std::isdigit(c)) {
            std::size_t j = i;
            while (j < s.size() && std::isdigit(static_cast<unsigned char>(s[j]))) ++j;
            out.push_back({DateToken::Number, std::string(s.substr(i, j - i))});
            i = j;
        } else if (std::isalpha(c) || c >= 0x80) {
            std::size_t j = i;
            while (j < s.size() && (std::isalpha(static_cast<unsigned char>(s[j])) ||
                                    static_cast<unsigned char>(s[j]) >= 0x80 || s[j] == '.'))
                ++j;
            std::string w(s.substr(i, j - i));
            while (!w.empty() && w.back() == '.') w.pop_back();
            out.push_back({DateToken::Word, std::move(w)});
            i = j;
        } else {
            out.push_back({DateToken::Punct, std::string(1, static_cast<char>(c))});
            ++i;
        }
    }
    return out;
}

std::optional<int> named_zone_offset_minutes(const std::string& w) {
    static const std::map<std::string, int> zones = {
        {"ut", 0},      {"utc", 0},     {"gmt", 0},     {"z", 0},       {"est", -300},
        {"edt", -240},  {"cst", -360},  {"cdt", -300},  {"mst", -420},  {"mdt", -360},
        {"pst", -480},  {"pdt", -420},  {"cet", 60},    {"cest", 120},  {"met", 60},
        {"mest", 120},  {"bst", 60},    {"eet", 120},   {"eest", 180},
    };
    const auto it = zones.find(to_lower_ascii(w));
    if (it == zones.end()) return std::nullopt;
    return it->second;
}

bool valid_ymd(int y, int m, int d) {
    return y >= 1970 && y <= 2100 && valid_civil(y, m, d);
}

}  // namespace

std::optional<Timestamp> parse_date(std::string_view text, const LabelLexicon& lex) {
    const std::string s = trim(text);
    if (s.empty()) return std::nullopt;
    if (auto iso = parse_iso8601(s)) return iso;

    const auto toks = tokenize_date(s);
    int year = -1, month = -1, day = -1;
    int hour = 0, minute = 0, second = 0;
    bool have_time = false;
    int offset_min = 0;
    std::optional<bool> pm;
    std::vector<int> loose_numbers;

    for (std::size_t i = 0; i < toks.size(); ++i) {
        const auto& t = toks[i];
        if (t.kind == DateToken::Number) {
            // H:MM[:SS]
            if (!have_time && i + 2 < toks.size() && toks[i + 1].text == ":" &&
                toks[i + 2].kind == DateToken::Number && t.text.size() <= 2) {
                hour = std::stoi(t.text);
                minute = std::stoi(toks[i + 2].text);
                i += 2;
                if (i + 2 < toks.size() && toks[i + 1].text == ":" &&
                    toks[i + 2].kind == DateToken::Number) {
                    second = std::stoi(toks[i + 2].text);
                    i += 2;
                }
                if (i + 1 < toks.size() && toks[i + 1].text == "." &&
                    i + 2 < toks.size() && toks[i + 2].kind == DateToken::Number)
                    i += 2;
                have_time = true;
                continue;
            }
            // Numeric date triples: Y-M-D or D-M-Y with '-', '/' or '.'.
            if (year < 0 && i + 4 < toks.size() && toks[i + 1].kind == DateToken::Punct &&
                toks[i + 2].kind == DateToken::Number && toks[i + 3].text == toks[i + 1].text &&
                toks[i + 4].kind == DateToken::Number &&
                (toks[i + 1].text == "-" || toks[i + 1].text == "/" || toks[i + 1].text == ".")) {
                const int a = std::stoi(t.text), b = std::stoi(toks[i + 2].text),
                          c = std::stoi(toks[i + 4].text);
                if (t.text.size() == 4) {
                    year = a, month = b, day = c;
                } else {
                    day = a, month = b, year = c;
                    if (year < 100) year += 2000;
                }
                i += 4;
                continue;
            }
            loose_numbers.push_back(std::stoi(t.text));
        } else if (t.kind == DateToken::Punct) {
            if ((t.text == "+" || t.text == "-") && i + 1 < toks.size() &&
                toks[i + 1].kind == DateToken::Number && toks[i + 1].text.size() == 4 &&
                have_time) {
                const int v = std::stoi(toks[i + 1].text);
                offset_min = (v / 100) * 60 + v % 100;
                if (t.text == "-") offset_min = -offset_min;
                ++i;
            }
        } else {
            const std::string w = to_lower_ascii(t.text);
            if (w == "am" || w == "pm") {
                pm = (w == "pm");
                continue;
            }
            if (auto z = named_zone_offset_minutes(w); z && have_time) {
                offset_min = *z;
                continue;
            }
            auto it = lex.months.find(w);
            if (it == lex.months.end() && w.size() > 3) it = lex.months.find(w.substr(0, 3));
            if (it != lex.months.end() && month < 0) month = it->second;
        }
    }

    if (year < 0) {
        // Day and year around a month name: pick the 4-digit number as year.
        for (auto it = loose_numbers.begin(); it != loose_numbers.end(); ++it) {
            if (*it >= 1970 && *it <= 2100) {
                year = *it;
                loose_numbers.erase(it);
                break;
            }
        }
        if (!loose_numbers.empty()) day = loose_numbers.front();
    }
    if (!valid_ymd(year, month, day)) return std::nullopt;
    if (pm) {
        if (*pm && hour < 12) hour += 12;
        if (!*pm && hour == 12) hour = 0;
    }
    if (hour > 23 || minute > 59 || second > 60) return std::nullopt;
    return days_from_civil_utc(year, month, day, hour, minute, second) - offset_min * 60;
}

// ---------------------------------------------------------------------------
// Header recovery

std::string extract_address(std::string_view value) {
    const auto lt = value.rfind('<');
    const auto gt = value.rfind('>');
    if (lt != std::string_view::npos && gt != std::string_view::npos && gt > lt) {
        std::string inner = trim(value.substr(lt + 1, gt - lt - 1));
        if (inner.starts_with("mailto:")) inner = inner.substr(7);
        if (inner.find('@') != std::string::npos) return inner;
    }
    const auto mailto = value.find("mailto:");
    if (mailto != std::string_view::npos) {
        auto end = value.find_first_of("]> \t", mailto);
        return std::string(value.substr(mailto + 7, end == std::string_view::npos
                                                        ? std::string_view::npos
                                                        : end - mailto - 7));
    }
    // Whitespace-delimited chunk containing '@'.
    const auto at = value.find('@');
    if (at != std::string_view::npos) {
        std::size_t b = at, e = at;
        auto is_delim = [](char c) {
            return std::isspace(static_cast<unsigned char>(c)) || c == '"' || c == '\'' ||
                   c == '(' || c == ')' || c == '[' || c == ']' || c == ',' || c == ';';
        };
        while (b > 0 && !is_delim(value[b - 1])) --b;
        while (e < value.size() && !is_delim(value[e])) ++e;
        return std::string(value.substr(b, e - b));
    }
    return trim(value);
}

std::string domain_of(std::string_view address) {
    const auto at = address.rfind('@');
    if (at == std::string_view::npos) return {};
    std::string d = to_lower_ascii(trim(address.substr(at + 1)));
    while (!d.empty() && (d.back() == '.' || d.back() == '>')) d.pop_back();
    return d;
}

Email make_email(std::string id, std::string from, std::string to, std::optional<Timestamp> date,
                 std::string subject, std::string body, int header_depth) {
    Email e;
    e.id = std::move(id);
    e.from_addr = extract_address(from);
    e.from_domain = domain_of(e.from_addr);
    e.to_addr = extract_address(to);
    e.date = date;
    e.subject = trim(subject);
    e.body_text = std::move(body);
    e.body_length = textproc::utf8_length(e.body_text);
    e.header_depth = header_depth;
    return e;
}

namespace {

struct Candidate {
    int depth = 0;
    std::string from, to, date, subject;
    std::string body;
    bool complete() const {
        return !from.empty() && !to.empty() && !date.empty() && !subject.empty();
    }
};

enum class Field { None, From, To, Date, Subject };

std::string_view strip_quote_prefix(std::string_view line, int* levels = nullptr) {
    int n = 0;
    for (;;) {
        std::size_t i = 0;
        while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
        if (i < line.size() && line[i] == '>') {
            line.remove_prefix(i + 1);
            ++n;
        } else {
            break;
        }
    }
    if (levels) *levels = n;
    return line;
}

// "From: x", "*From:* x", "From : x" with a configured label.
Field match_label(std::string_view line, const LabelLexicon& lex, std::string& value) {
    std::string_view l = line;
    while (!l.empty() && (l.front() == ' ' || l.front() == '\t' || l.front() == '*')) l.remove_prefix(1);
    const auto colon = l.find(':');
    if (colon == std::string_view::npos || colon == 0 || colon > 24) return Field::None;
    std::string label = trim(l.substr(0, colon));
    while (!label.empty() && label.back() == '*') label.pop_back();
    std::string_view rest = l.substr(colon + 1);
    while (!rest.empty() && (rest.front() == '*' || rest.front() == ' ' || rest.front() == '\t'))
        rest.remove_prefix(1);
    value = trim(rest);
    auto in = [&](const std::vector<std::string>& labels) {
        return std::any_of(labels.begin(), labels.end(),
                           [&](const std::string& x) { return iequals(x, label); });
    };
    if (in(lex.from)) return Field::From;
    if (in(lex.to)) return Field::To;
    if (in(lex.date)) return Field::Date;
    if (in(lex.subject)) return Field::Subject;
    return Field::None;
}

void scan_quoted(std::string_view text, int depth, const LabelLexicon& lex,
                 std::vector<Candidate>& out, int budget) {
    if (budget <= 0) return;
    std::vector<std::string_view> lines;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto eol = text.find('\n', pos);
        if (eol == std::string_view::npos) eol = text.size();
        lines.push_back(text.substr(pos, eol - pos));
        pos = eol + 1;
    }
    for (std::size_t i = 0; i < lines.size(); ++i) {
        std::string value;
        if (match_label(strip_quote_prefix(lines[i]), lex, value) == Field::None) continue;

        Candidate c;
        c.depth = depth;
        int distinct = 0;
        std::size_t j = i;
        int quote_levels = 0;
        strip_quote_prefix(lines[i], &quote_levels);
        for (; j < lines.size(); ++j) {
            const Field f = match_label(strip_quote_prefix(lines[j]), lex, value);
            if (f == Field::None) break;
            std::string* slot = f == Field::From   ? &c.from
                                : f == Field::To   ? &c.to
                                : f == Field::Date ? &c.date
                                                   : &c.subject;
            if (slot->empty()) {
                *slot = value;
                ++distinct;
            }
        }
        if (distinct < 2) continue;

        std::string body;
        for (std::size_t k = j; k < lines.size(); ++k) {
            std::string_view l = lines[k];
            for (int q = 0; q < quote_levels; ++q) {
                std::size_t s = 0;
                while (s < l.size() && (l[s] == ' ' || l[s] == '\t')) ++s;
                if (s < l.size() && l[s] == '>') {
                    l.remove_prefix(s + 1);
                    if (!l.empty() && l.front() == ' ') l.remove_prefix(1);
                }
            }
            body.append(l);
            if (k + 1 < lines.size()) body.push_back('\n');
        }
        const auto first = body.find_first_not_of(" \t\n");
        body = first == std::string::npos ? std::string{} : body.substr(first);
        while (!body.empty() && (body.back() == '\n' || body.back() == ' ')) body.pop_back();
        c.body = body;
        out.push_back(c);
        scan_quoted(out.back().body, depth + 1, lex, out, budget - 1);
        return;
    }
}

void collect(const mime::Entity& e, int depth, const LabelLexicon& lex,
             std::vector<Candidate>& out) {
    Candidate c;
    c.depth = depth;
    c.from = e.header("From");
    c.to = e.header("To");
    c.date = e.header("Date");
    c.subject = e.header("Subject");
    c.body = e.body_text();
    while (!c.body.empty() && (c.body.back() == '\n' || c.body.back() == ' ')) c.body.pop_back();
    out.push_back(c);

    // Embedded message/rfc822 parts, depth first.
    auto visit = [&](const mime::Entity& part, auto&& self) -> void {
        for (const auto& emb : part.embedded) collect(emb, depth + 1, lex, out);
        for (const auto& p : part.parts) self(p, self);
    };
    visit(e, visit);

    scan_quoted(e.body_text(), depth + 1, lex, out, 16);
}

}  // namespace

std::optional<Email> recover_original_headers(const RawMessage& msg, const LabelLexicon& lex) {
    const mime::Entity root = mime::parse(msg.raw_bytes);
    std::vector<Candidate> candidates;
    collect(root, 0, lex, candidates);

    const Candidate* best = nullptr;
    for (const auto& c : candidates) {
        if (!c.complete()) continue;
        if (!best || c.depth > best->depth) best = &c;
    }
    if (!best) return std::nullopt;
    return make_email(msg.id, best->from, best->to, parse_date(best->date, lex), best->subject,
                      best->body, best->depth);
}

std::string render_rfc822(const Email& e) {
    std::string out;
    out += "From: " + e.from_addr + "\n";
    out += "To: " + e.to_addr + "\n";
    out += "Date: " + (e.date ? format_iso8601(*e.date) : std::string("unknown")) + "\n";
    out += "Subject: " + e.subject + "\n";
    out += "\n";
    out += e.body_text;
    return out;
}

// ---------------------------------------------------------------------------
// JSON

json to_json(const Email& e) {
    json j;
    j["id"] = e.id;
    j["from_addr"] = e.from_addr;
    j["from_domain"] = e.from_domain;
    j["to_addr"] = e.to_addr;
    j["date"] = e.date ? json(format_iso8601(*e.date)) : json(nullptr);
    j["subject"] = e.subject;
    j["body_text"] = e.body_text;
    j["body_length"] = e.body_length;
    j["suspicious"] = e.suspicious;
    j["duplicate_id"] = e.duplicate_id ? json(*e.duplicate_id) : json(nullptr);
    j["header_depth"] = e.header_depth;
    if (e.language) j["language"] = *e.language;
    return j;
}

Email email_from_json(const json& j) {
    Email e;
    e.id = j.at("id").get<std::string>();
    e.from_addr = j.at("from_addr").get<std::string>();
    e.from_domain = j.at("from_domain").get<std::string>();
    e.to_addr = j.at("to_addr").get<std::string>();
    if (!j.at("date").is_null()) {
        e.date = parse_iso8601(j.at("date").get<std::string>());
        if (!e.date) throw DataError("email " + e.id + ": bad date");
    }
    e.subject = j.at("subject").get<std::string>();
    e.body_text = j.at("body_text").get<std::string>();
    e.body_length = j.at("body_length").get<std::size_t>();
    e.suspicious = j.at("suspicious").get<bool>();
    if (!j.at("duplicate_id").is_null()) e.duplicate_id = j.at("duplicate_id").get<std::int64_t>();
    e.header_depth = j.value("header_depth", 0);
    if (j.contains("language") && !j.at("language").is_null())
        e.language = j.at("language").get<std::string>();
    return e;
}

void write_corpus_jsonl(const fs::path& path, std::span<const Email> emails) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write " + path.string());
    for (const auto& e : emails) out << to_json(e).dump() << '\n';
}

std::vector<Email> read_corpus_jsonl(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot read " + path.string());
    std::vector<Email> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty()) continue;
        try {
            out.push_back(email_from_json(json::parse(line)));
        } catch (const json::exception& e) {
            throw DataError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sanitize

SanitizationReport& SanitizationReport::operator+=(const SanitizationReport& o) {
    total_in += o.total_in;
    removed_sms_like += o.removed_sms_like;
    removed_other_org += o.removed_other_org;
    retained += o.retained;
    return *this;
}

json to_json(const SanitizationReport& r) {
    return json{{"total_in", r.total_in},
                {"removed_sms_like", r.removed_sms_like},
                {"removed_other_org", r.removed_other_org},
                {"retained", r.retained}};
}

bool mentions(std::string_view text, std::string_view name) {
    const std::string t = to_lower_ascii(text);
    const std::string n = to_lower_ascii(trim(name));
    if (n.empty()) return false;
    auto word_char = [](char c) {
        const auto u = static_cast<unsigned char>(c);
        return std::isalnum(u) || u >= 0x80;
    };
    std::size_t pos = 0;
    while ((pos = t.find(n, pos)) != std::string::npos) {
        const bool left_ok = pos == 0 || !word_char(t[pos - 1]);
        const std::size_t end = pos + n.size();
        const bool right_ok = end >= t.size() || !word_char(t[end]);
        if (left_ok && right_ok) return true;
        ++pos;
    }
    return false;
}

bool is_sms_like(const Email& e, const SmsHeuristics& h) {
    return e.body_length < h.max_length && e.header_depth == 0;
}

SanitizeResult sanitize(std::span<const Email> emails, std::string_view org_name,
                        std::span<const std::string> competitor_names, const SmsHeuristics& sms) {
    if (trim(org_name).empty()) throw UsageError("sanitize: org_name must be non-empty");
    SanitizeResult out;
    for (const auto& e : emails) {
        ++out.report.total_in;
        if (is_sms_like(e, sms)) {
            ++out.report.removed_sms_like;
            continue;
        }
        const bool names_competitor =
            std::any_of(competitor_names.begin(), competitor_names.end(),
                        [&](const std::string& c) { return mentions(e.body_text, c); });
        if (names_competitor && !mentions(e.body_text, org_name)) {
            ++out.report.removed_other_org;
            continue;
        }
        ++out.report.retained;
        out.emails.push_back(e);
    }
    return out;
}

}  // namespace phishtriage::corpus
