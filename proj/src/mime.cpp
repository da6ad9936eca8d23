#include "phishtriage/mime.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include <unicode/unistr.h>

#include "phishtriage/common.hpp"

namespace phishtriage::mime {
namespace {

bool is_header_name_char(char c) {
    const auto u = static_cast<unsigned char>(c);
    return u > 32 && u < 127 && c != ':';
}

bool looks_like_header_line(std::string_view line) {
    const auto colon = line.find(':');
    if (colon == std::string_view::npos || colon == 0) return false;
    return std::all_of(line.begin(), line.begin() + static_cast<std::ptrdiff_t>(colon),
                       is_header_name_char);
}

std::string normalize_newlines(std::string_view raw) {
    std::string out;
    out.reserve(raw.size());
    for (std::size_t i = 0; i < raw.size(); ++i) {
        if (raw[i] == '\r') {
            out.push_back('\n');
            if (i + 1 < raw.size() && raw[i + 1] == '\n') ++i;
        } else {
            out.push_back(raw[i]);
        }
    }
    return out;
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
}

std::string content_type_of(const Entity& e) {
    const std::string ct = e.header("Content-Type");
    if (ct.empty()) return "text/plain";
    return to_lower_ascii(trim(ct.substr(0, ct.find(';'))));
}

}  // namespace

std::string Entity::header(std::string_view name) const {
    for (const auto& [k, v] : headers)
        if (iequals(k, name)) return v;
    return {};
}

bool Entity::has_header(std::string_view name) const {
    return std::any_of(headers.begin(), headers.end(),
                       [&](const auto& kv) { return iequals(kv.first, name); });
}

std::string Entity::body_text() const {
    const Entity* html = nullptr;
    const Entity* plain = nullptr;
    auto visit = [&](const Entity& e, auto&& self) -> void {
        if (plain) return;
        if (e.parts.empty()) {
            if (e.content_type == "text/plain") plain = &e;
            else if (e.content_type == "text/html" && !html) html = &e;
            return;
        }
        for (const auto& p : e.parts) self(p, self);
    };
    visit(*this, visit);
    if (plain) return plain->text;
    if (html) return strip_html(html->text);
    return {};
}

bool split_header_block(std::string_view raw, HeaderList& headers, std::string_view& body) {
    headers.clear();
    std::size_t pos = 0;
    bool first = true;
    while (pos < raw.size()) {
        std::size_t eol = raw.find('\n', pos);
        if (eol == std::string_view::npos) eol = raw.size();
        std::string_view line = raw.substr(pos, eol - pos);
        if (line.empty()) {
            body = raw.substr(std::min(raw.size(), eol + 1));
            return !first;
        }
        if ((line.front() == ' ' || line.front() == '\t') && !headers.empty()) {
            headers.back().second += ' ';
            headers.back().second += trim(line);
        } else if (looks_like_header_line(line)) {
            const auto colon = line.find(':');
            headers.emplace_back(std::string(line.substr(0, colon)), trim(line.substr(colon + 1)));
        } else {
            if (first) return false;
            // Malformed line terminates the header block.
            body = raw.substr(pos);
            return true;
        }
        first = false;
        pos = eol + 1;
    }
    body = std::string_view{};
    return !first;
}

Entity parse(std::string_view raw_in, int max_depth) {
    const std::string raw = normalize_newlines(raw_in);
    Entity e;
    std::string_view body;
    if (!split_header_block(raw, e.headers, body)) {
        e.headers.clear();
        e.text = raw;
        return e;
    }
    for (auto& [k, v] : e.headers) v = decode_encoded_words(v);
    e.content_type = content_type_of(e);
    const std::string ct_full = e.header("Content-Type");

    if (e.content_type.starts_with("multipart/") && max_depth > 0) {
        const std::string boundary = header_param(ct_full, "boundary");
        if (!boundary.empty()) {
            const std::string delim = "--" + boundary;
            std::size_t pos = 0;
            std::size_t part_start = std::string::npos;
            while (pos <= body.size()) {
                std::size_t eol = body.find('\n', pos);
                if (eol == std::string_view::npos) eol = body.size();
                const std::string_view line = body.substr(pos, eol - pos);
                const std::string trimmed = trim(line);
                if (trimmed == delim || trimmed == delim + "--") {
                    if (part_start != std::string::npos) {
                        std::size_t end = pos > 0 ? pos - 1 : 0;
                        if (end < part_start) end = part_start;
                        e.parts.push_back(parse(body.substr(part_start, end - part_start),
                                                max_depth - 1));
                    }
                    if (trimmed == delim + "--") break;
                    part_start = eol + 1;
                }
                pos = eol + 1;
            }
            return e;
        }
    }
    if (e.content_type == "message/rfc822" && max_depth > 0) {
        e.embedded.push_back(parse(body, max_depth - 1));
        return e;
    }

    const std::string cte = to_lower_ascii(trim(e.header("Content-Transfer-Encoding")));
    std::string decoded;
    if (cte == "quoted-printable") decoded = decode_quoted_printable(body);
    else if (cte == "base64") decoded = decode_base64(body);
    else decoded = std::string(body);

    if (e.content_type.starts_with("text/")) {
        e.text = to_utf8(decoded, header_param(ct_full, "charset"));
    }
    return e;
}

std::string header_param(std::string_view value, std::string_view key) {
    std::size_t pos = value.find(';');
    while (pos != std::string_view::npos) {
        const std::size_t next = value.find(';', pos + 1);
        const std::string_view item =
            value.substr(pos + 1, next == std::string_view::npos ? std::string_view::npos
                                                                 : next - pos - 1);
        const auto eq = item.find('=');
        if (eq != std::string_view::npos && iequals(trim(item.substr(0, eq)), key)) {
            std::string v = trim(item.substr(eq + 1));
            if (v.size() >= 2 && v.front() == '"' && v.back() == '"') v = v.substr(1, v.size() - 2);
            return v;
        }
        pos = next;
    }
    return {};
}

std::string decode_quoted_printable(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        if (s[i] == '=' && i + 1 < s.size()) {
            // Soft line break.
            if (s[i + 1] == '\n') {
                ++i;
                continue;
            }
            if (s[i + 1] == '\r' && i + 2 < s.size() && s[i + 2] == '\n') {
                i += 2;
                continue;
            }
            if (i + 2 < s.size()) {
                const int hi = hex_value(s[i + 1]);
                const int lo = hex_value(s[i + 2]);
                if (hi >= 0 && lo >= 0) {
                    out.push_back(static_cast<char>(hi * 16 + lo));
                    i += 2;
                    continue;
                }
            }
        }
        out.push_back(s[i]);
    }
    return out;
}

std::string decode_base64(std::string_view s) {
    auto val = [](char c) -> int {
        if (c >= 'A' && c <= 'Z') return c - 'A';
        if (c >= 'a' && c <= 'z') return c - 'a' + 26;
        if (c >= '0' && c <= '9') return c - '0' + 52;
        if (c == '+' || c == '-') return 62;
        if (c == '/' || c == '_') return 63;
        return -1;
    };
    std::string out;
    unsigned buf = 0;
    int bits = 0;
    for (char c : s) {
        if (c == '=') break;
        const int v = val(c);
        if (v < 0) continue;
        buf = (buf << 6) | static_cast<unsigned>(v);
        bits += 6;
        if (bits >= 8) {
            bits -= 8;
            out.push_back(static_cast<char>((buf >> bits) & 0xFF));
        }
    }
    return out;
}

std::string to_utf8(std::string_view bytes, std::string_view charset) {
    const std::string cs = to_lower_ascii(trim(charset));
    if (cs.empty() || cs == "utf-8" || cs == "utf8" || cs == "us-ascii" || cs == "ascii")
        return std::string(bytes);
    icu::UnicodeString u(bytes.data(), static_cast<int32_t>(bytes.size()), cs.c_str());
    if (u.isBogus()) return std::string(bytes);
    std::string out;
    u.toUTF8String(out);
    return out;
}

std::string decode_encoded_words(std::string_view value) {
    std::string out;
    std::size_t pos = 0;
    bool last_was_word = false;
    while (pos < value.size()) {
        const std::size_t start = value.find("=?", pos);
        if (start == std::string_view::npos) {
            out.append(value.substr(pos));
            break;
        }
        const std::size_t q1 = value.find('?', start + 2);
        const std::size_t q2 = q1 == std::string_view::npos ? q1 : value.find('?', q1 + 1);
        const std::size_t end = q2 == std::string_view::npos ? q2 : value.find("?=", q2 + 1);
        if (end == std::string_view::npos) {
            out.append(value.substr(pos));
            break;
        }
        const std::string_view between = value.substr(pos, start - pos);
        // Whitespace between adjacent encoded words is dropped.
        if (!(last_was_word && trim(between).empty())) out.append(between);
        const std::string_view charset = value.substr(start + 2, q1 - start - 2);
        const char enc = static_cast<char>(std::toupper(static_cast<unsigned char>(value[q1 + 1])));
        std::string payload(value.substr(q2 + 1, end - q2 - 1));
        std::string bytes;
        if (enc == 'B') {
            bytes = decode_base64(payload);
        } else {
            std::replace(payload.begin(), payload.end(), '_', ' ');
            bytes = decode_quoted_printable(payload);
        }
        out += to_utf8(bytes, charset);
        last_was_word = true;
        pos = end + 2;
    }
    return out;
}

std::string strip_html(std::string_view html) {
    static const std::set<std::string> inline_tags{"a", "abbr", "b", "em", "font", "i", "small", "span", "strong", "sub", "sup", "u"};
    std::string out;
    out.reserve(html.size());
    auto space = [&] {
        if (!out.empty() && out.back() != ' ') out.push_back(' ');
    };
    for (std::size_t i = 0; i < html.size(); ++i) {
        const char c = html[i];
        if (c == '<') {
            const auto close = html.find('>', i);
            if (close == std::string_view::npos) break;
            std::string_view tag = html.substr(i + 1, close - i - 1);
            const bool opening = tag.empty() || (tag.front() != '/' && tag.back() != '/');
            if (!tag.empty() && tag.front() == '/') tag.remove_prefix(1);
            std::size_t n = 0;
            while (n < tag.size() && std::isalnum(static_cast<unsigned char>(tag[n]))) ++n;
            const std::string name = to_lower_ascii(tag.substr(0, n));
            i = close;
            if ((name == "script" || name == "style") && opening) {
                // Skip everything up to the matching end tag.
                const auto end = to_lower_ascii(html.substr(i)).find("</" + name);
                if (end == std::string::npos) break;
                const auto gt = html.find('>', i + end);
                if (gt == std::string_view::npos) break;
                i = gt;
                space();
            } else if (!inline_tags.count(name)) {
                space();
            }
            continue;
        }
        if (c == '&') {
            const auto semi = html.find(';', i);
            if (semi != std::string_view::npos && semi - i <= 6) {
                const std::string ent = to_lower_ascii(html.substr(i + 1, semi - i - 1));
                if (ent == "amp") out.push_back('&');
                else if (ent == "lt") out.push_back('<');
                else if (ent == "gt") out.push_back('>');
                else if (ent == "quot") out.push_back('"');
                else space();
                i = semi;
                continue;
            }
        }
        if (std::isspace(static_cast<unsigned char>(c))) space();
        else out.push_back(c);
    }
    while (!out.empty() && out.back() == ' ') out.pop_back();
    return out;
}

}  // namespace phishtriage::mime
