#pragma once

#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace phishtriage::mime {

using HeaderList = std::vector<std::pair<std::string, std::string>>;

/// A parsed message or body part. Attachments other than text and embedded
/// messages are dropped.
struct Entity {
    HeaderList headers;
    std::string content_type = "text/plain";  // lowercased, no parameters
    /// Decoded UTF-8 text for text/* leaves; empty otherwise.
    std::string text;
    std::vector<Entity> parts;     // multipart children
    std::vector<Entity> embedded;  // message/rfc822 payloads

    /// First header with this name (case-insensitive), decoded; empty if absent.
    std::string header(std::string_view name) const;
    bool has_header(std::string_view name) const;

    /// Body text of this entity: the first text/plain leaf (depth-first, not
    /// descending into embedded messages), else the first text/html leaf with
    /// tags stripped.
    std::string body_text() const;
};

/// Splits a header block from its body. Returns false when the input does not
/// start with an RFC 5322 style header line.
bool split_header_block(std::string_view raw, HeaderList& headers, std::string_view& body);

Entity parse(std::string_view raw, int max_depth = 16);

/// Decodes RFC 2047 encoded words (B and Q) into UTF-8.
std::string decode_encoded_words(std::string_view value);
std::string decode_quoted_printable(std::string_view s);
std::string decode_base64(std::string_view s);
/// Converts bytes in `charset` to UTF-8; unknown charsets pass through.
std::string to_utf8(std::string_view bytes, std::string_view charset);
std::string strip_html(std::string_view html);

/// Value of a `key=value` parameter in a structured header such as Content-Type.
std::string header_param(std::string_view value, std::string_view key);

}  // namespace phishtriage::mime
