#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sift::csv {

using Row = std::vector<std::string>;

/// RFC 4180 reader: quoted fields may hold commas, doubled quotes and line
/// breaks; both LF and CRLF terminate records. A leading UTF-8 BOM is
/// skipped. Throws Error(MalformedUpload) on an unterminated quote.
[[nodiscard]] std::vector<Row> parse(std::string_view document);

/// Quotes the field only when it contains a comma, quote, CR or LF.
[[nodiscard]] std::string escape(std::string_view field);

/// One record terminated by "\n".
[[nodiscard]] std::string format_row(const Row& row);

}  // namespace sift::csv
