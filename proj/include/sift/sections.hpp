#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sift {

/// Report sections in the order the final report emits them by default.
inline constexpr std::array<std::string_view, 5> k_report_sections = {
    "Introduction", "Study Design", "Key Findings", "Discussion", "Conclusion",
};

/// The order the synthesis prompt lists them in.
inline constexpr std::array<std::string_view, 5> k_prompt_section_order = {
    "Introduction", "Study Design", "Key Findings", "Conclusion", "Discussion",
};

struct Section {
    std::string name;
    std::string body;
};

/// Splits synthesized text into the five named sections. A heading is a
/// section name at the start of a line, optionally preceded by a bullet,
/// '#' marks or an HTML tag, followed by ':' or a closing tag or the end
/// of the line. HTML tags other than <citation> are removed from bodies.
/// Text before the first heading is dropped; a repeated heading appends.
[[nodiscard]] std::vector<Section> parse_sections(std::string_view text);

/// Body of `name`, if present.
[[nodiscard]] std::optional<std::string> section_body(std::string_view text, std::string_view name);

}  // namespace sift
