#include "sift/sections.hpp"

#include <algorithm>
#include <cctype>

#include "sift/text.hpp"

namespace sift {

namespace {

bool iequals_prefix(std::string_view s, std::string_view prefix)
{
    if (s.size() < prefix.size()) {
        return false;
    }
    for (std::size_t i = 0; i < prefix.size(); ++i) {
        if (std::tolower(static_cast<unsigned char>(s[i])) != std::tolower(static_cast<unsigned char>(prefix[i]))) {
            return false;
        }
    }
    return true;
}

std::string_view skip_decoration(std::string_view line)
{
    bool changed = true;
    while (changed && !line.empty()) {
        changed = false;
        while (!line.empty() && (line.front() == ' ' || line.front() == '\t' || line.front() == '#'
                                 || line.front() == '*' || line.front() == '-')) {
            line.remove_prefix(1);
            changed = true;
        }
        if (line.starts_with("\xE2\x80\xA2")) {  // bullet
            line.remove_prefix(3);
            changed = true;
        }
        if (line.starts_with("<") && !iequals_prefix(line, "<citation>")) {
            const auto close = line.find('>');
            if (close != std::string_view::npos) {
                line.remove_prefix(close + 1);
                changed = true;
            }
        }
    }
    return line;
}

// Section name and the remainder of the line when `line` is a heading.
std::optional<std::pair<std::string, std::string_view>> heading(std::string_view line)
{
    line = skip_decoration(line);
    for (const auto name : k_report_sections) {
        if (!iequals_prefix(line, name)) {
            continue;
        }
        std::string_view rest = line.substr(name.size());
        // Closing tags or emphasis right after the name.
        while (!rest.empty() && (rest.front() == '*' || rest.front() == ' ')) {
            rest.remove_prefix(1);
        }
        while (rest.starts_with("</")) {
            const auto close = rest.find('>');
            if (close == std::string_view::npos) {
                break;
            }
            rest.remove_prefix(close + 1);
        }
        if (rest.starts_with(":")) {
            rest.remove_prefix(1);
        } else if (!text::trim(rest).empty() && !rest.starts_with("<")) {
            continue;
        }
        return std::pair{std::string(name), rest};
    }
    return std::nullopt;
}

std::string strip_tags(std::string_view s)
{
    std::string out;
    std::size_t i = 0;
    while (i < s.size()) {
        if (s[i] == '<') {
            const auto close = s.find('>', i);
            if (close != std::string_view::npos) {
                const auto tag = text::to_lower(s.substr(i, close + 1 - i));
                if (tag == "<citation>" || tag == "</citation>") {
                    out.append(s.substr(i, close + 1 - i));
                } else if (tag.starts_with("</p") || tag.starts_with("<br") || tag.starts_with("</li")) {
                    out.push_back(' ');
                }
                i = close + 1;
                continue;
            }
        }
        out.push_back(s[i]);
        ++i;
    }
    return out;
}

std::string squeeze(std::string_view s)
{
    std::string out;
    bool space = false;
    for (const char c : s) {
        if (std::isspace(static_cast<unsigned char>(c)) != 0) {
            space = true;
            continue;
        }
        if (space && !out.empty()) {
            out.push_back(' ');
        }
        space = false;
        out.push_back(c);
    }
    return out;
}

}  // namespace

std::vector<Section> parse_sections(std::string_view raw)
{
    // Headings that share a line with HTML siblings get their own line.
    std::string normalised(raw);
    for (const char* tag : {"<h1", "<h2", "<h3", "<h4", "<p>", "<b>", "<strong>", "<li>"}) {
        std::string lowered = text::to_lower(normalised);
        std::string out;
        std::size_t last = 0;
        for (std::size_t pos = lowered.find(tag); pos != std::string::npos; pos = lowered.find(tag, pos + 1)) {
            out.append(normalised, last, pos - last);
            out.push_back('\n');
            last = pos;
        }
        out.append(normalised, last, std::string::npos);
        normalised = std::move(out);
    }

    std::vector<Section> sections;
    std::vector<std::string> bodies;
    std::size_t pos = 0;
    const std::string_view all(normalised);
    int current = -1;
    while (pos <= all.size()) {
        const std::size_t nl = all.find('\n', pos);
        const std::string_view line = all.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? all.size() + 1 : nl + 1;
        if (const auto h = heading(line)) {
            const auto it = std::find_if(sections.begin(), sections.end(),
                                         [&](const Section& s) { return s.name == h->first; });
            if (it == sections.end()) {
                sections.push_back({h->first, {}});
                bodies.emplace_back();
                current = static_cast<int>(sections.size() - 1);
            } else {
                current = static_cast<int>(it - sections.begin());
            }
            bodies[static_cast<std::size_t>(current)].append(h->second).push_back('\n');
            continue;
        }
        if (current >= 0) {
            bodies[static_cast<std::size_t>(current)].append(line).push_back('\n');
        }
    }
    for (std::size_t i = 0; i < sections.size(); ++i) {
        sections[i].body = text::trim(squeeze(strip_tags(bodies[i])));
    }
    return sections;
}

std::optional<std::string> section_body(std::string_view text, std::string_view name)
{
    for (auto& s : parse_sections(text)) {
        if (s.name == name) {
            return std::move(s.body);
        }
    }
    return std::nullopt;
}

}  // namespace sift
