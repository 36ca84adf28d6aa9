#include "sift/structured.hpp"

#include <charconv>

#include "sift/error.hpp"
#include "sift/text.hpp"

namespace sift {

using nlohmann::json;

std::string_view to_string(SchemaId id) noexcept
{
    switch (id) {
    case SchemaId::Retrieve: return "Retrieve";
    case SchemaId::Read: return "Read";
    case SchemaId::Synthesize: return "Synthesize";
    case SchemaId::Reflect: return "Reflect";
    }
    return "Unknown";
}

SchemaId schema_of(const StructuredOutput& output) noexcept
{
    return static_cast<SchemaId>(output.index());
}

namespace {

// End (one past the closing brace) of the object opening at `open`, or npos
// when the text ends first.
std::size_t balanced_end(std::string_view s, std::size_t open)
{
    int depth = 0;
    bool in_string = false;
    bool escaped = false;
    for (std::size_t i = open; i < s.size(); ++i) {
        const char c = s[i];
        if (in_string) {
            if (escaped) {
                escaped = false;
            } else if (c == '\\') {
                escaped = true;
            } else if (c == '"') {
                in_string = false;
            }
            continue;
        }
        if (c == '"') {
            in_string = true;
        } else if (c == '{') {
            ++depth;
        } else if (c == '}') {
            if (--depth == 0) {
                return i + 1;
            }
        }
    }
    return std::string_view::npos;
}

std::optional<json> first_object_in(std::string_view s)
{
    for (std::size_t open = s.find('{'); open != std::string_view::npos; open = s.find('{', open + 1)) {
        const std::size_t end = balanced_end(s, open);
        if (end == std::string_view::npos) {
            continue;
        }
        auto parsed = json::parse(s.substr(open, end - open), nullptr, false, true);
        if (!parsed.is_discarded() && parsed.is_object()) {
            return parsed;
        }
    }
    return std::nullopt;
}

std::optional<std::string_view> first_fenced_block(std::string_view s)
{
    const std::size_t fence = s.find("```");
    if (fence == std::string_view::npos) {
        return std::nullopt;
    }
    std::size_t body = s.find('\n', fence + 3);
    if (body == std::string_view::npos) {
        return std::nullopt;
    }
    ++body;
    const std::size_t close = s.find("```", body);
    return s.substr(body, close == std::string_view::npos ? std::string_view::npos : close - body);
}

const json& require(const json& obj, const char* key)
{
    const auto it = obj.find(key);
    if (it == obj.end()) {
        throw Error(ErrorCode::SchemaViolation, key);
    }
    return *it;
}

std::string require_string(const json& obj, const char* key)
{
    const auto& v = require(obj, key);
    if (v.is_null()) {
        return {};
    }
    if (!v.is_string()) {
        throw Error(ErrorCode::SchemaViolation, key);
    }
    return v.get<std::string>();
}

bool require_bool(const json& obj, const char* key)
{
    const auto& v = require(obj, key);
    if (v.is_boolean()) {
        return v.get<bool>();
    }
    if (v.is_string()) {
        const auto s = text::to_lower(text::trim(v.get<std::string>()));
        if (s == "true") {
            return true;
        }
        if (s == "false") {
            return false;
        }
    }
    throw Error(ErrorCode::SchemaViolation, key);
}

std::optional<int> parse_index(std::string_view s)
{
    int value = 0;
    const auto* first = s.data();
    const auto* last = s.data() + s.size();
    const auto [ptr, ec] = std::from_chars(first, last, value);
    if (ec != std::errc() || ptr != last || value < 1) {
        return std::nullopt;
    }
    return value;
}

RetrieveOutput parse_retrieve(const json& obj)
{
    RetrieveOutput out;
    out.thought = require_string(obj, "thought");
    const auto& sel = require(obj, "selected_papers");
    const auto is_skip = [](const std::string& s) { return text::to_lower(text::trim(s)) == "skip"; };
    if (sel.is_string()) {
        if (!is_skip(sel.get<std::string>())) {
            throw Error(ErrorCode::SchemaViolation, "selected_papers");
        }
        out.skip = true;
        return out;
    }
    if (!sel.is_array()) {
        throw Error(ErrorCode::SchemaViolation, "selected_papers");
    }
    bool saw_skip = false;
    for (const auto& item : sel) {
        if (item.is_number_integer() && item.get<long long>() >= 1) {
            out.selected.push_back(static_cast<int>(item.get<long long>()));
        } else if (item.is_string()) {
            const auto s = text::trim(item.get<std::string>());
            if (is_skip(s)) {
                saw_skip = true;
            } else if (const auto idx = parse_index(s)) {
                out.selected.push_back(*idx);
            } else {
                throw Error(ErrorCode::SchemaViolation, "selected_papers");
            }
        } else {
            throw Error(ErrorCode::SchemaViolation, "selected_papers");
        }
    }
    if (saw_skip && !out.selected.empty()) {
        throw Error(ErrorCode::SchemaViolation, "selected_papers");
    }
    // An empty list carries the same meaning as the skip marker.
    out.skip = out.selected.empty();
    return out;
}

ReadOutput parse_read(const json& obj)
{
    ReadOutput out;
    out.analysis = require_string(obj, "analysis");
    out.response_preparation_analysis = require_string(obj, "response_preparation_analysis");
    out.related_to_query = require_bool(obj, "related_to_query");
    out.reason_of_exclusion = require_string(obj, "reason_of_exclusion");
    out.summary_of_the_paper = require_string(obj, "summary_of_the_paper");
    out.summary_phrase = require_string(obj, "summary_phrase");
    out.thought = require_string(obj, "thought");

    auto phrase_words = text::words(out.summary_phrase);
    if (phrase_words.size() > k_max_phrase_words) {
        phrase_words.resize(k_max_phrase_words);
    }
    out.summary_phrase = text::join(phrase_words, " ");

    if (!out.related_to_query && text::trim(out.reason_of_exclusion).empty()) {
        throw Error(ErrorCode::SchemaViolation, "reason_of_exclusion");
    }
    if (out.related_to_query && text::trim(out.summary_of_the_paper).empty()) {
        throw Error(ErrorCode::SchemaViolation, "summary_of_the_paper");
    }
    return out;
}

SynthesizeOutput parse_synthesize(const json& obj)
{
    SynthesizeOutput out;
    const auto& ids = require(obj, "identified_relevant_summaries");
    if (!ids.is_array()) {
        throw Error(ErrorCode::SchemaViolation, "identified_relevant_summaries");
    }
    for (const auto& id : ids) {
        if (id.is_string()) {
            out.identified_relevant_summaries.push_back(text::trim(id.get<std::string>()));
        } else if (id.is_number_integer()) {
            out.identified_relevant_summaries.push_back(std::to_string(id.get<long long>()));
        } else {
            throw Error(ErrorCode::SchemaViolation, "identified_relevant_summaries");
        }
    }
    out.reasoning = require_string(obj, "reasoning");
    out.synthesized_summary = require_string(obj, "synthesized_summary");
    out.thought = require_string(obj, "thought");
    return out;
}

ReflectOutput parse_reflect(const json& obj)
{
    ReflectOutput out;
    out.reflection = require_string(obj, "reflection");
    out.updates_on_additional_requirement = require_string(obj, "updates_on_additional_requirement");
    out.updates_on_criteria = require_string(obj, "updates_on_criteria");
    out.updates_on_summarization_requirement = require_string(obj, "updates_on_summarization_requirement");
    return out;
}

}  // namespace

json extract_first_object(std::string_view raw)
{
    if (const auto block = first_fenced_block(raw)) {
        if (auto obj = first_object_in(*block)) {
            return std::move(*obj);
        }
    }
    if (auto obj = first_object_in(raw)) {
        return std::move(*obj);
    }
    throw Error(ErrorCode::NoObjectFound, "");
}

StructuredOutput parse_structured(std::string_view raw, SchemaId schema)
{
    if (text::trim(raw).empty()) {
        throw Error(ErrorCode::NoObjectFound, "empty response");
    }
    const json obj = extract_first_object(raw);
    switch (schema) {
    case SchemaId::Retrieve: return parse_retrieve(obj);
    case SchemaId::Read: return parse_read(obj);
    case SchemaId::Synthesize: return parse_synthesize(obj);
    case SchemaId::Reflect: return parse_reflect(obj);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown schema");
}

json to_json(const StructuredOutput& output)
{
    struct Visitor {
        json operator()(const RetrieveOutput& o) const
        {
            json selected = json::array();
            if (o.skip) {
                selected.push_back("skip");
            } else {
                for (const int i : o.selected) {
                    selected.push_back(std::to_string(i));
                }
            }
            return {{"thought", o.thought}, {"selected_papers", selected}};
        }
        json operator()(const ReadOutput& o) const
        {
            return {
                {"analysis", o.analysis},
                {"response_preparation_analysis", o.response_preparation_analysis},
                {"related_to_query", o.related_to_query},
                {"reason_of_exclusion", o.reason_of_exclusion},
                {"summary_of_the_paper", o.summary_of_the_paper},
                {"summary_phrase", o.summary_phrase},
                {"thought", o.thought},
            };
        }
        json operator()(const SynthesizeOutput& o) const
        {
            return {
                {"identified_relevant_summaries", o.identified_relevant_summaries},
                {"reasoning", o.reasoning},
                {"synthesized_summary", o.synthesized_summary},
                {"thought", o.thought},
            };
        }
        json operator()(const ReflectOutput& o) const
        {
            return {
                {"reflection", o.reflection},
                {"updates_on_additional_requirement", o.updates_on_additional_requirement},
                {"updates_on_criteria", o.updates_on_criteria},
                {"updates_on_summarization_requirement", o.updates_on_summarization_requirement},
            };
        }
    };
    return std::visit(Visitor{}, output);
}

std::string serialize(const StructuredOutput& output)
{
    return to_json(output).dump();
}

}  // namespace sift
