#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace sift {

/// The four response schemas an agent asks the model for.
enum class SchemaId { Retrieve, Read, Synthesize, Reflect };

[[nodiscard]] std::string_view to_string(SchemaId id) noexcept;

struct RetrieveOutput {
    std::string thought;
    bool skip = false;
    /// One-based candidate indexes, in the order the model listed them.
    std::vector<int> selected;

    bool operator==(const RetrieveOutput&) const = default;
};

struct ReadOutput {
    std::string analysis;
    std::string response_preparation_analysis;
    bool related_to_query = false;
    std::string reason_of_exclusion;
    std::string summary_of_the_paper;
    std::string summary_phrase;
    std::string thought;

    bool operator==(const ReadOutput&) const = default;
};

struct SynthesizeOutput {
    std::vector<std::string> identified_relevant_summaries;
    std::string reasoning;
    std::string synthesized_summary;
    std::string thought;

    bool operator==(const SynthesizeOutput&) const = default;
};

struct ReflectOutput {
    std::string reflection;
    std::string updates_on_additional_requirement;
    std::string updates_on_criteria;
    std::string updates_on_summarization_requirement;

    [[nodiscard]] bool has_updates() const noexcept
    {
        return !updates_on_additional_requirement.empty() || !updates_on_criteria.empty()
            || !updates_on_summarization_requirement.empty();
    }

    bool operator==(const ReflectOutput&) const = default;
};

using StructuredOutput = std::variant<RetrieveOutput, ReadOutput, SynthesizeOutput, ReflectOutput>;

[[nodiscard]] SchemaId schema_of(const StructuredOutput& output) noexcept;

/// Maximum whitespace-separated words in ReadOutput::summary_phrase.
inline constexpr std::size_t k_max_phrase_words = 3;

/// Locates the first balanced JSON object: inside the first fenced code
/// block when one holds an object, otherwise anywhere in the text. Braces
/// inside string literals do not count. Balanced spans that fail to parse
/// as JSON are skipped. Throws Error(NoObjectFound).
[[nodiscard]] nlohmann::json extract_first_object(std::string_view raw);

/// Extracts and validates against `schema`. Missing or mistyped required
/// keys raise Error(SchemaViolation, <key>); extra keys are ignored.
/// A summary_phrase longer than three words is cut to its first three.
[[nodiscard]] StructuredOutput parse_structured(std::string_view raw, SchemaId schema);

[[nodiscard]] nlohmann::json to_json(const StructuredOutput& output);

/// Compact JSON text that parse_structured() accepts back unchanged.
[[nodiscard]] std::string serialize(const StructuredOutput& output);

}  // namespace sift
