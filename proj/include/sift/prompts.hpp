#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "sift/structured.hpp"

namespace sift::prompts {

using Variables = std::map<std::string, std::string>;

/// The four prompt templates. Placeholders are `{name}` with name in
/// [a-z_]+; any other brace (the JSON schema examples) is literal text.
class TemplateSet {
public:
    /// Templates compiled in from prompts/*.txt.
    static TemplateSet builtin();

    /// Reads retrieve.txt, read.txt, synthesize.txt and reflect.txt from
    /// `dir`; a missing file falls back to the built-in text.
    static TemplateSet load(const std::filesystem::path& dir);

    [[nodiscard]] const std::string& get(SchemaId schema) const;

    /// Renders the template for `schema`.
    [[nodiscard]] std::string render(SchemaId schema, const Variables& vars) const;

private:
    std::map<SchemaId, std::string> templates_;
};

/// Substitutes every placeholder. Throws Error(InvalidArgument, name) when
/// the template references a variable `vars` does not supply.
[[nodiscard]] std::string render(std::string_view tmpl, const Variables& vars);

/// Distinct placeholder names in order of first appearance.
[[nodiscard]] std::vector<std::string> placeholders(std::string_view tmpl);

}  // namespace sift::prompts
