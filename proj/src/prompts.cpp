#include "sift/prompts.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "sift/error.hpp"

namespace sift::prompts {

namespace builtin {
extern const std::string_view k_retrieve_template;
extern const std::string_view k_read_template;
extern const std::string_view k_synthesize_template;
extern const std::string_view k_reflect_template;
}  // namespace builtin

namespace {

bool is_name_char(char c) noexcept
{
    return (c >= 'a' && c <= 'z') || c == '_';
}

// Length of the placeholder starting at `open` ("{name}"), or 0.
std::size_t placeholder_at(std::string_view tmpl, std::size_t open)
{
    std::size_t i = open + 1;
    while (i < tmpl.size() && is_name_char(tmpl[i])) {
        ++i;
    }
    if (i == open + 1 || i >= tmpl.size() || tmpl[i] != '}') {
        return 0;
    }
    return i + 1 - open;
}

std::string_view file_name(SchemaId schema)
{
    switch (schema) {
    case SchemaId::Retrieve: return "retrieve.txt";
    case SchemaId::Read: return "read.txt";
    case SchemaId::Synthesize: return "synthesize.txt";
    case SchemaId::Reflect: return "reflect.txt";
    }
    return "";
}

constexpr SchemaId k_all[] = {SchemaId::Retrieve, SchemaId::Read, SchemaId::Synthesize, SchemaId::Reflect};

}  // namespace

std::string render(std::string_view tmpl, const Variables& vars)
{
    std::string out;
    out.reserve(tmpl.size() * 2);
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] == '{') {
            if (const std::size_t len = placeholder_at(tmpl, i); len > 0) {
                const std::string name(tmpl.substr(i + 1, len - 2));
                const auto it = vars.find(name);
                if (it == vars.end()) {
                    throw Error(ErrorCode::InvalidArgument, "missing prompt variable " + name);
                }
                out += it->second;
                i += len;
                continue;
            }
        }
        out.push_back(tmpl[i]);
        ++i;
    }
    return out;
}

std::vector<std::string> placeholders(std::string_view tmpl)
{
    std::vector<std::string> names;
    for (std::size_t i = 0; i < tmpl.size(); ++i) {
        if (tmpl[i] != '{') {
            continue;
        }
        if (const std::size_t len = placeholder_at(tmpl, i); len > 0) {
            std::string name(tmpl.substr(i + 1, len - 2));
            if (std::find(names.begin(), names.end(), name) == names.end()) {
                names.push_back(std::move(name));
            }
            i += len - 1;
        }
    }
    return names;
}

TemplateSet TemplateSet::builtin()
{
    TemplateSet set;
    set.templates_[SchemaId::Retrieve] = std::string(builtin::k_retrieve_template);
    set.templates_[SchemaId::Read] = std::string(builtin::k_read_template);
    set.templates_[SchemaId::Synthesize] = std::string(builtin::k_synthesize_template);
    set.templates_[SchemaId::Reflect] = std::string(builtin::k_reflect_template);
    return set;
}

TemplateSet TemplateSet::load(const std::filesystem::path& dir)
{
    TemplateSet set = builtin();
    for (const SchemaId schema : k_all) {
        const auto path = dir / file_name(schema);
        std::ifstream in(path, std::ios::binary);
        if (!in) {
            continue;
        }
        std::ostringstream buf;
        buf << in.rdbuf();
        set.templates_[schema] = buf.str();
    }
    return set;
}

const std::string& TemplateSet::get(SchemaId schema) const
{
    return templates_.at(schema);
}

std::string TemplateSet::render(SchemaId schema, const Variables& vars) const
{
    return prompts::render(get(schema), vars);
}

}  // namespace sift::prompts
