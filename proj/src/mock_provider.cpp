#include "sift/mock_provider.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <map>

#include <json.hpp>

#include "sift/error.hpp"
#include "sift/sections.hpp"
#include "sift/text.hpp"
#include "sift/vecmath.hpp"

namespace sift {

using nlohmann::json;

namespace mock {

double token_overlap(std::string_view candidate, std::string_view reference)
{
    const auto cand = text::content_token_set(candidate);
    if (cand.empty()) {
        return 0.0;
    }
    const auto ref = text::content_token_set(reference);
    std::size_t shared = 0;
    for (const auto& t : cand) {
        shared += ref.count(t);
    }
    return static_cast<double>(shared) / static_cast<double>(cand.size());
}

namespace {

bool is_generic(std::string_view token)
{
    static constexpr std::string_view k_generic[] = {
        "article", "articles", "paper", "papers", "report", "reports", "studies", "study",
    };
    return std::find(std::begin(k_generic), std::end(k_generic), token) != std::end(k_generic);
}

// Text from `from` to the end of its sentence or clause.
std::string_view clause_from(std::string_view s, std::size_t from)
{
    const std::size_t end = s.find_first_of(".;!?\n", from);
    return s.substr(from, end == std::string_view::npos ? std::string_view::npos : end - from);
}

void collect_keyword(std::string_view lowered, std::string_view marker, std::set<std::string>& out)
{
    for (std::size_t pos = lowered.find(marker); pos != std::string_view::npos;
         pos = lowered.find(marker, pos + 1)) {
        // Whole-word match only.
        if (pos > 0 && std::isalnum(static_cast<unsigned char>(lowered[pos - 1])) != 0) {
            continue;
        }
        for (const auto& token : text::content_tokens(clause_from(lowered, pos + marker.size()))) {
            if (!is_generic(token)) {
                out.insert(token);
                break;
            }
        }
    }
}

}  // namespace

CriteriaRules criteria_rules(std::string_view criteria)
{
    CriteriaRules rules;
    const auto lowered = text::to_lower(criteria);
    collect_keyword(lowered, "only ", rules.required);
    collect_keyword(lowered, "exclude ", rules.excluded);
    return rules;
}

Embedding hash_embed(std::string_view s, std::size_t dimension)
{
    Embedding e;
    e.values.assign(dimension, 0.0);
    for (const auto& token : text::content_tokens(s)) {
        const std::uint64_t h = text::fnv1a(token);
        const std::size_t bucket = h % dimension;
        const double sign = (h >> 63) != 0 ? -1.0 : 1.0;
        e.values[bucket] += sign;
    }
    if (!vec::normalize(e.values)) {
        e.values = canonical_unit_vector(dimension);
        e.degenerate = true;
    }
    return e;
}

std::string strip_citations(std::string_view s)
{
    std::string out;
    std::size_t i = 0;
    while (i < s.size()) {
        if (s.substr(i).starts_with("<citation>")) {
            const std::size_t close = s.find("</citation>", i);
            if (close != std::string_view::npos) {
                i = close + std::string_view("</citation>").size();
                continue;
            }
        }
        out.push_back(s[i]);
        ++i;
    }
    return out;
}

}  // namespace mock

namespace {

std::string fenced(const json& obj)
{
    return "```json\n" + obj.dump(2) + "\n```";
}

std::string var(const CompletionRequest& r, const std::string& name)
{
    const auto it = r.variables.find(name);
    return it == r.variables.end() ? std::string() : it->second;
}

std::string fixed2(double v)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return buf;
}

std::string one_line(std::string_view s)
{
    std::string out(s);
    std::replace(out.begin(), out.end(), '\n', ' ');
    std::replace(out.begin(), out.end(), '\r', ' ');
    return text::trim(out);
}

std::string with_period(std::string s)
{
    s = text::trim(s);
    if (!s.empty() && s.back() != '.' && s.back() != '!' && s.back() != '?') {
        s.push_back('.');
    }
    return s;
}

std::vector<std::string> unique_in_order(const std::vector<std::string>& tokens)
{
    std::vector<std::string> out;
    for (const auto& t : tokens) {
        if (std::find(out.begin(), out.end(), t) == out.end()) {
            out.push_back(t);
        }
    }
    return out;
}

// Key Findings of a synthesized text, or the whole text tagged with its
// own id when it has no sections (a leaf summary).
std::string findings_of(const std::string& id, const std::string& body)
{
    if (auto findings = section_body(body, "Key Findings")) {
        return *findings;
    }
    return with_period(one_line(body)) + " <citation>" + id + "</citation>";
}

std::size_t distinct_citations(std::string_view s)
{
    std::set<std::string> ids;
    const std::string_view open = "<citation>";
    for (std::size_t pos = s.find(open); pos != std::string_view::npos; pos = s.find(open, pos + 1)) {
        const std::size_t start = pos + open.size();
        const std::size_t close = s.find("</citation>", start);
        if (close == std::string_view::npos) {
            break;
        }
        ids.insert(std::string(s.substr(start, close - start)));
    }
    return ids.size();
}

std::string compose_synthesis(const CompletionRequest& r, const std::vector<std::string>& findings)
{
    const std::string joined = text::join(findings, " ");
    const std::string requirement = one_line(var(r, "summarization_requirement"));
    const std::string criteria = one_line(var(r, "inclusion_exclusion_criteria"));
    std::string design = criteria.empty()
        ? std::string("Included summaries were screened for relevance to the question alone.")
        : "Included summaries met the inclusion-exclusion criteria: " + with_period(criteria);
    if (!requirement.empty()) {
        design += " Summaries follow the requirement: " + with_period(requirement);
    }
    const std::size_t sources = distinct_citations(joined);
    return "Introduction: This synthesis addresses the question: " + with_period(one_line(var(r, "query"))) + "\n"
        + "Study Design: " + design + "\n"
        + "Key Findings: " + joined + "\n"
        + "Conclusion: The integrated evidence from " + std::to_string(sources)
        + (sources == 1 ? " source" : " sources") + " bears on the question.\n"
        + "Discussion: The evidence is limited to titles and abstracts; consulting the full text of some "
          "articles may be necessary.";
}

}  // namespace

MockProvider::MockProvider(MockPolicy policy)
    : policy_(policy)
{
    if (policy_.dimension == 0) {
        throw Error(ErrorCode::InvalidArgument, "mock dimension must be positive");
    }
}

std::string MockProvider::complete(const CompletionRequest& request)
{
    if (request.prompt.empty()) {
        throw Error(ErrorCode::InvalidArgument, "empty prompt");
    }
    switch (request.schema) {
    case SchemaId::Retrieve: return retrieve(request);
    case SchemaId::Read: return read(request);
    case SchemaId::Synthesize: return synthesize(request);
    case SchemaId::Reflect: return reflect(request);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown schema");
}

std::vector<Embedding> MockProvider::embed(std::span<const std::string> texts)
{
    std::vector<Embedding> out;
    out.reserve(texts.size());
    for (const auto& t : texts) {
        out.push_back(mock::hash_embed(t, policy_.dimension));
    }
    return out;
}

std::string MockProvider::retrieve(const CompletionRequest& r) const
{
    const std::string reference = var(r, "query") + " " + var(r, "detailed_focus") + " " + var(r, "inclusion_criteria");
    json selected = json::array();
    std::vector<std::string> picked;
    for (const auto& item : r.items) {
        const double overlap = mock::token_overlap(item.title + " " + item.body, reference);
        if (overlap >= policy_.overlap_threshold) {
            selected.push_back(item.id);
            picked.push_back(item.id);
        }
    }
    std::string thought;
    if (picked.empty()) {
        selected.push_back("skip");
        thought = "None of the candidates shares enough terms with the review question.";
    } else {
        thought = "Candidates " + text::join(picked, ", ") + " share enough terms with the review question.";
    }
    return fenced({{"thought", thought}, {"selected_papers", selected}});
}

std::string MockProvider::read(const CompletionRequest& r) const
{
    if (r.items.empty()) {
        throw Error(ErrorCode::InvalidArgument, "read request without a paper");
    }
    const auto& paper = r.items.front();
    const std::string criteria = var(r, "inclusion_criteria");
    const std::string reference = var(r, "query") + " " + var(r, "detailed_focus") + " " + criteria;
    const std::string paper_text = paper.title + " " + paper.body;

    const double overlap = mock::token_overlap(paper_text, reference);
    const auto tokens = text::content_token_set(paper_text);
    const auto rules = mock::criteria_rules(criteria);

    std::string reason;
    if (overlap < policy_.overlap_threshold) {
        reason = "Shares too few terms with the review question (overlap " + fixed2(overlap) + " < "
            + fixed2(policy_.overlap_threshold) + ").";
    } else {
        for (const auto& req : rules.required) {
            if (tokens.count(req) == 0) {
                reason = "Does not meet the inclusion criteria: no mention of '" + req + "'.";
                break;
            }
        }
        if (reason.empty()) {
            for (const auto& ex : rules.excluded) {
                if (tokens.count(ex) != 0) {
                    reason = "Meets an exclusion criterion: mentions '" + ex + "'.";
                    break;
                }
            }
        }
    }
    const bool related = reason.empty();

    const auto ref_tokens = text::content_token_set(reference);
    const auto title_tokens = unique_in_order(text::content_tokens(paper.title));
    std::vector<std::string> phrase;
    for (const auto& t : title_tokens) {
        if (phrase.size() < k_max_phrase_words && ref_tokens.count(t) != 0) {
            phrase.push_back(t);
        }
    }
    if (phrase.empty()) {
        for (const auto& t : title_tokens) {
            if (phrase.size() < k_max_phrase_words) {
                phrase.push_back(t);
            }
        }
    }
    const std::string summary_phrase = phrase.empty() ? "unrelated" : text::join(phrase, " ");

    std::string summary = "not included";
    if (related) {
        std::vector<std::string> parts{with_period(one_line(paper.title))};
        const auto sents = text::sentences(one_line(paper.body));
        for (std::size_t i = 0; i < sents.size() && i < 2; ++i) {
            parts.push_back(sents[i]);
        }
        summary = text::join(parts, " ");
    }

    std::vector<std::string> shared;
    for (const auto& t : tokens) {
        if (ref_tokens.count(t) != 0) {
            shared.push_back(t);
        }
    }
    std::string findings = var(r, "findings_so_far");
    if (text::trim(findings).empty()) {
        findings = "No relevant evidence yet.";
    }

    json out = {
        {"analysis", shared.empty() ? std::string("No terms shared with the review question.")
                                    : "Shared terms: " + text::join(shared, ", ") + "."},
        {"response_preparation_analysis", "Record the screening decision and keep the summary for synthesis."},
        {"related_to_query", related},
        {"reason_of_exclusion", reason},
        {"summary_of_the_paper", summary},
        {"summary_phrase", summary_phrase},
        {"thought", related ? "Evidence so far includes " + summary_phrase + "." : findings},
    };
    return fenced(json::array({out}));
}

std::string MockProvider::synthesize(const CompletionRequest& r) const
{
    const std::string new_id = var(r, "current_summary_index");
    const std::string new_summary = var(r, "paper_summary");

    std::vector<std::string> identified;
    std::string reasoning;
    std::vector<std::string> findings;
    if (r.final_synthesis) {
        for (const auto& item : r.items) {
            identified.push_back(item.id);
            findings.push_back(findings_of(item.id, item.body));
        }
        findings.push_back(findings_of(new_id, new_summary));
        reasoning = "Final synthesis integrates every stored summary.";
    } else {
        const auto target = mock::hash_embed(mock::strip_citations(findings_of(new_id, new_summary)), policy_.dimension);
        double best = policy_.merge_threshold;
        const PromptItem* match = nullptr;
        for (const auto& item : r.items) {
            const auto e = mock::hash_embed(mock::strip_citations(findings_of(item.id, item.body)), policy_.dimension);
            const double c = vec::dot(target.values, e.values);
            if (c > best) {
                best = c;
                match = &item;
            }
        }
        if (match != nullptr) {
            identified.push_back(match->id);
            findings.push_back(findings_of(match->id, match->body));
            reasoning = "Summary " + match->id + " covers the same topic (cosine " + fixed2(best) + ").";
        } else {
            reasoning = "No stored summary is similar enough to merge (threshold "
                + fixed2(policy_.merge_threshold) + ").";
        }
        findings.push_back(findings_of(new_id, new_summary));
    }

    json out = {
        {"identified_relevant_summaries", identified},
        {"reasoning", reasoning},
        {"synthesized_summary", compose_synthesis(r, findings)},
        {"thought", "The evidence base now spans " + std::to_string(findings.size()) + " merged items."},
    };
    return fenced(out);
}

std::string MockProvider::reflect(const CompletionRequest& r) const
{
    std::vector<std::string> criteria;
    std::vector<std::string> summarization;
    std::vector<std::string> additional;
    std::vector<std::string> notes;

    for (const auto& item : r.items) {
        const std::string body = item.body;
        const std::string lowered = text::to_lower(body);

        // Instruct edits arrive as "set <field> to: <value>" lines.
        std::size_t pos = 0;
        while (pos <= body.size()) {
            const std::size_t nl = body.find('\n', pos);
            const std::string line = body.substr(pos, nl == std::string::npos ? std::string::npos : nl - pos);
            pos = nl == std::string::npos ? body.size() + 1 : nl + 1;
            const std::string low = text::to_lower(line);
            if (!low.starts_with("set ")) {
                continue;
            }
            const std::size_t to = low.find(" to: ");
            if (to == std::string::npos) {
                continue;
            }
            const std::string field = text::trim(low.substr(4, to - 4));
            const std::string value = text::trim(line.substr(to + 5));
            if (field == "inclusion_exclusion_criteria") {
                criteria.push_back(value);
            } else if (field == "summarization_requirement") {
                summarization.push_back(value);
            } else if (field == "detailed_focus") {
                additional.push_back(value);
            } else if (field == "research_question") {
                notes.push_back("The research question is now: " + value);
            }
        }
        if (item.title != "chat") {
            continue;
        }
        const auto phrase_after = [&](std::string_view marker) -> std::vector<std::string> {
            std::vector<std::string> out;
            for (std::size_t p = lowered.find(marker); p != std::string::npos; p = lowered.find(marker, p + 1)) {
                if (p > 0 && std::isalnum(static_cast<unsigned char>(lowered[p - 1])) != 0) {
                    continue;
                }
                const auto phrase = text::trim(mock::clause_from(body, p + marker.size()));
                if (!phrase.empty()) {
                    out.push_back(phrase);
                }
            }
            return out;
        };
        for (const auto& p : phrase_after("focus on ")) {
            criteria.push_back("Include only " + with_period(p));
        }
        for (const auto& p : phrase_after("exclude ")) {
            criteria.push_back("Exclude " + with_period(p));
        }
        for (const auto& marker : {"look into ", "also consider ", "investigate "}) {
            for (const auto& p : phrase_after(marker)) {
                additional.push_back(with_period(p));
            }
        }
        for (const auto& sentence : text::sentences(body)) {
            if (text::to_lower(sentence).find("summar") != std::string::npos) {
                summarization.push_back(sentence);
            }
        }
    }

    ReflectOutput out;
    out.updates_on_criteria = text::join(criteria, " ");
    out.updates_on_summarization_requirement = text::join(summarization, " ");
    out.updates_on_additional_requirement = text::join(additional, " ");
    if (!out.has_updates() && notes.empty()) {
        out.reflection = "The feedback approves the current approach; continuing without major changes.";
    } else {
        std::vector<std::string> parts;
        if (!out.updates_on_criteria.empty()) {
            parts.push_back("Screening criteria updated.");
        }
        if (!out.updates_on_summarization_requirement.empty()) {
            parts.push_back("Summarization requirement updated.");
        }
        if (!out.updates_on_additional_requirement.empty()) {
            parts.push_back("Reading focus extended.");
        }
        for (auto& n : notes) {
            parts.push_back(with_period(n));
        }
        out.reflection = text::join(parts, " ");
    }
    return fenced(to_json(out));
}

}  // namespace sift
