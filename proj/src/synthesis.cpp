#include "sift/synthesis.hpp"

#include <algorithm>
#include <set>

#include <spdlog/spdlog.h>

#include "sift/error.hpp"
#include "sift/text.hpp"

namespace sift {

using nlohmann::json;

Renumbered renumber_citations(std::string_view s, const ProvenanceGraph& graph, std::vector<NodeId> numbering)
{
    constexpr std::string_view open = "<citation>";
    constexpr std::string_view close = "</citation>";
    Renumbered out;
    out.numbering = std::move(numbering);
    std::size_t i = 0;
    while (i < s.size()) {
        const std::size_t pos = s.find(open, i);
        const std::size_t end = pos == std::string_view::npos ? pos : s.find(close, pos + open.size());
        if (pos == std::string_view::npos || end == std::string_view::npos) {
            out.text.append(s.substr(i));
            break;
        }
        out.text.append(s.substr(i, pos - i));
        const auto id = text::trim(s.substr(pos + open.size(), end - pos - open.size()));
        i = end + close.size();
        if (!graph.contains(id)) {
            spdlog::warn("citation of unknown node '{}' removed", id);
            while (!out.text.empty() && out.text.back() == ' ') {
                out.text.pop_back();
            }
            continue;
        }
        auto it = std::find(out.numbering.begin(), out.numbering.end(), id);
        if (it == out.numbering.end()) {
            out.numbering.push_back(id);
            it = out.numbering.end() - 1;
        }
        out.text += "[" + std::to_string(it - out.numbering.begin() + 1) + "]";
    }
    return out;
}

ProvenanceGraph combine_graphs(std::span<const ProvenanceGraph> graphs)
{
    ProvenanceGraph all(-1);
    for (const auto& g : graphs) {
        all.absorb(g);
    }
    return all;
}

namespace {

std::size_t leaf_count(std::span<const ProvenanceGraph> graphs)
{
    std::size_t n = 0;
    for (const auto& g : graphs) {
        n += g.leaves().size();
    }
    return n;
}

struct MergeText {
    std::string text;
    std::string prompt;
};

// Final-mode synthesis over `ids`: the last one plays the new summary.
MergeText integrate(const ProvenanceGraph& g, const std::vector<NodeId>& ids, const AgentConfig& config,
                    Provider& provider, const prompts::TemplateSet& templates)
{
    const NodeId& current = ids.back();
    std::vector<std::string> listed;
    std::vector<PromptItem> items;
    for (std::size_t i = 0; i + 1 < ids.size(); ++i) {
        const auto& n = g.node(ids[i]);
        listed.push_back(n.id + ": " + n.text);
        items.push_back({n.id, "", n.text});
    }
    CompletionRequest req;
    req.schema = SchemaId::Synthesize;
    req.final_synthesis = true;
    req.variables = {
        {"query", config.research_question},
        {"current_summary_index", current},
        {"paper_summary", g.node(current).text},
        {"previous_summaries", listed.empty() ? std::string("None.") : text::join(listed, "\n\n")},
        {"summarization_requirement", config.summarization_requirement},
        {"inclusion_exclusion_criteria", config.inclusion_exclusion_criteria},
    };
    req.prompt = templates.render(SchemaId::Synthesize, req.variables);
    req.items = std::move(items);
    const auto out = std::get<SynthesizeOutput>(complete_structured(provider, req));
    return {out.synthesized_summary, req.prompt};
}

std::vector<CitedArticle> cited_articles(const ProvenanceGraph& g, const NodeId& id, const Corpus& corpus)
{
    std::vector<CitedArticle> out;
    for (const auto& [leaf, article] : g.provenance_of(id)) {
        const auto idx = corpus.index_of(article);
        out.push_back({article, idx ? corpus.at(*idx).title : std::string()});
    }
    return out;
}

void validate_order(const std::vector<std::string>& order)
{
    std::set<std::string> want(k_report_sections.begin(), k_report_sections.end());
    std::set<std::string> got(order.begin(), order.end());
    if (order.size() != want.size() || got != want) {
        throw Error(ErrorCode::InvalidArgument, "section order must list the five report sections once each");
    }
}

}  // namespace

FinalReport final_synthesis(std::span<const ProvenanceGraph> graphs, const Corpus& corpus, const AgentConfig& config,
                            Provider& provider, const prompts::TemplateSet& templates, const SynthesisOptions& options)
{
    validate_order(options.section_order);
    if (leaf_count(graphs) == 0) {
        throw Error(ErrorCode::NoEvidence, "no included articles");
    }
    FinalReport report;
    report.research_question = config.research_question;

    std::vector<ProvenanceGraph> fresh(graphs.begin(), graphs.end());
    for (auto& g : fresh) {
        // Children precede parents in timestamp order, so nested stale
        // nodes see their children's new text.
        std::vector<const SynthesisNode*> stale;
        for (const auto* n : g.nodes()) {
            if (n->stale) {
                stale.push_back(n);
            }
        }
        std::stable_sort(stale.begin(), stale.end(),
                         [](const SynthesisNode* a, const SynthesisNode* b) { return a->timestamp < b->timestamp; });
        std::vector<NodeId> ids;
        for (const auto* n : stale) {
            ids.push_back(n->id);
        }
        for (const auto& id : ids) {
            const auto merged = integrate(g, g.node(id).children, config, provider, templates);
            g.rewrite(id, merged.text);
            report.rewrites.push_back({id, g.node(id).text});
            report.prompts.push_back(merged.prompt);
        }
    }

    report.graph = combine_graphs(fresh);
    const std::vector<NodeId> roots = report.graph.roots();
    const auto merged = integrate(report.graph, roots, config, provider, templates);
    report.prompts.push_back(merged.prompt);
    report.graph.merge_node(NodeKind::Final, roots, merged.text, options.timestamp, std::string(k_final_node_id));
    report.final_node_id = std::string(k_final_node_id);

    const auto& final_text = report.graph.node(k_final_node_id).text;
    const auto parsed = parse_sections(final_text);
    std::vector<NodeId> numbering;
    for (const auto& name : options.section_order) {
        std::string body;
        for (const auto& s : parsed) {
            if (s.name == name) {
                body = s.body;
            }
        }
        auto renumbered = renumber_citations(body, report.graph, std::move(numbering));
        numbering = std::move(renumbered.numbering);
        report.sections.push_back({name, text::trim(renumbered.text)});
    }
    for (std::size_t i = 0; i < numbering.size(); ++i) {
        report.bibliography.push_back(
            {static_cast<int>(i + 1), numbering[i], cited_articles(report.graph, numbering[i], corpus)});
    }
    return report;
}

std::string render_report(const FinalReport& report, ReportFormat format)
{
    std::string out;
    const auto body_of = [](const Section& s) {
        return s.body.empty() ? std::string(k_empty_section) : s.body;
    };
    const auto reference = [](const BibliographyEntry& b) {
        std::vector<std::string> parts;
        for (const auto& a : b.articles) {
            parts.push_back(a.title + " (" + a.id + ")");
        }
        return text::join(parts, "; ") + " [" + b.node_id + "]";
    };
    if (format == ReportFormat::Markdown) {
        out += "# Systematic review\n\n";
        out += "**Research question:** " + report.research_question + "\n\n";
        for (const auto& s : report.sections) {
            out += "## " + s.name + "\n\n" + body_of(s) + "\n\n";
        }
        out += "## References\n\n";
        for (const auto& b : report.bibliography) {
            out += std::to_string(b.number) + ". " + reference(b) + "\n";
        }
        if (report.bibliography.empty()) {
            out += std::string(k_empty_section) + "\n";
        }
        return out;
    }
    const auto underline = [](const std::string& title) { return title + "\n" + std::string(title.size(), '-') + "\n"; };
    out += "SYSTEMATIC REVIEW\n\nResearch question: " + report.research_question + "\n\n";
    for (const auto& s : report.sections) {
        out += underline(s.name) + body_of(s) + "\n\n";
    }
    out += underline("References");
    for (const auto& b : report.bibliography) {
        out += "[" + std::to_string(b.number) + "] " + reference(b) + "\n";
    }
    if (report.bibliography.empty()) {
        out += std::string(k_empty_section) + "\n";
    }
    return out;
}

json citation_map(const FinalReport& report)
{
    json out = json::array();
    for (const auto& b : report.bibliography) {
        json articles = json::array();
        for (const auto& a : b.articles) {
            articles.push_back({{"article_id", a.id}, {"title", a.title}});
        }
        out.push_back({{"n", b.number}, {"node_id", b.node_id}, {"articles", articles}});
    }
    return out;
}

json report_to_json(const FinalReport& report)
{
    json sections = json::array();
    for (const auto& s : report.sections) {
        sections.push_back({{"name", s.name}, {"body", s.body}});
    }
    json rewrites = json::array();
    for (const auto& r : report.rewrites) {
        rewrites.push_back({{"node_id", r.node_id}, {"text", r.text}});
    }
    return {
        {"research_question", report.research_question},
        {"sections", sections},
        {"bibliography", citation_map(report)},
        {"final_node", node_to_json(report.graph.node(report.final_node_id))},
        {"rewrites", rewrites},
        {"prompts", report.prompts},
    };
}

FinalReport report_from_json(const json& j, std::span<const ProvenanceGraph> graphs)
{
    FinalReport r;
    r.research_question = j.at("research_question").get<std::string>();
    for (const auto& s : j.at("sections")) {
        r.sections.push_back({s.at("name").get<std::string>(), s.at("body").get<std::string>()});
    }
    for (const auto& b : j.at("bibliography")) {
        BibliographyEntry e;
        e.number = b.at("n").get<int>();
        e.node_id = b.at("node_id").get<std::string>();
        for (const auto& a : b.at("articles")) {
            e.articles.push_back({a.at("article_id").get<std::string>(), a.at("title").get<std::string>()});
        }
        r.bibliography.push_back(std::move(e));
    }
    for (const auto& w : j.at("rewrites")) {
        r.rewrites.push_back({w.at("node_id").get<std::string>(), w.at("text").get<std::string>()});
    }
    r.prompts = j.value("prompts", std::vector<std::string>{});
    r.graph = combine_graphs(graphs);
    const auto final_node = node_from_json(j.at("final_node"));
    r.final_node_id = final_node.id;
    r.graph.merge_node(NodeKind::Final, final_node.children, final_node.text, final_node.timestamp, final_node.id);
    return r;
}

}  // namespace sift
