#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sift/agent.hpp"
#include "sift/corpus.hpp"
#include "sift/memory.hpp"
#include "sift/prompts.hpp"
#include "sift/provider.hpp"
#include "sift/sections.hpp"

namespace sift {

struct CitedArticle {
    ArticleId id;
    std::string title;

    bool operator==(const CitedArticle&) const = default;
};

struct BibliographyEntry {
    int number = 0;
    NodeId node_id;
    /// The cited node's leaf articles; one entry for a leaf citation.
    std::vector<CitedArticle> articles;

    bool operator==(const BibliographyEntry&) const = default;
};

/// A stale node's replacement text produced before the final merge.
struct Rewrite {
    NodeId node_id;
    std::string text;

    bool operator==(const Rewrite&) const = default;
};

struct FinalReport {
    std::string research_question;
    /// The five sections, in the configured order, bodies with [n] citations.
    std::vector<Section> sections;
    std::vector<BibliographyEntry> bibliography;
    NodeId final_node_id{k_final_node_id};
    /// Every agent graph plus the Final node.
    ProvenanceGraph graph{-1};
    std::vector<Rewrite> rewrites;
    /// Prompts issued, re-syntheses first and the final merge last.
    std::vector<std::string> prompts;
};

struct SynthesisOptions {
    /// Section emission order; must name the five report sections.
    std::vector<std::string> section_order{k_report_sections.begin(), k_report_sections.end()};
    std::uint64_t timestamp = 0;
};

struct Renumbered {
    std::string text;
    /// numbering[n - 1] is the node cited as [n].
    std::vector<NodeId> numbering;
};

/// Replaces <citation>ID</citation> tags with [n], numbering ids densely
/// by first appearance and continuing from `numbering`. Tags naming ids
/// absent from `graph` are removed.
[[nodiscard]] Renumbered renumber_citations(std::string_view text, const ProvenanceGraph& graph,
                                            std::vector<NodeId> numbering = {});

/// Copies all agent graphs into one, keeping ids.
[[nodiscard]] ProvenanceGraph combine_graphs(std::span<const ProvenanceGraph> graphs);

/// Stage 3: re-synthesizes stale nodes, merges every root into the Final
/// node with the final-mode synthesis prompt and renumbers citations.
/// The inputs are left untouched; `rewrites` lists the re-synthesized
/// texts for the caller to apply. Throws Error(NoEvidence) when no
/// leaf exists.
[[nodiscard]] FinalReport final_synthesis(std::span<const ProvenanceGraph> graphs, const Corpus& corpus,
                                          const AgentConfig& config, Provider& provider,
                                          const prompts::TemplateSet& templates, const SynthesisOptions& options = {});

enum class ReportFormat { Markdown, PlainText };

inline constexpr std::string_view k_empty_section = "(no content)";

[[nodiscard]] std::string render_report(const FinalReport& report, ReportFormat format = ReportFormat::Markdown);

/// One record per citation number: n, node_id and the cited articles.
[[nodiscard]] nlohmann::json citation_map(const FinalReport& report);

/// Everything except the graph, which is rebuilt from the agent graphs.
[[nodiscard]] nlohmann::json report_to_json(const FinalReport& report);

/// Inverse of report_to_json given the agent graphs after `rewrites`.
[[nodiscard]] FinalReport report_from_json(const nlohmann::json& j, std::span<const ProvenanceGraph> graphs);

}  // namespace sift
