#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sift/corpus.hpp"
#include "sift/structured.hpp"

namespace sift {

using NodeId = std::string;

enum class NodeKind { Leaf, Interim, Final };

[[nodiscard]] std::string_view to_string(NodeKind k) noexcept;
[[nodiscard]] NodeKind node_kind_from_string(std::string_view s);

/// Id of the node that closes the final synthesis.
inline constexpr std::string_view k_final_node_id = "FINAL";

struct SynthesisNode {
    NodeId id;
    NodeKind kind = NodeKind::Leaf;
    std::string text;
    std::string summary_phrase;  // leaves only
    int agent_id = 0;
    std::uint64_t timestamp = 0;
    std::vector<NodeId> children;
    std::optional<ArticleId> source_article;
    /// Ids named by <citation> tags in `text`, first appearance order.
    std::vector<NodeId> citations;
    /// Set when a descendant was detached after this text was written.
    bool stale = false;

    bool operator==(const SynthesisNode&) const = default;
};

/// <citation>ID</citation> ids in order of first appearance, deduplicated.
[[nodiscard]] std::vector<std::string> citation_ids(std::string_view text);

/// Removes every citation tag whose id fails `keep`.
[[nodiscard]] std::string strip_citation_tags(std::string_view text, const std::function<bool(std::string_view)>& keep);

/// One agent's evidence memory: leaf article summaries, interim syntheses
/// layered above them, and the roots still waiting to be merged. Every
/// node has at most one parent, so the graph is a forest.
class ProvenanceGraph {
public:
    explicit ProvenanceGraph(int agent_id = 0);

    [[nodiscard]] int agent_id() const noexcept { return agent_id_; }
    [[nodiscard]] std::size_t size() const noexcept { return nodes_.size(); }
    [[nodiscard]] bool contains(std::string_view id) const;

    /// Throws Error(UnknownNode).
    [[nodiscard]] const SynthesisNode& node(std::string_view id) const;

    /// Nodes in insertion order.
    [[nodiscard]] std::vector<const SynthesisNode*> nodes() const;

    /// Parentless nodes in insertion order.
    [[nodiscard]] const std::vector<NodeId>& roots() const noexcept { return roots_; }
    [[nodiscard]] bool is_root(std::string_view id) const;
    [[nodiscard]] std::optional<NodeId> parent(std::string_view id) const;

    /// Leaves, insertion order.
    [[nodiscard]] std::vector<NodeId> leaves() const;
    [[nodiscard]] std::optional<NodeId> leaf_for(std::string_view article) const;

    /// The id the next add_leaf / merge_node call will use when none is
    /// given explicitly.
    [[nodiscard]] NodeId next_id() const;

    /// Stores an included article's summary as a new root leaf. Throws
    /// NotIncluded when `outcome.related_to_query` is false, DuplicateLeaf
    /// when the article already has a leaf.
    NodeId add_leaf(const ArticleId& article, const ReadOutput& outcome, std::uint64_t timestamp,
                    std::optional<NodeId> id = std::nullopt);

    /// Layers a new node over `children`, which must all be current roots,
    /// and makes it a root. Citation tags naming anything other than a
    /// descendant are stripped from the text. Throws UnknownNode,
    /// InvalidNode (too few children, non-root child, Leaf kind),
    /// DuplicateNode.
    NodeId merge_node(NodeKind kind, const std::vector<NodeId>& children, std::string text, std::uint64_t timestamp,
                      std::optional<NodeId> id = std::nullopt);

    /// Adds `child` under `parent`. Throws CycleDetected when `parent` is
    /// `child` or one of its descendants, InvalidNode when `child` already
    /// has a parent.
    void attach(std::string_view parent, std::string_view child);

    /// Removes a leaf. A parent left with fewer than two children is
    /// collapsed and its surviving child takes its place. Every remaining
    /// ancestor is flagged stale and loses citations to nodes no longer
    /// below it. Returns the ids removed, the leaf first.
    std::vector<NodeId> detach_leaf(std::string_view leaf);

    void set_timestamp(std::string_view id, std::uint64_t timestamp);

    /// Replaces a node's text (re-synthesis) and clears its stale flag.
    void rewrite(std::string_view id, std::string text);

    /// Flags every ancestor of `id` stale.
    void mark_ancestors_stale(std::string_view id);

    /// Leaf descendants (node id, article id) in depth-first child order.
    /// Throws Error(UnknownNode).
    [[nodiscard]] std::vector<std::pair<NodeId, ArticleId>> provenance_of(std::string_view id) const;

    /// All proper descendants of `id`.
    [[nodiscard]] std::set<NodeId> descendants(std::string_view id) const;

    /// Copies every node of `other` into this graph, keeping ids, roots
    /// and timestamps. Throws DuplicateNode on an id clash.
    void absorb(const ProvenanceGraph& other);

    /// Structural self-check; returns a description of the first violated
    /// invariant, or nothing.
    [[nodiscard]] std::optional<std::string> validate() const;

    bool operator==(const ProvenanceGraph& other) const;

private:
    SynthesisNode& mutable_node(std::string_view id);
    void prune_citations(SynthesisNode& n);

    int agent_id_ = 0;
    std::size_t counter_ = 0;
    std::map<NodeId, SynthesisNode, std::less<>> nodes_;
    std::vector<NodeId> order_;
    std::vector<NodeId> roots_;
    std::map<NodeId, NodeId, std::less<>> parent_;
    std::map<ArticleId, NodeId, std::less<>> leaf_by_article_;

    friend nlohmann::json to_json_value(const ProvenanceGraph& g);
    friend ProvenanceGraph graph_from_json(const nlohmann::json& j);
};

/// Node-link export: one record per node with node_id, kind, agent_id,
/// timestamp, children, source_article and text.
[[nodiscard]] nlohmann::json export_nodes(const ProvenanceGraph& g);

[[nodiscard]] nlohmann::json node_to_json(const SynthesisNode& n);
[[nodiscard]] SynthesisNode node_from_json(const nlohmann::json& j);

/// Full round-trippable state, including counters and root order.
[[nodiscard]] nlohmann::json to_json_value(const ProvenanceGraph& g);
[[nodiscard]] ProvenanceGraph graph_from_json(const nlohmann::json& j);

inline constexpr std::size_t k_default_recheck_cap = 10;

/// A leaf whose Read decision was re-run after a criteria change.
struct Revision {
    NodeId leaf;
    ArticleId article;
    bool excluded = false;
    std::string reason;
    /// New summary text when the leaf stays and its summary changed.
    std::string summary;

    bool operator==(const Revision&) const = default;
};

/// Re-runs the Read decision for an article under the updated settings.
using ReadDecider = std::function<ReadOutput(const ArticleRecord&)>;

/// Leaves ranked for a re-check: cosine between the leaf article's
/// embedding and `query` above zero, highest first with ties by article
/// id, at most `cap`.
[[nodiscard]] std::vector<NodeId> recheck_candidates(const ProvenanceGraph& g, const Corpus& corpus,
                                                     std::span<const double> query, std::size_t cap);

/// Re-decides the top candidates with `decide`. Leaves that fall out are
/// detached; surviving leaves whose summary changed are rewritten and
/// their ancestors flagged stale. Corpus decisions are left to the caller.
std::vector<Revision> recheck(ProvenanceGraph& g, const Corpus& corpus, std::span<const double> query,
                              const ReadDecider& decide, std::size_t cap = k_default_recheck_cap);

/// Applies revisions computed elsewhere (replay of a logged re-check).
void apply_revisions(ProvenanceGraph& g, std::span<const Revision> revisions);

}  // namespace sift
