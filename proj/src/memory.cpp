#include "sift/memory.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "sift/error.hpp"
#include "sift/text.hpp"
#include "sift/vecmath.hpp"

namespace sift {

using nlohmann::json;

namespace {

constexpr std::string_view k_open = "<citation>";
constexpr std::string_view k_close = "</citation>";

}  // namespace

std::string_view to_string(NodeKind k) noexcept
{
    switch (k) {
    case NodeKind::Leaf: return "Leaf";
    case NodeKind::Interim: return "Interim";
    case NodeKind::Final: return "Final";
    }
    return "Leaf";
}

NodeKind node_kind_from_string(std::string_view s)
{
    if (s == "Leaf") {
        return NodeKind::Leaf;
    }
    if (s == "Interim") {
        return NodeKind::Interim;
    }
    if (s == "Final") {
        return NodeKind::Final;
    }
    throw Error(ErrorCode::InvalidNode, "unknown node kind " + std::string(s));
}

std::vector<std::string> citation_ids(std::string_view s)
{
    std::vector<std::string> ids;
    for (std::size_t pos = s.find(k_open); pos != std::string_view::npos; pos = s.find(k_open, pos + 1)) {
        const std::size_t start = pos + k_open.size();
        const std::size_t close = s.find(k_close, start);
        if (close == std::string_view::npos) {
            break;
        }
        auto id = text::trim(s.substr(start, close - start));
        if (!id.empty() && std::find(ids.begin(), ids.end(), id) == ids.end()) {
            ids.push_back(std::move(id));
        }
    }
    return ids;
}

std::string strip_citation_tags(std::string_view s, const std::function<bool(std::string_view)>& keep)
{
    std::string out;
    std::size_t i = 0;
    while (i < s.size()) {
        const std::size_t pos = s.find(k_open, i);
        if (pos == std::string_view::npos) {
            out.append(s.substr(i));
            break;
        }
        const std::size_t start = pos + k_open.size();
        const std::size_t close = s.find(k_close, start);
        if (close == std::string_view::npos) {
            out.append(s.substr(i));
            break;
        }
        out.append(s.substr(i, pos - i));
        const auto id = text::trim(s.substr(start, close - start));
        const std::size_t end = close + k_close.size();
        if (keep(id)) {
            out.append(s.substr(pos, end - pos));
        } else {
            // Drop the space the tag was attached with.
            while (!out.empty() && out.back() == ' ') {
                out.pop_back();
            }
        }
        i = end;
    }
    return out;
}

ProvenanceGraph::ProvenanceGraph(int agent_id)
    : agent_id_(agent_id)
{
}

bool ProvenanceGraph::contains(std::string_view id) const
{
    return nodes_.find(id) != nodes_.end();
}

const SynthesisNode& ProvenanceGraph::node(std::string_view id) const
{
    const auto it = nodes_.find(id);
    if (it == nodes_.end()) {
        throw Error(ErrorCode::UnknownNode, std::string(id));
    }
    return it->second;
}

SynthesisNode& ProvenanceGraph::mutable_node(std::string_view id)
{
    const auto it = nodes_.find(id);
    if (it == nodes_.end()) {
        throw Error(ErrorCode::UnknownNode, std::string(id));
    }
    return it->second;
}

std::vector<const SynthesisNode*> ProvenanceGraph::nodes() const
{
    std::vector<const SynthesisNode*> out;
    out.reserve(order_.size());
    for (const auto& id : order_) {
        out.push_back(&nodes_.find(id)->second);
    }
    return out;
}

bool ProvenanceGraph::is_root(std::string_view id) const
{
    return std::find(roots_.begin(), roots_.end(), id) != roots_.end();
}

std::optional<NodeId> ProvenanceGraph::parent(std::string_view id) const
{
    const auto it = parent_.find(id);
    if (it == parent_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::vector<NodeId> ProvenanceGraph::leaves() const
{
    std::vector<NodeId> out;
    for (const auto& id : order_) {
        if (nodes_.find(id)->second.kind == NodeKind::Leaf) {
            out.push_back(id);
        }
    }
    return out;
}

std::optional<NodeId> ProvenanceGraph::leaf_for(std::string_view article) const
{
    const auto it = leaf_by_article_.find(article);
    if (it == leaf_by_article_.end()) {
        return std::nullopt;
    }
    return it->second;
}

NodeId ProvenanceGraph::next_id() const
{
    return "A" + std::to_string(agent_id_) + "-" + std::to_string(counter_ + 1);
}

NodeId ProvenanceGraph::add_leaf(const ArticleId& article, const ReadOutput& outcome, std::uint64_t timestamp,
                                 std::optional<NodeId> id)
{
    if (!outcome.related_to_query) {
        throw Error(ErrorCode::NotIncluded, article);
    }
    if (leaf_by_article_.count(article) != 0) {
        throw Error(ErrorCode::DuplicateLeaf, article);
    }
    SynthesisNode n;
    n.id = id ? *id : next_id();
    if (contains(n.id)) {
        throw Error(ErrorCode::DuplicateNode, n.id);
    }
    n.kind = NodeKind::Leaf;
    n.text = outcome.summary_of_the_paper;
    n.summary_phrase = outcome.summary_phrase;
    n.agent_id = agent_id_;
    n.timestamp = timestamp;
    n.source_article = article;
    ++counter_;
    leaf_by_article_[article] = n.id;
    roots_.push_back(n.id);
    order_.push_back(n.id);
    const NodeId out = n.id;
    nodes_.emplace(out, std::move(n));
    return out;
}

NodeId ProvenanceGraph::merge_node(NodeKind kind, const std::vector<NodeId>& children, std::string text,
                                   std::uint64_t timestamp, std::optional<NodeId> id)
{
    if (kind == NodeKind::Leaf) {
        throw Error(ErrorCode::InvalidNode, "a merge cannot create a leaf");
    }
    const std::size_t min_children = kind == NodeKind::Interim ? 2 : 1;
    std::vector<NodeId> kids;
    for (const auto& c : children) {
        if (std::find(kids.begin(), kids.end(), c) == kids.end()) {
            kids.push_back(c);
        }
    }
    if (kids.size() < min_children) {
        throw Error(ErrorCode::InvalidNode, std::string(to_string(kind)) + " node needs at least "
                                                + std::to_string(min_children) + " children");
    }
    for (const auto& c : kids) {
        static_cast<void>(node(c));
        if (!is_root(c)) {
            throw Error(ErrorCode::InvalidNode, c + " already has a parent");
        }
    }
    SynthesisNode n;
    n.id = id ? *id : next_id();
    if (contains(n.id)) {
        throw Error(ErrorCode::DuplicateNode, n.id);
    }
    n.kind = kind;
    n.agent_id = agent_id_;
    n.timestamp = timestamp;
    n.text = std::move(text);
    ++counter_;
    const NodeId nid = n.id;
    nodes_.emplace(nid, std::move(n));
    order_.push_back(nid);
    for (const auto& c : kids) {
        attach(nid, c);
    }
    roots_.push_back(nid);
    prune_citations(mutable_node(nid));
    return nid;
}

void ProvenanceGraph::attach(std::string_view parent, std::string_view child)
{
    auto& p = mutable_node(parent);
    static_cast<void>(node(child));
    if (parent == child || descendants(child).count(std::string(parent)) != 0) {
        throw Error(ErrorCode::CycleDetected, std::string(parent) + " -> " + std::string(child));
    }
    if (parent_.find(child) != parent_.end()) {
        throw Error(ErrorCode::InvalidNode, std::string(child) + " already has a parent");
    }
    if (p.kind == NodeKind::Leaf) {
        throw Error(ErrorCode::InvalidNode, "a leaf cannot have children");
    }
    p.children.emplace_back(child);
    parent_[std::string(child)] = std::string(parent);
    std::erase(roots_, std::string(child));
}

void ProvenanceGraph::prune_citations(SynthesisNode& n)
{
    const auto below = descendants(n.id);
    bool dropped = false;
    n.text = strip_citation_tags(n.text, [&](std::string_view id) {
        const bool ok = below.count(std::string(id)) != 0;
        if (!ok) {
            dropped = true;
        }
        return ok;
    });
    if (dropped) {
        spdlog::debug("node {}: stripped citations outside its subtree", n.id);
    }
    n.citations = citation_ids(n.text);
}

void ProvenanceGraph::mark_ancestors_stale(std::string_view id)
{
    for (auto p = parent(id); p; p = parent(*p)) {
        mutable_node(*p).stale = true;
    }
}

std::vector<NodeId> ProvenanceGraph::detach_leaf(std::string_view leaf_id)
{
    const auto& leaf = node(leaf_id);
    if (leaf.kind != NodeKind::Leaf) {
        throw Error(ErrorCode::InvalidNode, std::string(leaf_id) + " is not a leaf");
    }
    const NodeId id = leaf.id;
    std::vector<NodeId> removed{id};
    const auto up = parent(id);
    leaf_by_article_.erase(*leaf.source_article);
    nodes_.erase(id);
    std::erase(order_, id);
    if (!up) {
        std::erase(roots_, id);
        return removed;
    }
    parent_.erase(id);
    auto& p = mutable_node(*up);
    std::erase(p.children, id);

    std::optional<NodeId> cursor = *up;
    const std::size_t min_children = p.kind == NodeKind::Interim ? 2 : 1;
    if (p.children.size() < min_children) {
        // Collapse: the survivor (if any) takes the parent's slot.
        const std::optional<NodeId> survivor =
            p.children.empty() ? std::nullopt : std::optional<NodeId>(p.children.front());
        const NodeId pid = p.id;
        const auto grand = parent(pid);
        if (grand) {
            auto& g = mutable_node(*grand);
            auto slot = std::find(g.children.begin(), g.children.end(), pid);
            if (survivor) {
                *slot = *survivor;
                parent_[*survivor] = *grand;
            } else {
                g.children.erase(slot);
            }
        } else {
            auto slot = std::find(roots_.begin(), roots_.end(), pid);
            if (survivor) {
                // Keep root order stable by insertion position of the survivor.
                roots_.erase(slot);
                parent_.erase(*survivor);
                roots_.push_back(*survivor);
                std::stable_sort(roots_.begin(), roots_.end(), [&](const NodeId& a, const NodeId& b) {
                    return std::find(order_.begin(), order_.end(), a) < std::find(order_.begin(), order_.end(), b);
                });
            } else {
                roots_.erase(slot);
            }
        }
        parent_.erase(pid);
        nodes_.erase(pid);
        std::erase(order_, pid);
        removed.push_back(pid);
        cursor = grand;
    }
    for (; cursor; cursor = parent(*cursor)) {
        auto& n = mutable_node(*cursor);
        n.stale = true;
        prune_citations(n);
    }
    return removed;
}

void ProvenanceGraph::set_timestamp(std::string_view id, std::uint64_t timestamp)
{
    mutable_node(id).timestamp = timestamp;
}

void ProvenanceGraph::rewrite(std::string_view id, std::string text)
{
    auto& n = mutable_node(id);
    n.text = std::move(text);
    n.stale = false;
    if (n.kind != NodeKind::Leaf) {
        prune_citations(n);
    }
}

std::vector<std::pair<NodeId, ArticleId>> ProvenanceGraph::provenance_of(std::string_view id) const
{
    std::vector<std::pair<NodeId, ArticleId>> out;
    std::vector<const SynthesisNode*> stack{&node(id)};
    while (!stack.empty()) {
        const auto* n = stack.back();
        stack.pop_back();
        if (n->kind == NodeKind::Leaf) {
            out.emplace_back(n->id, *n->source_article);
            continue;
        }
        for (auto it = n->children.rbegin(); it != n->children.rend(); ++it) {
            stack.push_back(&node(*it));
        }
    }
    return out;
}

std::set<NodeId> ProvenanceGraph::descendants(std::string_view id) const
{
    std::set<NodeId> out;
    std::vector<NodeId> stack(node(id).children);
    while (!stack.empty()) {
        NodeId cur = std::move(stack.back());
        stack.pop_back();
        if (!out.insert(cur).second) {
            continue;
        }
        const auto& kids = node(cur).children;
        stack.insert(stack.end(), kids.begin(), kids.end());
    }
    return out;
}

void ProvenanceGraph::absorb(const ProvenanceGraph& other)
{
    for (const auto& id : other.order_) {
        if (contains(id)) {
            throw Error(ErrorCode::DuplicateNode, id);
        }
    }
    for (const auto& id : other.order_) {
        const auto& n = other.nodes_.find(id)->second;
        nodes_.emplace(id, n);
        order_.push_back(id);
        if (n.source_article) {
            leaf_by_article_[*n.source_article] = id;
        }
    }
    for (const auto& [child, parent] : other.parent_) {
        parent_[child] = parent;
    }
    roots_.insert(roots_.end(), other.roots_.begin(), other.roots_.end());
}

std::optional<std::string> ProvenanceGraph::validate() const
{
    std::set<NodeId> seen;
    std::vector<NodeId> stack(roots_.begin(), roots_.end());
    for (const auto& r : roots_) {
        if (!contains(r)) {
            return "root " + r + " missing";
        }
        if (parent_.count(r) != 0) {
            return "root " + r + " has a parent";
        }
    }
    while (!stack.empty()) {
        NodeId cur = std::move(stack.back());
        stack.pop_back();
        if (!seen.insert(cur).second) {
            return "node " + cur + " reachable twice (cycle or shared child)";
        }
        const auto it = nodes_.find(cur);
        if (it == nodes_.end()) {
            return "dangling child " + cur;
        }
        const auto& n = it->second;
        const bool leaf = n.kind == NodeKind::Leaf;
        if (leaf != n.children.empty() || leaf != n.source_article.has_value()) {
            return "node " + cur + " breaks the leaf shape rule";
        }
        if (n.kind == NodeKind::Interim && n.children.size() < 2) {
            return "interim " + cur + " has fewer than two children";
        }
        if (n.kind == NodeKind::Final && n.children.empty()) {
            return "final node has no children";
        }
        for (const auto& c : n.children) {
            const auto p = parent(c);
            if (!p || *p != cur) {
                return "parent link of " + c + " is inconsistent";
            }
            const auto cit = nodes_.find(c);
            if (cit != nodes_.end() && cit->second.timestamp >= n.timestamp) {
                return "timestamp does not increase from " + c + " to " + cur;
            }
            stack.push_back(c);
        }
    }
    if (seen.size() != nodes_.size()) {
        return "unreachable nodes (cycle)";
    }
    for (const auto& [id, n] : nodes_) {
        if (n.citations != citation_ids(n.text)) {
            return "citation list of " + id + " out of sync with its text";
        }
        if (!n.citations.empty()) {
            const auto below = descendants(id);
            for (const auto& c : n.citations) {
                if (below.count(c) == 0) {
                    return "node " + id + " cites non-descendant " + c;
                }
            }
        }
    }
    return std::nullopt;
}

bool ProvenanceGraph::operator==(const ProvenanceGraph& other) const
{
    return agent_id_ == other.agent_id_ && counter_ == other.counter_ && nodes_ == other.nodes_
        && order_ == other.order_ && roots_ == other.roots_ && parent_ == other.parent_;
}

json node_to_json(const SynthesisNode& n)
{
    return {
        {"node_id", n.id},
        {"kind", to_string(n.kind)},
        {"agent_id", n.agent_id},
        {"timestamp", n.timestamp},
        {"children", n.children},
        {"source_article", n.source_article ? json(*n.source_article) : json(nullptr)},
        {"text", n.text},
        {"summary_phrase", n.summary_phrase},
        {"citations", n.citations},
        {"stale", n.stale},
    };
}

SynthesisNode node_from_json(const json& j)
{
    SynthesisNode n;
    n.id = j.at("node_id").get<std::string>();
    n.kind = node_kind_from_string(j.at("kind").get<std::string>());
    n.agent_id = j.at("agent_id").get<int>();
    n.timestamp = j.at("timestamp").get<std::uint64_t>();
    n.children = j.at("children").get<std::vector<NodeId>>();
    if (!j.at("source_article").is_null()) {
        n.source_article = j.at("source_article").get<std::string>();
    }
    n.text = j.at("text").get<std::string>();
    n.summary_phrase = j.value("summary_phrase", "");
    n.citations = j.value("citations", std::vector<NodeId>{});
    n.stale = j.value("stale", false);
    return n;
}

json export_nodes(const ProvenanceGraph& g)
{
    json out = json::array();
    for (const auto* n : g.nodes()) {
        out.push_back(node_to_json(*n));
    }
    return out;
}

json to_json_value(const ProvenanceGraph& g)
{
    return {
        {"agent_id", g.agent_id_},
        {"counter", g.counter_},
        {"roots", g.roots_},
        {"nodes", export_nodes(g)},
    };
}

ProvenanceGraph graph_from_json(const json& j)
{
    ProvenanceGraph g(j.at("agent_id").get<int>());
    g.counter_ = j.at("counter").get<std::size_t>();
    for (const auto& item : j.at("nodes")) {
        auto n = node_from_json(item);
        for (const auto& c : n.children) {
            g.parent_[c] = n.id;
        }
        if (n.source_article) {
            g.leaf_by_article_[*n.source_article] = n.id;
        }
        g.order_.push_back(n.id);
        const NodeId id = n.id;
        g.nodes_.emplace(id, std::move(n));
    }
    g.roots_ = j.at("roots").get<std::vector<NodeId>>();
    return g;
}

std::vector<NodeId> recheck_candidates(const ProvenanceGraph& g, const Corpus& corpus, std::span<const double> query,
                                       std::size_t cap)
{
    struct Scored {
        double score;
        ArticleId article;
        NodeId leaf;
    };
    std::vector<Scored> scored;
    for (const auto& leaf : g.leaves()) {
        const auto& article = corpus.find(*g.node(leaf).source_article);
        const double c = vec::cosine(query, article.embedding);
        if (c > 0.0) {
            scored.push_back({c, article.id, leaf});
        }
    }
    std::sort(scored.begin(), scored.end(), [](const Scored& a, const Scored& b) {
        if (a.score != b.score) {
            return a.score > b.score;
        }
        return a.article < b.article;
    });
    std::vector<NodeId> out;
    for (std::size_t i = 0; i < scored.size() && i < cap; ++i) {
        out.push_back(scored[i].leaf);
    }
    return out;
}

std::vector<Revision> recheck(ProvenanceGraph& g, const Corpus& corpus, std::span<const double> query,
                              const ReadDecider& decide, std::size_t cap)
{
    std::vector<Revision> out;
    for (const auto& leaf : recheck_candidates(g, corpus, query, cap)) {
        const auto& n = g.node(leaf);
        const auto& article = corpus.find(*n.source_article);
        const ReadOutput verdict = decide(article);
        Revision r;
        r.leaf = leaf;
        r.article = article.id;
        if (!verdict.related_to_query) {
            r.excluded = true;
            r.reason = verdict.reason_of_exclusion;
        } else if (verdict.summary_of_the_paper != n.text) {
            r.summary = verdict.summary_of_the_paper;
        } else {
            continue;
        }
        out.push_back(r);
        apply_revisions(g, std::span<const Revision>(&out.back(), 1));
    }
    return out;
}

void apply_revisions(ProvenanceGraph& g, std::span<const Revision> revisions)
{
    for (const auto& r : revisions) {
        if (r.excluded) {
            g.detach_leaf(r.leaf);
        } else if (!r.summary.empty()) {
            g.rewrite(r.leaf, r.summary);
            g.mark_ancestors_stale(r.leaf);
        }
    }
}

}  // namespace sift
