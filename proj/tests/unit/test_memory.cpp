#include <doctest.h>

#include <algorithm>
#include <functional>

#include "sift/corpus.hpp"
#include "sift/error.hpp"
#include "sift/memory.hpp"
#include "sift/mock_provider.hpp"
#include "sift/random.hpp"
#include "sift/text.hpp"
#include "sift/vecmath.hpp"

using namespace sift;

namespace {

ErrorCode code_of(const std::function<void()>& f)
{
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("no sift::Error thrown");
    return ErrorCode::Io;
}

ReadOutput included(const std::string& summary, const std::string& phrase = "p")
{
    ReadOutput r;
    r.related_to_query = true;
    r.summary_of_the_paper = summary;
    r.summary_phrase = phrase;
    return r;
}

// Independent walk over children lists.
std::set<NodeId> walk_below(const ProvenanceGraph& g, const NodeId& id)
{
    std::set<NodeId> out;
    std::vector<NodeId> stack = g.node(id).children;
    while (!stack.empty()) {
        const auto n = stack.back();
        stack.pop_back();
        if (out.insert(n).second) {
            for (const auto& c : g.node(n).children) {
                stack.push_back(c);
            }
        }
    }
    return out;
}

// Structural checks by traversal; independent of validate().
void check_structure(const ProvenanceGraph& g)
{
    std::map<NodeId, int> parents;
    for (const auto* n : g.nodes()) {
        for (const auto& c : n->children) {
            ++parents[c];
            REQUIRE(g.contains(c));
        }
    }
    for (const auto* n : g.nodes()) {
        CHECK(parents[n->id] <= 1);
        CHECK((parents[n->id] == 0) == g.is_root(n->id));
        const auto below = walk_below(g, n->id);
        CHECK(below.count(n->id) == 0);
        for (const auto& c : n->citations) {
            CHECK((c == n->id || below.count(c) == 1));
        }
        if (n->kind == NodeKind::Leaf) {
            CHECK(n->children.empty());
        } else if (n->kind == NodeKind::Interim) {
            CHECK(n->children.size() >= 2);
        }
        for (const auto& c : n->children) {
            CHECK(g.node(c).timestamp < n->timestamp);
        }
    }
    CHECK_FALSE(g.validate().has_value());
}

}  // namespace

TEST_SUITE("memory")
{
    TEST_CASE("leaves")
    {
        ProvenanceGraph g(2);
        const auto id = g.add_leaf("a1", included("Aspirin cut stroke."), 1);
        CHECK(id == "A2-1");
        CHECK(g.node(id).kind == NodeKind::Leaf);
        CHECK(g.node(id).children.empty());
        CHECK(g.node(id).source_article == std::optional<ArticleId>("a1"));
        CHECK(g.is_root(id));
        CHECK(g.leaf_for("a1") == std::optional<NodeId>(id));
        ReadOutput no;
        no.reason_of_exclusion = "off topic";
        CHECK(code_of([&] { g.add_leaf("a2", no, 2); }) == ErrorCode::NotIncluded);
        CHECK(code_of([&] { g.add_leaf("a1", included("again"), 3); }) == ErrorCode::DuplicateLeaf);
        CHECK(code_of([&] { (void)g.node("nope"); }) == ErrorCode::UnknownNode);
        for (int i = 0; i < 11; ++i) {
            g.add_leaf("b" + std::to_string(i), included("s"), 10 + static_cast<std::uint64_t>(i));
        }
        CHECK(g.leaves().size() == 12);
    }

    TEST_CASE("merge conservation and citation stripping")
    {
        ProvenanceGraph g(0);
        const auto a = g.add_leaf("a", included("x"), 1);
        const auto b = g.add_leaf("b", included("y"), 2);
        const auto c = g.add_leaf("c", included("z"), 3);
        const auto d = g.add_leaf("d", included("w"), 4);
        CHECK(g.roots().size() == 4);
        const auto m = g.merge_node(NodeKind::Interim, {a, b, c},
                                    "X <citation>" + a + "</citation> Y <citation>" + d + "</citation>", 5);
        CHECK(g.roots().size() == 2);  // three roots in, one out
        CHECK(g.node(m).citations == std::vector<NodeId>{a});
        CHECK(g.node(m).text.find(d) == std::string::npos);
        CHECK(code_of([&] { (void)g.merge_node(NodeKind::Interim, {a, d}, "t", 6); }) == ErrorCode::InvalidNode);
        CHECK(code_of([&] { (void)g.merge_node(NodeKind::Interim, {d}, "t", 6); }) == ErrorCode::InvalidNode);
        CHECK(code_of([&] { (void)g.merge_node(NodeKind::Leaf, {m, d}, "t", 6); }) == ErrorCode::InvalidNode);
        CHECK(code_of([&] { (void)g.merge_node(NodeKind::Interim, {m, "ghost"}, "t", 6); }) == ErrorCode::UnknownNode);
        check_structure(g);
    }

    TEST_CASE("cycles are rejected at insertion")
    {
        ProvenanceGraph g(0);
        const auto a = g.add_leaf("a", included("x"), 1);
        const auto b = g.add_leaf("b", included("y"), 2);
        const auto m = g.merge_node(NodeKind::Interim, {a, b}, "t", 3);
        const auto c = g.add_leaf("c", included("z"), 4);
        const auto top = g.merge_node(NodeKind::Interim, {m, c}, "u", 5);
        CHECK(code_of([&] { g.attach(m, top); }) == ErrorCode::CycleDetected);
        CHECK(code_of([&] { g.attach(top, top); }) == ErrorCode::CycleDetected);
        CHECK(code_of([&] { g.attach(top, a); }) == ErrorCode::InvalidNode);
        check_structure(g);
    }

    TEST_CASE("detaching one of two children collapses the parent")
    {
        ProvenanceGraph g(0);
        const auto a = g.add_leaf("a", included("x"), 1);
        const auto b = g.add_leaf("b", included("y"), 2);
        const auto m = g.merge_node(NodeKind::Interim, {a, b}, "<citation>" + a + "</citation>", 3);
        const auto c = g.add_leaf("c", included("z"), 4);
        const auto top = g.merge_node(NodeKind::Interim, {m, c},
                                      "<citation>" + a + "</citation> <citation>" + b + "</citation>", 5);
        const auto removed = g.detach_leaf(a);
        CHECK(removed == std::vector<NodeId>{a, m});
        CHECK_FALSE(g.contains(m));
        CHECK(g.parent(b) == std::optional<NodeId>(top));
        CHECK(g.node(top).stale);
        CHECK(g.node(top).citations == std::vector<NodeId>{b});
        check_structure(g);

        ProvenanceGraph h(0);
        const auto x = h.add_leaf("x", included("x"), 1);
        const auto y = h.add_leaf("y", included("y"), 2);
        h.merge_node(NodeKind::Interim, {x, y}, "t", 3);
        h.detach_leaf(x);
        CHECK(h.roots() == std::vector<NodeId>{y});
        check_structure(h);
    }

    TEST_CASE("provenance walks leaves depth first")
    {
        ProvenanceGraph g(1);
        const auto a = g.add_leaf("art-a", included("x"), 1);
        const auto b = g.add_leaf("art-b", included("y"), 2);
        const auto c = g.add_leaf("art-c", included("z"), 3);
        const auto m = g.merge_node(NodeKind::Interim, {b, c}, "t", 4);
        const auto top = g.merge_node(NodeKind::Interim, {m, a}, "u", 5);
        CHECK(g.provenance_of(a) == std::vector<std::pair<NodeId, ArticleId>>{{a, "art-a"}});
        CHECK(g.provenance_of(top)
              == std::vector<std::pair<NodeId, ArticleId>>{{b, "art-b"}, {c, "art-c"}, {a, "art-a"}});
        CHECK(g.descendants(top) == std::set<NodeId>{m, a, b, c});
        CHECK(code_of([&] { (void)g.provenance_of("zz"); }) == ErrorCode::UnknownNode);
    }

    TEST_CASE("citation tag helpers")
    {
        CHECK(citation_ids("a <citation>x</citation> <citation>y</citation> <citation>x</citation>")
              == std::vector<std::string>{"x", "y"});
        CHECK(strip_citation_tags("a<citation>x</citation>b<citation>y</citation>",
                                  [](std::string_view id) { return id == "y"; })
              == "ab<citation>y</citation>");
    }

    TEST_CASE("random sessions keep every structural invariant")
    {
        for (std::uint64_t seed = 1; seed <= 200; ++seed) {
            Rng rng(seed);
            ProvenanceGraph g(static_cast<int>(seed % 4));
            std::uint64_t ts = 0;
            int articles = 0;
            for (int step = 0; step < 40; ++step) {
                const auto roll = rng.below(10);
                const auto roots = g.roots();
                if (roll < 5 || roots.size() < 2) {
                    g.add_leaf("art" + std::to_string(articles++), included("s"), ++ts);
                    continue;
                }
                if (roll < 8) {
                    std::vector<NodeId> pick = roots;
                    for (std::size_t i = pick.size(); i > 1; --i) {
                        std::swap(pick[i - 1], pick[rng.below(i)]);
                    }
                    pick.resize(2 + rng.below(std::min<std::size_t>(3, pick.size() - 1)));
                    std::string text;
                    for (const auto* n : g.nodes()) {
                        if (rng.below(3) == 0) {
                            text += "<citation>" + n->id + "</citation> ";
                        }
                    }
                    const auto before = g.roots().size();
                    g.merge_node(NodeKind::Interim, pick, text, ++ts);
                    CHECK(g.roots().size() == before - pick.size() + 1);
                    continue;
                }
                const auto leaves = g.leaves();
                if (!leaves.empty()) {
                    g.detach_leaf(leaves[rng.below(leaves.size())]);
                }
            }
            check_structure(g);
            CHECK(graph_from_json(to_json_value(g)) == g);
        }
    }

    TEST_CASE("recheck detaches the leaf that fails narrowed criteria")
    {
        const std::string question = "Does aspirin prevent stroke?";
        auto corpus = ingest({{"obs", "Observational studies of aspirin and stroke", "Aspirin users had fewer strokes.", {}, 0},
                              {"rct", "Randomized aspirin trial for stroke", "Aspirin halved stroke recurrence.", {}, 0},
                              {"dose", "Aspirin dosing after stroke", "Low doses sufficed.", {}, 0}},
                             question);
        MockProvider mock;
        embed_corpus(corpus, mock);
        ProvenanceGraph g(0);
        std::uint64_t ts = 0;
        for (const auto& a : corpus.articles()) {
            g.add_leaf(a.id, included(a.title), ++ts);
        }
        const auto leaf_obs = *g.leaf_for("obs");
        const auto leaf_rct = *g.leaf_for("rct");
        g.merge_node(NodeKind::Interim, {leaf_obs, leaf_rct}, "merged", ++ts);

        const std::string change = "Include only randomized studies.";
        const auto query = mock::hash_embed(change, 256).values;
        // Oracle: candidates are exactly the leaves with positive cosine.
        std::vector<std::pair<double, ArticleId>> ranked;
        for (const auto& a : corpus.articles()) {
            const double c = vec::dot(a.embedding, query);
            if (c > 0) {
                ranked.emplace_back(-c, a.id);
            }
        }
        std::sort(ranked.begin(), ranked.end());
        std::vector<NodeId> expected;
        for (const auto& [c, id] : ranked) {
            expected.push_back(*g.leaf_for(id));
        }
        CHECK(recheck_candidates(g, corpus, query, 10) == expected);
        CHECK(std::find(expected.begin(), expected.end(), leaf_obs) != expected.end());

        const auto decide = [&](const ArticleRecord& a) {
            const auto rules = mock::criteria_rules(change);
            const auto tokens = text::content_token_set(a.title + " " + a.abstract);
            ReadOutput r = included(a.title);
            for (const auto& req : rules.required) {
                if (tokens.count(req) == 0) {
                    r.related_to_query = false;
                    r.reason_of_exclusion = "no mention of " + req;
                }
            }
            return r;
        };
        const auto revisions = recheck(g, corpus, query, decide);
        REQUIRE(revisions.size() == 1);
        CHECK(revisions[0].article == "obs");
        CHECK(revisions[0].excluded);
        CHECK_FALSE(g.contains(leaf_obs));
        CHECK(g.is_root(leaf_rct));  // the two-child parent collapsed
        check_structure(g);

        CHECK(recheck_candidates(g, corpus, std::vector<double>(256, 0.0), 10).empty());
    }
}
