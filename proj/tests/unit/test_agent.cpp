#include <doctest.h>

#include <algorithm>
#include <functional>

#include "fixture.hpp"
#include "oracles.hpp"
#include "scenario.hpp"
#include "sift/agent.hpp"
#include "sift/error.hpp"
#include "sift/mock_provider.hpp"
#include "sift/random.hpp"

using namespace sift;
using nlohmann::json;

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

// A single-agent world driven step by step, outside any session.
struct World {
    Corpus corpus;
    MapLayout layout;
    NeighborGraph neighbors;
    std::vector<int> owner;
    std::map<std::size_t, int> claimed;
    MockProvider provider;
    prompts::TemplateSet templates = prompts::TemplateSet::builtin();
    AgentState agent;
    ProvenanceGraph graph;
    std::uint64_t seq = 0;

    World(const std::vector<SourceRecord>& records, const std::string& question)
        : corpus(ingest(records, question))
    {
        embed_corpus(corpus, provider);
        score_relevance(corpus);
        layout = project_layout(corpus, 42);
        neighbors = NeighborGraph(layout);
        owner.assign(corpus.size(), 0);
        ClusterModel one;
        one.k = 1;
        one.assignments.assign(corpus.size(), 0);
        AgentConfig base;
        base.research_question = question;
        agent = spawn_agents(one, corpus, layout, base).front();
        agent.status = AgentStatus::Idle;
    }

    [[nodiscard]] StepContext context() const
    {
        return StepContext{corpus, layout, neighbors, owner, claimed, const_cast<MockProvider&>(provider), templates,
                           k_default_recheck_cap, seq};
    }

    void commit(SessionEvent e)
    {
        e.seq = ++seq;
        apply_agent_event(agent, graph, e, e.seq);
        apply_corpus_event(corpus, owner, e);
    }

    std::vector<SessionEvent> run_step()
    {
        auto events = step(agent, graph, context());
        for (auto e : events) {
            commit(e);
        }
        return events;
    }

    void enqueue(const json& body, const std::string& id)
    {
        auto i = intervention_from_json(body);
        i.id = id;
        SessionEvent e;
        e.kind = EventKind::InterventionAccepted;
        e.agent = agent.agent_id;
        e.payload = {{"intervention", to_json_value(i)}};
        commit(e);
        // As the session does: an intervention wakes a finished agent.
        if (agent.status == AgentStatus::Done) {
            SessionEvent wake;
            wake.kind = EventKind::StatusChanged;
            wake.agent = agent.agent_id;
            wake.payload = {{"status", "Idle"}, {"reason", "reactivated by intervention"}};
            commit(wake);
        }
    }
};

std::vector<std::string> reads_of(const std::vector<SessionEvent>& events)
{
    std::vector<std::string> out;
    for (const auto& e : events) {
        if (e.kind == EventKind::ArticleRead) {
            out.push_back(e.payload.at("article").get<std::string>());
        }
    }
    return out;
}

}  // namespace

TEST_SUITE("agent")
{
    TEST_CASE("one agent per cluster, starting at the smallest radius")
    {
        const auto rc = fixture::review_corpus(3, 60, 6, 0);
        auto corpus = ingest(rc.records, rc.question);
        MockProvider mock;
        embed_corpus(corpus, mock);
        score_relevance(corpus);
        const auto layout = project_layout(corpus, 1);
        for (const int k : {9, 1}) {
            ClusterModel m;
            m.k = k;
            for (std::size_t i = 0; i < corpus.size(); ++i) {
                m.assignments.push_back(static_cast<int>(i % static_cast<std::size_t>(k)));
            }
            const auto agents = spawn_agents(m, corpus, layout, {});
            REQUIRE(agents.size() == static_cast<std::size_t>(k));
            std::set<int> clusters;
            for (const auto& a : agents) {
                clusters.insert(a.cluster_id);
                std::size_t best = corpus.size();
                for (std::size_t i = 0; i < corpus.size(); ++i) {
                    if (m.assignments[i] != a.cluster_id) {
                        continue;
                    }
                    const auto r = layout.positions()[i].radius;
                    if (best == corpus.size() || r < layout.positions()[best].radius
                        || (r == layout.positions()[best].radius && corpus.at(i).id < corpus.at(best).id)) {
                        best = i;
                    }
                }
                CHECK(a.start_article == corpus.at(best).id);
            }
            CHECK(clusters.size() == static_cast<std::size_t>(k));
        }
        CHECK(code_of([&] { (void)spawn_agents(ClusterModel{}, corpus, layout, {}); }) == ErrorCode::NoClusters);
    }

    TEST_CASE("frontier matches a brute-force neighbour filter on 20-point maps")
    {
        for (std::uint64_t seed = 1; seed <= 100; ++seed) {
            Rng rng(seed);
            const auto pts = fixture::random_points(seed, 20, 10.0);
            std::vector<ArticleId> ids;
            std::vector<ArticleRecord> records;
            for (int i = 0; i < 20; ++i) {
                ArticleRecord r;
                r.id = "p" + std::string(i < 10 ? "0" : "") + std::to_string(i);
                r.title = r.id;
                r.read_state = rng.below(4) == 0 ? ReadState::Read : ReadState::Unread;
                ids.push_back(r.id);
                records.push_back(r);
            }
            const Corpus corpus(records, "q");
            const auto layout = MapLayout::from_points(ids, pts);
            const NeighborGraph graph(layout);
            std::vector<int> owner;
            for (int i = 0; i < 20; ++i) {
                owner.push_back(rng.below(3) == 0 ? 0 : 1);
            }
            AgentState a;
            a.agent_id = 0;
            const std::size_t centre = rng.below(20);
            a.current_article = ids[centre];
            if (rng.below(2) == 0) {
                a.passed_over.insert(ids[rng.below(20)]);
            }
            const std::map<std::size_t, int> claimed;
            MockProvider mock;
            const auto templates = prompts::TemplateSet::builtin();
            const StepContext ctx{corpus, layout, graph, owner, claimed, mock, templates};

            const auto eligible = [&](std::size_t i) {
                return records[i].read_state == ReadState::Unread && a.passed_over.count(ids[i]) == 0;
            };
            std::vector<ArticleId> expected;
            if (eligible(centre) && owner[centre] == 0) {
                expected.push_back(ids[centre]);
            }
            std::vector<std::size_t> open;
            for (const auto j : oracle::nearest(pts, ids, centre, 20)) {
                if (eligible(j) && open.size() < 8) {
                    open.push_back(j);
                }
            }
            for (const auto j : open) {
                if (owner[j] == 0) {
                    expected.push_back(ids[j]);
                }
            }
            if (expected.empty()) {
                for (const auto j : oracle::nearest(pts, ids, centre, 20)) {
                    if (eligible(j) && owner[j] == 0) {
                        expected.push_back(ids[j]);
                        break;
                    }
                }
            }
            CHECK(build_frontier(a, ctx) == expected);
        }
    }

    TEST_CASE("fresh agent starts from its start article; an exhausted one finds nothing")
    {
        const auto rc = fixture::review_corpus(5, 30, 5, 0);
        World w(rc.records, rc.question);
        const auto f = build_frontier(w.agent, w.context());
        REQUIRE_FALSE(f.empty());
        CHECK(f.front() == w.agent.start_article);
        for (auto& a : w.corpus.articles()) {
            a.read_state = ReadState::Read;
        }
        CHECK(build_frontier(w.agent, w.context()).empty());
        w.run_step();
        CHECK(w.agent.status == AgentStatus::Done);
    }

    TEST_CASE("three consecutive skips end the agent")
    {
        const auto rc = fixture::irrelevant_corpus(9, 60);
        World w(rc.records, rc.question);
        int skips = 0;
        for (int i = 0; i < 20 && w.agent.status != AgentStatus::Done; ++i) {
            for (const auto& e : w.run_step()) {
                if (e.kind == EventKind::FrontierScreened && e.payload.at("skip").get<bool>()) {
                    ++skips;
                }
            }
        }
        CHECK(w.agent.status == AgentStatus::Done);
        CHECK(w.agent.status_reason == "skip limit reached");
        CHECK(skips == k_skip_limit);
        CHECK(w.agent.trajectory.empty());
    }

    TEST_CASE("a queued path is the step's first read")
    {
        const auto rc = fixture::review_corpus(11, 40, 6, 0);
        World w(rc.records, rc.question);
        w.run_step();
        std::string target;
        for (const auto& r : rc.records) {
            if (rc.markers.count(r.id) == 0 && !w.agent.has_read(r.id)) {
                target = r.id;
            }
        }
        w.enqueue({{"type", "path"}, {"target_article", target}}, "i1");
        const auto events = w.run_step();
        const auto reads = reads_of(events);
        REQUIRE_FALSE(reads.empty());
        CHECK(reads.front() == target);
        for (const auto& e : events) {
            if (e.kind == EventKind::ArticleRead) {
                CHECK(e.payload.at("forced").get<bool>());
                CHECK(e.payload.at("intervention") == "i1");
                break;
            }
        }
        CHECK(w.agent.queue.empty());

        // A second path to the same article expires instead of re-reading it.
        w.enqueue({{"type", "path"}, {"target_article", target}}, "i2");
        const auto again = w.run_step();
        CHECK(std::count(reads_of(again).begin(), reads_of(again).end(), target) == 0);
        CHECK(std::any_of(again.begin(), again.end(), [](const SessionEvent& e) {
            return e.kind == EventKind::InterventionExpired && e.payload.at("intervention") == "i2";
        }));
    }

    TEST_CASE("single cluster of 30 with 5 relevant articles includes all 5")
    {
        for (std::uint64_t seed = 1; seed <= 10; ++seed) {
            const auto rc = fixture::review_corpus(seed, 30, 5, 0);
            World w(rc.records, rc.question);
            for (int i = 0; i < 200 && w.agent.status != AgentStatus::Done; ++i) {
                w.run_step();
            }
            std::set<std::string> included;
            for (const auto& t : w.agent.trajectory) {
                if (t.decision == Decision::Included) {
                    included.insert(t.article);
                }
            }
            CHECK(included == oracle::screened_ids(rc.records, rc.question, "", ""));
            CHECK(included.size() == 5);
            std::set<std::string> seen;
            for (const auto& t : w.agent.trajectory) {
                CHECK(seen.insert(t.article).second);
            }
            CHECK(w.graph.leaves().size() == included.size());
        }
    }

    TEST_CASE("reflection")
    {
        const auto rc = fixture::review_corpus(13, 30, 5, 0);
        World w(rc.records, rc.question);

        w.enqueue({{"type", "chat"}, {"text", "Focus on randomized controlled trials"}}, "i1");
        auto events = w.run_step();
        REQUIRE_FALSE(events.empty());
        CHECK(events.front().kind == EventKind::ReflectionCompleted);
        CHECK(events.front().payload["outcome"]["updates_on_criteria"] == "Include only randomized controlled trials.");
        CHECK(w.agent.config.inclusion_exclusion_criteria == "Include only randomized controlled trials.");

        const auto before = w.agent.config;
        w.enqueue({{"type", "chat"}, {"text", "Looks good, keep going."}}, "i2");
        events = w.run_step();
        REQUIRE_FALSE(events.empty());
        CHECK(events.front().kind == EventKind::ReflectionCompleted);
        CHECK(w.agent.config == before);
        CHECK(events.front().payload["revisions"].empty());
        CHECK(events.front().payload["recheck_query"] == "");

        for (int i = 0; i < 5; ++i) {
            w.run_step();
        }
        w.enqueue({{"type", "instruct"}, {"updates", {{"summarization_requirement", "Report the sample size."}}}}, "i3");
        events = w.run_step();
        REQUIRE_FALSE(events.empty());
        CHECK(events.front().kind == EventKind::ReflectionCompleted);
        CHECK(w.agent.config.summarization_requirement == "Report the sample size.");
        if (!w.graph.leaves().empty()) {
            // Re-check scheduled: the query is the changed field.
            CHECK(events.front().payload["recheck_query"] == "Report the sample size.");
        }
    }

    TEST_CASE("config fields and intervention records")
    {
        AgentConfig c;
        set_config_field(c, "detailed_focus", "x");
        CHECK(config_field(c, "detailed_focus") == "x");
        CHECK(code_of([&] { set_config_field(c, "nope", "x"); }) == ErrorCode::InvalidArgument);
        CHECK(intervention_from_json({{"type", "Path"}, {"target_article", "a"}}).kind == InterventionKind::Path);
        CHECK(code_of([] { (void)intervention_from_json({{"type", "path"}}); }) == ErrorCode::InvalidArgument);
        CHECK(code_of([] { (void)intervention_from_json({{"type", "dance"}}); }) == ErrorCode::InvalidArgument);
        const auto i = intervention_from_json({{"type", "instruct"}, {"updates", {{"detailed_focus", "y"}}}});
        CHECK(intervention_from_json(to_json_value(i)) == i);
    }
}
