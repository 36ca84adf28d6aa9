#include <doctest.h>

#include <algorithm>
#include <atomic>
#include <functional>
#include <thread>

#include <httplib.h>

#include "fixture.hpp"
#include "scenario.hpp"
#include "sift/error.hpp"
#include "sift/metrics.hpp"
#include "sift/mock_provider.hpp"
#include "sift/server.hpp"
#include "sift/session.hpp"

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

std::unique_ptr<Session> fresh(const fixture::ReviewCorpus& rc, std::uint64_t seed = 42,
                               std::optional<std::filesystem::path> dir = std::nullopt)
{
    return std::make_unique<Session>("t", scenario::config_for(rc, seed), std::make_shared<MockProvider>(),
                                     prompts::TemplateSet::builtin(), std::move(dir));
}

std::size_t count_kind(const Session& s, EventKind k)
{
    std::size_t n = 0;
    for (const auto& e : s.events_since(0)) {
        n += e.kind == k;
    }
    return n;
}

struct Frame {
    std::uint64_t id = 0;
    std::string event;
    json data;
};

std::vector<Frame> parse_sse(const std::string& body)
{
    std::vector<Frame> out;
    Frame f;
    std::size_t pos = 0;
    while (pos < body.size()) {
        const auto nl = body.find('\n', pos);
        const auto line = body.substr(pos, nl - pos);
        pos = nl == std::string::npos ? body.size() : nl + 1;
        if (line.empty()) {
            if (!f.event.empty()) {
                out.push_back(f);
            }
            f = Frame{};
        } else if (line.rfind("id: ", 0) == 0) {
            f.id = std::stoull(line.substr(4));
        } else if (line.rfind("event: ", 0) == 0) {
            f.event = line.substr(7);
        } else if (line.rfind("data: ", 0) == 0) {
            f.data = json::parse(line.substr(6));
        }
    }
    return out;
}

// Server on a free local port with its own manager.
struct LiveServer {
    std::shared_ptr<SessionManager> manager = std::make_shared<SessionManager>(std::make_shared<MockProvider>());
    Server server{manager};
    int port = 0;
    std::thread thread;

    LiveServer()
    {
        port = server.bind("127.0.0.1", 0);
        REQUIRE(port > 0);
        thread = std::thread([this] { server.listen(); });
    }
    ~LiveServer()
    {
        server.stop();
        thread.join();
    }
    [[nodiscard]] httplib::Client client() const
    {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(30, 0);
        return c;
    }
};

json body_of(const httplib::Result& r)
{
    REQUIRE(r);
    return json::parse(r->body);
}

}  // namespace

TEST_SUITE("session")
{
    TEST_CASE("phase ordering")
    {
        const auto rc = fixture::review_corpus(1, 40, 6, 0);
        auto s = fresh(rc);
        CHECK(s->phase() == Phase::Created);
        CHECK(code_of([&] { s->build_map(); }) == ErrorCode::PhaseViolation);
        CHECK(code_of([&] { s->start(); }) == ErrorCode::PhaseViolation);
        CHECK(code_of([&] { s->synthesize(); }) == ErrorCode::PhaseViolation);
        CHECK(code_of([&] { (void)s->report_document(); }) == ErrorCode::NotReady);
        s->upload_records(rc.records);
        s->build_map();
        CHECK(s->phase() == Phase::Mapped);
        CHECK(code_of([&] { s->upload_records(rc.records); }) == ErrorCode::PhaseViolation);
        CHECK(code_of([&] { s->build_map(); }) == ErrorCode::PhaseViolation);
        s->start();
        CHECK(s->phase() == Phase::Running);
        const auto seq = s->last_seq();
        s->start();
        CHECK(s->last_seq() == seq);
        CHECK(s->phase() == Phase::Running);
    }

    TEST_CASE("upload counts")
    {
        const auto rc = fixture::review_corpus(2, 491, 20, 0);
        auto s = fresh(rc);
        const auto counts = s->upload_corpus(fixture::to_csv(rc.records));
        CHECK(counts["articles"] == 491);
        CHECK(code_of([] {
                  const auto r = fixture::review_corpus(2, 5, 0, 0);
                  fresh(r)->upload_corpus("id,title\n\"a,b\n");
              })
              == ErrorCode::MalformedUpload);
    }

    TEST_CASE("intervention validation leaves no trace")
    {
        const auto rc = fixture::review_corpus(3, 60, 8, 0);
        auto s = scenario::started(rc, scenario::config_for(rc, 3));
        const auto seq = s->last_seq();
        CHECK(code_of([&] { s->post_intervention(0, {{"type", "path"}, {"target_article", "nope"}}); })
              == ErrorCode::UnknownArticle);
        CHECK(code_of([&] { s->post_intervention(99, {{"type", "chat"}, {"text", "hi"}}); }) == ErrorCode::UnknownAgent);
        CHECK(code_of([&] { s->post_intervention(0, {{"type", "bogus"}}); }) == ErrorCode::InvalidArgument);
        CHECK(s->last_seq() == seq);
        std::string read;
        for (int i = 0; i < 5 && read.empty(); ++i) {
            s->tick();
            for (const auto& a : s->corpus().articles()) {
                if (a.read_state == ReadState::Read) {
                    read = a.id;
                    break;
                }
            }
        }
        REQUIRE_FALSE(read.empty());
        const auto before = s->last_seq();
        CHECK(code_of([&] { s->post_intervention(0, {{"type", "path"}, {"target_article", read}}); })
              == ErrorCode::AlreadyRead);
        CHECK(s->last_seq() == before);
    }

    TEST_CASE("instruct and path take effect at the next step")
    {
        const auto rc = fixture::review_corpus(4, 90, 12, 0);
        auto s = scenario::started(rc, scenario::config_for(rc, 4));
        s->tick();
        std::string target;
        for (const auto& r : rc.records) {
            if (s->owner()[*s->corpus().index_of(r.id)] != 0 && s->corpus().find(r.id).read_state == ReadState::Unread) {
                target = r.id;
                break;
            }
        }
        REQUIRE_FALSE(target.empty());
        s->post_intervention(0, {{"type", "instruct"}, {"updates", {{"inclusion_exclusion_criteria", "Exclude children."}}}});
        s->post_intervention(0, {{"type", "path"}, {"target_article", target}});
        const auto mark = s->last_seq();
        s->tick();
        std::vector<SessionEvent> mine;
        for (const auto& e : s->events_since(mark)) {
            if (e.agent == 0) {
                mine.push_back(e);
            }
        }
        REQUIRE_FALSE(mine.empty());
        CHECK(mine.front().kind == EventKind::ReflectionCompleted);
        const auto first_read = std::find_if(mine.begin(), mine.end(),
                                             [](const SessionEvent& e) { return e.kind == EventKind::ArticleRead; });
        REQUIRE(first_read != mine.end());
        CHECK(first_read->payload["article"] == target);
        CHECK(s->agents()[0].config.inclusion_exclusion_criteria == "Exclude children.");
    }

    TEST_CASE("queued interventions expire when the session ends")
    {
        const auto rc = fixture::review_corpus(5, 60, 8, 0);
        auto s = scenario::started(rc, scenario::config_for(rc, 5));
        s->tick();
        s->pause(0);
        s->run_until_quiesced();
        s->post_intervention(0, {{"type", "chat"}, {"text", "Also consider sleep quality."}});
        CHECK(s->agents()[0].queue.size() == 1);
        CHECK(s->phase() == Phase::Quiesced);
        const auto accepted = count_kind(*s, EventKind::InterventionAccepted);
        s->synthesize();
        CHECK(count_kind(*s, EventKind::InterventionExpired) == 1);
        CHECK(s->agents()[0].queue.empty());
        // Every accepted intervention was consumed or expired.
        std::set<std::string> open;
        for (const auto& e : s->events_since(0)) {
            if (e.kind == EventKind::InterventionAccepted) {
                open.insert(e.payload["intervention"]["id"].get<std::string>());
            } else if (e.kind == EventKind::InterventionExpired) {
                open.erase(e.payload["intervention"].get<std::string>());
            } else if (e.kind == EventKind::ReflectionCompleted) {
                for (const auto& id : e.payload["interventions"]) {
                    open.erase(id.get<std::string>());
                }
            } else if (e.kind == EventKind::ArticleRead && e.payload["intervention"].is_string()) {
                open.erase(e.payload["intervention"].get<std::string>());
            }
        }
        CHECK(open.empty());
        CHECK(accepted >= 1);
        const auto ready = s->events_since(0);
        const auto it = std::find_if(ready.begin(), ready.end(),
                                     [](const SessionEvent& e) { return e.kind == EventKind::ReportReady; });
        REQUIRE(it != ready.end());
        CHECK(it->seq == s->report()->graph.node(s->report()->final_node_id).timestamp);
    }

    TEST_CASE("scripted runs are byte-identical and survive a restart")
    {
        const auto rc = fixture::review_corpus(6, 120, 15, 0);
        const auto run = [&](std::optional<std::filesystem::path> dir) {
            auto s = fresh(rc, 9, std::move(dir));
            s->upload_records(rc.records);
            s->build_map();
            s->start();
            const int k = static_cast<int>(s->agents().size());
            run_scripted(*s, scenario::intervention_script(rc, k, 30));
            s->synthesize();
            return s;
        };
        scenario::TempDir dir;
        const auto a = run(dir.path() / "a");
        const auto b = run(std::nullopt);
        CHECK(a->event_log_text() == b->event_log_text());
        CHECK(a->report_document() == b->report_document());
        CHECK_FALSE(a->check_invariants().has_value());

        const auto back = Session::recover(dir.path() / "a", std::make_shared<MockProvider>());
        CHECK(back->observable_state() == a->observable_state());
        CHECK(back->event_log_text() == a->event_log_text());
        CHECK(back->phase() == Phase::Synthesized);

        // Provenance export count oracle: one node per leaf and interim plus the Final node.
        const auto prov = a->provenance();
        std::size_t leaves = 0;
        std::size_t interims = 0;
        for (const auto& g : a->graphs()) {
            for (const auto* n : g.nodes()) {
                leaves += n->kind == NodeKind::Leaf;
                interims += n->kind == NodeKind::Interim;
            }
        }
        CHECK(prov["nodes"].size() == leaves + interims + 1);
        CHECK(prov["counts"]["final"] == 1);
    }

    TEST_CASE("recovery mid-run continues to the same end state")
    {
        const auto rc = fixture::review_corpus(7, 90, 12, 0);
        scenario::TempDir dir;
        std::string reference;
        {
            auto s = fresh(rc, 2);
            s->upload_records(rc.records);
            s->build_map();
            s->start();
            s->run_until_quiesced();
            reference = s->event_log_text();
        }
        {
            auto s = fresh(rc, 2, dir.path());
            s->upload_records(rc.records);
            s->build_map();
            s->start();
            for (int i = 0; i < 3; ++i) {
                s->tick();
            }
            // Dropped without shutdown.
        }
        const auto back = Session::recover(dir.path(), std::make_shared<MockProvider>());
        CHECK(back->phase() == Phase::Running);
        back->run_until_quiesced();
        CHECK(back->event_log_text() == reference);
        CHECK_FALSE(back->check_invariants().has_value());
    }

    TEST_CASE("manager")
    {
        SessionManager m(std::make_shared<MockProvider>());
        SessionConfig cfg;
        cfg.base.research_question = "q";
        const auto s = m.create(cfg);
        CHECK(m.get(s->id()) == s);
        CHECK(code_of([&] { (void)m.get("missing"); }) == ErrorCode::UnknownSession);
        CHECK(m.ids() == std::vector<std::string>{s->id()});
    }
}

TEST_SUITE("server")
{
    TEST_CASE("HTTP workflow, SSE resume and exports")
    {
        LiveServer live;
        auto cli = live.client();
        const auto rc = fixture::review_corpus(8, 200, 20, 0);

        auto created = cli.Post("/sessions", json{{"research_question", rc.question}, {"seed", 3}}.dump(),
                                "application/json");
        REQUIRE(created);
        CHECK(created->status == 201);
        const std::string id = body_of(created)["id"];
        const std::string base = "/sessions/" + id;

        auto early = cli.Post(base + "/map", "", "application/json");
        CHECK(early->status == 409);
        CHECK(body_of(early)["error"] == "PhaseViolation");
        CHECK(cli.Get("/sessions/nope")->status == 404);

        auto up = cli.Post(base + "/corpus", fixture::to_csv(rc.records), "text/csv");
        CHECK(body_of(up)["articles"] == 200);
        CHECK(cli.Post(base + "/map", "", "application/json")->status == 200);
        CHECK(body_of(cli.Get(base + "/map"))["points"].size() == 200);
        auto report = cli.Get(base + "/report");
        CHECK(report->status == 409);
        CHECK(body_of(report)["error"] == "NotReady");
        auto bad = cli.Post(base + "/agents/0/interventions", json{{"type", "path"}, {"target_article", "zz"}}.dump(),
                            "application/json");
        CHECK(bad->status == 404);

        // A script of path interventions spread over the agents.
        const auto agents = body_of(cli.Get(base + "/agents"))["agents"].size();
        REQUIRE(agents >= 1);
        std::size_t posted = 0;
        for (const auto& r : rc.records) {
            if (posted == 20) {
                break;
            }
            if (rc.markers.count(r.id) != 0) {
                continue;
            }
            const auto agent = std::to_string(posted % agents);
            auto ok = cli.Post(base + "/agents/" + agent + "/interventions",
                               json{{"type", "path"}, {"target_article", r.id}}.dump(), "application/json");
            CHECK(ok->status == 202);
            ++posted;
        }

        // Live subscriber from the beginning, attached before the run starts.
        std::string live_body;
        std::thread subscriber([&] {
            auto c = live.client();
            c.Get(base + "/events?from=0", [&](const char* data, std::size_t n) {
                live_body.append(data, n);
                return true;
            });
        });
        // Stopping the server ends the stream, so the join cannot hang.
        struct Joiner {
            LiveServer& live;
            std::thread& t;
            ~Joiner()
            {
                live.server.stop();
                if (t.joinable()) {
                    t.join();
                }
            }
        } joiner{live, subscriber};

        CHECK(cli.Post(base + "/start", "", "application/json")->status == 200);
        for (int i = 0; i < 600; ++i) {
            if (body_of(cli.Get(base))["phase"] == "Quiesced") {
                break;
            }
            std::this_thread::sleep_for(std::chrono::milliseconds(50));
        }
        REQUIRE(body_of(cli.Get(base))["phase"] == "Quiesced");
        auto session = live.manager->get(id);
        const auto last = session->last_seq();
        REQUIRE(last >= 100);

        const auto backlog = [&](const std::string& query, const httplib::Headers& headers = {}) {
            auto r = cli.Get(base + "/events?" + query, headers);
            REQUIRE(r);
            return parse_sse(r->body);
        };
        const auto full = backlog("from=0&follow=0");
        REQUIRE(full.size() == last);
        for (std::size_t i = 0; i < full.size(); ++i) {
            CHECK(full[i].id == i + 1);
            CHECK(full[i].data == to_json(session->events_since(0)[i]));
        }
        const auto resumed = backlog("from=41&follow=0");
        REQUIRE_FALSE(resumed.empty());
        CHECK(resumed.front().id == 42);
        CHECK(resumed.size() == last - 41);
        const auto by_header = backlog("follow=0", {{"Last-Event-ID", "41"}});
        CHECK(by_header.front().id == 42);
        const auto second = backlog("from=0&follow=0");
        CHECK(second.size() == full.size());
        for (std::size_t i = 0; i < full.size(); ++i) {
            CHECK(second[i].data == full[i].data);
        }

        auto csv = cli.Get(base + "/export.csv");
        CHECK(csv->body == export_corpus_csv(session->corpus(), session->clusters().assignments, session->owner()));

        CHECK(cli.Post(base + "/synthesize", "", "application/json")->status == 200);
        auto md = cli.Get(base + "/report?format=markdown");
        CHECK(md->status == 200);
        CHECK(md->body == session->report_document());
        const auto prov = body_of(cli.Get(base + "/provenance"));
        CHECK(prov["nodes"].size()
              == prov["counts"]["leaves"].get<std::size_t>() + prov["counts"]["interims"].get<std::size_t>() + 1);

        live.server.stop();
        subscriber.join();
        const auto tail = parse_sse(live_body);
        REQUIRE(tail.size() >= last);
        for (std::size_t i = 0; i < tail.size(); ++i) {
            CHECK(tail[i].id == i + 1);
        }
    }

    TEST_CASE("error mapping")
    {
        CHECK(http_status(ErrorCode::UnknownSession) == 404);
        CHECK(http_status(ErrorCode::PhaseViolation) == 409);
        CHECK(http_status(ErrorCode::NotReady) == 409);
        CHECK(http_status(ErrorCode::MalformedUpload) == 400);
        CHECK(http_status(ErrorCode::ProviderUnavailable) == 502);
    }
}
