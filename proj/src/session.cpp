#include "sift/session.hpp"

#include <algorithm>
#include <future>

#include <spdlog/spdlog.h>

#include "sift/error.hpp"
#include "sift/metrics.hpp"
#include "sift/text.hpp"

namespace sift {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr std::pair<Phase, std::string_view> k_phase_names[] = {
    {Phase::Created, "Created"}, {Phase::Mapped, "Mapped"},           {Phase::Running, "Running"},
    {Phase::Quiesced, "Quiesced"}, {Phase::Synthesized, "Synthesized"},
};

json article_to_json(const ArticleRecord& a, bool with_embedding)
{
    json j = {
        {"id", a.id},
        {"title", a.title},
        {"abstract", a.abstract},
        {"metadata", a.metadata},
        {"abstract_missing", a.abstract_missing},
        {"relevance", a.relevance ? json(*a.relevance) : json(nullptr)},
        {"read_state", to_string(a.read_state)},
        {"decision", to_string(a.decision)},
        {"exclusion_reason", a.exclusion_reason},
        {"summary_phrase", a.summary_phrase},
        {"reader", a.reader ? json(*a.reader) : json(nullptr)},
    };
    if (with_embedding) {
        j["embedding"] = a.embedding;
        j["embedding_degenerate"] = a.embedding_degenerate;
    }
    return j;
}

ArticleRecord article_from_json(const json& j)
{
    ArticleRecord a;
    a.id = j.at("id").get<std::string>();
    a.title = j.at("title").get<std::string>();
    a.abstract = j.at("abstract").get<std::string>();
    a.metadata = j.value("metadata", std::map<std::string, std::string>{});
    a.abstract_missing = j.value("abstract_missing", false);
    if (j.contains("relevance") && !j["relevance"].is_null()) {
        a.relevance = j["relevance"].get<double>();
    }
    a.read_state = j.at("read_state").get<std::string>() == "Read" ? ReadState::Read : ReadState::Unread;
    const auto d = j.at("decision").get<std::string>();
    a.decision = d == "Included" ? Decision::Included : d == "Excluded" ? Decision::Excluded : Decision::Undecided;
    a.exclusion_reason = j.value("exclusion_reason", "");
    a.summary_phrase = j.value("summary_phrase", "");
    if (j.contains("reader") && !j["reader"].is_null()) {
        a.reader = j["reader"].get<int>();
    }
    a.embedding = j.value("embedding", std::vector<double>{});
    a.embedding_degenerate = j.value("embedding_degenerate", false);
    return a;
}

json record_to_json(const SourceRecord& r)
{
    return {{"id", r.id}, {"title", r.title}, {"abstract", r.abstract}, {"metadata", r.metadata}, {"row", r.row}};
}

SourceRecord record_from_json(const json& j)
{
    SourceRecord r;
    r.id = j.at("id").get<std::string>();
    r.title = j.at("title").get<std::string>();
    r.abstract = j.at("abstract").get<std::string>();
    r.metadata = j.value("metadata", std::map<std::string, std::string>{});
    r.row = j.value("row", std::size_t{0});
    return r;
}

json clusters_to_json(const ClusterModel& c)
{
    json centroids = json::array();
    for (const auto& p : c.centroids) {
        centroids.push_back({p.x, p.y});
    }
    return {{"k", c.k},
            {"assignments", c.assignments},
            {"centroids", centroids},
            {"wcss", c.wcss},
            {"iterations", c.iterations},
            {"wcss_history", c.wcss_history}};
}

ClusterModel clusters_from_json(const json& j)
{
    ClusterModel c;
    c.k = j.at("k").get<int>();
    c.assignments = j.at("assignments").get<std::vector<int>>();
    for (const auto& p : j.at("centroids")) {
        c.centroids.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
    c.wcss = j.at("wcss").get<double>();
    c.iterations = j.at("iterations").get<int>();
    c.wcss_history = j.at("wcss_history").get<std::vector<double>>();
    return c;
}

}  // namespace

std::string_view to_string(Phase p) noexcept
{
    for (const auto& [v, n] : k_phase_names) {
        if (v == p) {
            return n;
        }
    }
    return "Created";
}

Phase phase_from_string(std::string_view s)
{
    for (const auto& [v, n] : k_phase_names) {
        if (n == s) {
            return v;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown phase " + std::string(s));
}

json to_json_value(const SessionConfig& c)
{
    return {
        {"base", to_json_value(c.base)},
        {"seed", c.seed},
        {"k", c.k ? json(*c.k) : json(nullptr)},
        {"total_budget", c.total_budget ? json(*c.total_budget) : json(nullptr)},
        {"section_order", c.section_order},
        {"recheck_cap", c.recheck_cap},
        {"snapshot_every", c.snapshot_every},
        {"parallel", c.parallel},
    };
}

SessionConfig session_config_from_json(const json& j)
{
    SessionConfig c;
    if (j.contains("base")) {
        c.base = config_from_json(j["base"]);
    } else {
        c.base = config_from_json(j);
    }
    c.seed = j.value("seed", std::uint64_t{42});
    if (j.contains("k") && !j["k"].is_null()) {
        c.k = j["k"].get<int>();
    }
    if (j.contains("total_budget") && !j["total_budget"].is_null()) {
        c.total_budget = j["total_budget"].get<int>();
    }
    if (j.contains("section_order")) {
        c.section_order = j["section_order"].get<std::vector<std::string>>();
    }
    c.recheck_cap = j.value("recheck_cap", k_default_recheck_cap);
    c.snapshot_every = j.value("snapshot_every", std::size_t{10});
    c.parallel = j.value("parallel", true);
    return c;
}

std::vector<int> split_budget(int total, int k)
{
    if (k < 1) {
        throw Error(ErrorCode::InvalidArgument, "agent count must be positive");
    }
    total = std::max(total, 0);
    std::vector<int> out(static_cast<std::size_t>(k), total / k);
    for (int i = 0; i < total % k; ++i) {
        ++out[static_cast<std::size_t>(i)];
    }
    return out;
}

struct Session::MapState {
    Corpus corpus;
    MapLayout layout;
    ClusterModel clusters;
    ElbowResult elbow;
};

Session::Session(std::string id, SessionConfig config, std::shared_ptr<Provider> provider,
                 prompts::TemplateSet templates, std::optional<fs::path> dir)
    : id_(std::move(id))
    , config_(std::move(config))
    , provider_(std::move(provider))
    , templates_(std::move(templates))
    , dir_(std::move(dir))
{
    if (!provider_) {
        throw Error(ErrorCode::InvalidArgument, "session needs a provider");
    }
    if (text::trim(config_.base.research_question).empty()) {
        throw Error(ErrorCode::InvalidArgument, "research question is empty");
    }
    if (dir_) {
        fs::create_directories(*dir_);
        persist::write_file_atomic(*dir_ / persist::k_config_file,
                                   json{{"id", id_}, {"config", to_json_value(config_)}}.dump(2));
        log_ = std::make_unique<persist::EventLog>(*dir_ / persist::k_event_file);
    }
}

Session::~Session()
{
    stop_runner();
}

std::unique_ptr<Session> Session::recover(const fs::path& dir, std::shared_ptr<Provider> provider,
                                          prompts::TemplateSet templates)
{
    const auto meta = json::parse(persist::read_file(dir / persist::k_config_file));
    auto s = std::make_unique<Session>(meta.at("id").get<std::string>(), session_config_from_json(meta.at("config")),
                                       std::move(provider), std::move(templates));
    auto events = persist::read_events(dir / persist::k_event_file);
    const auto snap = persist::latest_snapshot(dir);
    std::uint64_t applied = 0;
    s->replaying_ = true;
    if (snap && snap->seq <= events.size()) {
        s->restore_state(snap->state);
        applied = snap->seq;
    }
    for (std::size_t i = 0; i < events.size(); ++i) {
        if (events[i].seq != i + 1) {
            throw Error(ErrorCode::Io, "event log sequence gap at line " + std::to_string(i + 1));
        }
        if (events[i].seq > applied) {
            s->apply(events[i]);
        }
        s->events_.push_back(std::move(events[i]));
        s->last_seq_ = i + 1;
    }
    s->replaying_ = false;
    s->dir_ = dir;
    s->log_ = std::make_unique<persist::EventLog>(dir / persist::k_event_file);
    spdlog::info("session {} recovered at seq {} (snapshot {})", s->id_, s->last_seq_, applied);
    return s;
}

Phase Session::phase() const
{
    std::lock_guard lk(mu_);
    return phase_;
}

void Session::require_phase(std::initializer_list<Phase> allowed, std::string_view action) const
{
    if (std::find(allowed.begin(), allowed.end(), phase_) == allowed.end()) {
        throw Error(ErrorCode::PhaseViolation,
                    "cannot " + std::string(action) + " in phase " + std::string(to_string(phase_)));
    }
}

AgentState& Session::agent_ref(int agent)
{
    if (agent < 0 || static_cast<std::size_t>(agent) >= agents_.size()) {
        throw Error(ErrorCode::UnknownAgent, std::to_string(agent));
    }
    return agents_[static_cast<std::size_t>(agent)];
}

bool Session::any_active() const
{
    return std::any_of(agents_.begin(), agents_.end(), [](const AgentState& a) { return a.active(); });
}

std::uint64_t Session::last_seq() const
{
    std::lock_guard lk(events_mu_);
    return last_seq_;
}

void Session::commit(SessionEvent e)
{
    {
        std::lock_guard lk(events_mu_);
        e.seq = last_seq_ + 1;
    }
    if (e.payload.is_object() && e.payload.contains("node") && e.payload["node"].is_object()) {
        e.payload["node"]["timestamp"] = e.seq;
    }
    if (log_ && !replaying_) {
        log_->append(e);
    }
    apply(e);
    {
        std::lock_guard lk(events_mu_);
        last_seq_ = e.seq;
        events_.push_back(std::move(e));
    }
    events_cv_.notify_all();
}

void Session::set_phase(Phase p, const std::string& reason)
{
    SessionEvent e;
    e.kind = EventKind::StatusChanged;
    e.payload = {{"phase", to_string(p)}, {"reason", reason}};
    commit(std::move(e));
}

void Session::refresh_phase()
{
    if (phase_ == Phase::Running && !any_active()) {
        set_phase(Phase::Quiesced, "no active agents");
    } else if (phase_ == Phase::Quiesced && any_active()) {
        set_phase(Phase::Running, "agent reactivated");
    }
}

Session::MapState Session::compute_map(std::optional<int> k) const
{
    MapState m;
    m.corpus = corpus_;
    embed_corpus(m.corpus, *provider_);
    m.layout = project_layout(m.corpus, config_.seed);
    const auto& points = m.layout.points();
    if (k) {
        if (*k < 1 || static_cast<std::size_t>(*k) > points.size()) {
            throw Error(ErrorCode::KExceedsN, "k=" + std::to_string(*k));
        }
        m.elbow.k = *k;
        m.elbow.kmin = *k;
        m.elbow.kmax = *k;
    } else {
        m.elbow = choose_k(points, config_.seed);
    }
    m.clusters = kmeans(points, m.elbow.k, config_.seed);
    return m;
}

void Session::apply(const SessionEvent& e)
{
    const auto& p = e.payload;
    switch (e.kind) {
    case EventKind::CorpusIngested: {
        std::vector<SourceRecord> records;
        for (const auto& r : p.at("records")) {
            records.push_back(record_from_json(r));
        }
        corpus_ = ingest(records, p.at("question").get<std::string>());
        return;
    }
    case EventKind::MapBuilt: {
        MapState m = pending_map_ ? std::move(*pending_map_) : compute_map(p.at("k").get<int>());
        pending_map_.reset();
        corpus_ = std::move(m.corpus);
        layout_ = std::move(m.layout);
        clusters_ = std::move(m.clusters);
        neighbors_ = NeighborGraph(layout_);
        owner_ = clusters_.assignments;
        agents_.clear();
        graphs_.clear();
        return;
    }
    case EventKind::AgentSpawned: {
        auto a = agent_from_json(p.at("agent"));
        graphs_.emplace_back(a.agent_id);
        agents_.push_back(std::move(a));
        return;
    }
    case EventKind::ReportReady: {
        const auto& r = p.at("report");
        for (const auto& w : r.at("rewrites")) {
            const auto id = w.at("node_id").get<std::string>();
            for (auto& g : graphs_) {
                if (g.contains(id)) {
                    g.rewrite(id, w.at("text").get<std::string>());
                }
            }
        }
        report_ = report_from_json(r, graphs_);
        return;
    }
    case EventKind::InterventionAccepted:
        ++interventions_;
        break;
    case EventKind::StatusChanged:
        if (!e.agent) {
            phase_ = phase_from_string(p.at("phase").get<std::string>());
            return;
        }
        break;
    default:
        break;
    }
    if (!e.agent) {
        return;
    }
    auto& agent = agent_ref(*e.agent);
    apply_agent_event(agent, graphs_.at(static_cast<std::size_t>(*e.agent)), e, e.seq);
    apply_corpus_event(corpus_, owner_, e);
}

json Session::upload_records(const std::vector<SourceRecord>& records)
{
    std::lock_guard lk(mu_);
    require_phase({Phase::Created}, "upload a corpus");
    // Validate before logging anything.
    const Corpus probe = ingest(records, config_.base.research_question);
    json list = json::array();
    for (const auto& r : records) {
        list.push_back(record_to_json(r));
    }
    SessionEvent e;
    e.kind = EventKind::CorpusIngested;
    e.payload = {{"question", config_.base.research_question}, {"records", list}};
    commit(std::move(e));
    const auto missing = std::count_if(probe.articles().begin(), probe.articles().end(),
                                       [](const ArticleRecord& a) { return a.abstract_missing; });
    return {{"articles", probe.size()}, {"abstract_missing", missing}};
}

json Session::upload_corpus(std::string_view document)
{
    std::vector<SourceRecord> records;
    try {
        records = read_records(document);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCode::MalformedUpload, e.what());
    }
    return upload_records(records);
}

json Session::build_map()
{
    std::lock_guard lk(mu_);
    require_phase({Phase::Created}, "build the map");
    if (corpus_.empty()) {
        throw Error(ErrorCode::PhaseViolation, "upload a corpus before building the map");
    }
    auto m = compute_map(config_.k);
    json payload = {
        {"k", m.clusters.k},
        {"kmin", m.elbow.kmin},
        {"kmax", m.elbow.kmax},
        {"wcss_curve", m.elbow.wcss_curve},
        {"wcss", m.clusters.wcss},
        {"iterations", m.clusters.iterations},
        {"seed", config_.seed},
        {"articles", m.corpus.size()},
        {"dimension", m.corpus.dimension()},
    };
    pending_map_ = std::make_unique<MapState>(std::move(m));
    SessionEvent e;
    e.kind = EventKind::MapBuilt;
    e.payload = payload;
    commit(std::move(e));

    auto spawned = spawn_agents(clusters_, corpus_, layout_, config_.base);
    if (config_.total_budget) {
        const auto budgets = split_budget(*config_.total_budget, static_cast<int>(spawned.size()));
        for (std::size_t i = 0; i < spawned.size(); ++i) {
            spawned[i].read_budget = budgets[i];
        }
    }
    for (const auto& a : spawned) {
        SessionEvent s;
        s.kind = EventKind::AgentSpawned;
        s.agent = a.agent_id;
        s.payload = {{"agent", to_json_value(a)}};
        commit(std::move(s));
    }
    set_phase(Phase::Mapped, "map built");
    snapshot();
    return payload;
}

json Session::start(std::optional<int> agent)
{
    std::lock_guard lk(mu_);
    require_phase({Phase::Mapped, Phase::Running, Phase::Quiesced}, "start");
    const auto status = [&](int id, AgentStatus s, const std::string& reason) {
        SessionEvent e;
        e.kind = EventKind::StatusChanged;
        e.agent = id;
        e.payload = {{"status", to_string(s)}, {"reason", reason}};
        commit(std::move(e));
    };
    int resumed = 0;
    if (agent) {
        static_cast<void>(agent_ref(*agent));
    }
    if (phase_ == Phase::Mapped && agent) {
        // Only the named agent runs; the rest wait for their own start.
        for (const auto& a : agents_) {
            if (a.agent_id != *agent && a.status == AgentStatus::Idle) {
                status(a.agent_id, AgentStatus::Paused, "waiting to be started");
            }
        }
    }
    for (const auto& a : agents_) {
        if ((!agent || a.agent_id == *agent) && a.status == AgentStatus::Paused) {
            status(a.agent_id, AgentStatus::Idle, "started");
            ++resumed;
        }
    }
    const bool was_running = phase_ == Phase::Running;
    if (phase_ == Phase::Mapped) {
        set_phase(Phase::Running, "started");
    }
    refresh_phase();
    runner_cv_.notify_all();
    return {{"phase", to_string(phase_)}, {"resumed", resumed}, {"already_running", was_running && resumed == 0}};
}

json Session::pause(std::optional<int> agent)
{
    std::lock_guard lk(mu_);
    require_phase({Phase::Mapped, Phase::Running, Phase::Quiesced}, "pause");
    if (agent) {
        static_cast<void>(agent_ref(*agent));
    }
    int paused = 0;
    for (const auto& a : agents_) {
        if ((!agent || a.agent_id == *agent) && a.active()) {
            SessionEvent e;
            e.kind = EventKind::StatusChanged;
            e.agent = a.agent_id;
            e.payload = {{"status", to_string(AgentStatus::Paused)}, {"reason", "paused by user"}};
            commit(std::move(e));
            ++paused;
        }
    }
    refresh_phase();
    return {{"phase", to_string(phase_)}, {"paused", paused}};
}

json Session::post_intervention(int agent, const json& body)
{
    std::lock_guard lk(mu_);
    require_phase({Phase::Mapped, Phase::Running, Phase::Quiesced}, "post an intervention");
    const auto& a = agent_ref(agent);
    Intervention i = intervention_from_json(body);
    if (i.kind == InterventionKind::Path) {
        const auto idx = corpus_.index_of(i.target);
        if (!idx) {
            throw Error(ErrorCode::UnknownArticle, i.target);
        }
        if (corpus_.at(*idx).read_state == ReadState::Read) {
            throw Error(ErrorCode::AlreadyRead, i.target);
        }
    }
    i.id = "i" + std::to_string(interventions_ + 1);
    SessionEvent accepted;
    accepted.kind = EventKind::InterventionAccepted;
    accepted.agent = agent;
    accepted.payload = {{"intervention", to_json_value(i)}};
    commit(std::move(accepted));
    const std::uint64_t seq = last_seq();
    if (i.kind == InterventionKind::Reassign) {
        SessionEvent expired;
        expired.kind = EventKind::InterventionExpired;
        expired.agent = agent;
        expired.payload = {{"intervention", i.id}, {"reason", "cluster reassignment is reserved and not acted on"}};
        commit(std::move(expired));
    } else if (a.status == AgentStatus::Done) {
        SessionEvent revive;
        revive.kind = EventKind::StatusChanged;
        revive.agent = agent;
        revive.payload = {{"status", to_string(AgentStatus::Idle)}, {"reason", "reactivated by intervention"}};
        commit(std::move(revive));
    }
    refresh_phase();
    runner_cv_.notify_all();
    return {{"id", i.id}, {"seq", seq}, {"queued", agents_[static_cast<std::size_t>(agent)].queue.size()}};
}

bool Session::tick()
{
    std::lock_guard lk(mu_);
    return tick_locked();
}

bool Session::tick_locked()
{
    if (phase_ != Phase::Running) {
        return false;
    }
    std::map<std::size_t, int> claimed;
    for (const auto& a : agents_) {
        if (!a.active()) {
            continue;
        }
        for (const auto& i : a.queue) {
            if (i.kind != InterventionKind::Path) {
                continue;
            }
            const auto idx = corpus_.index_of(i.target);
            if (idx && corpus_.at(*idx).read_state == ReadState::Unread) {
                claimed.emplace(*idx, a.agent_id);
            }
        }
    }
    const StepContext ctx{corpus_, layout_, neighbors_, owner_, claimed, *provider_, templates_,
                          config_.recheck_cap, last_seq()};
    std::vector<std::vector<SessionEvent>> results(agents_.size());
    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < agents_.size(); ++i) {
        if (agents_[i].active()) {
            active.push_back(i);
        }
    }
    if (config_.parallel && active.size() > 1) {
        std::vector<std::future<std::vector<SessionEvent>>> futures;
        for (const auto i : active) {
            futures.push_back(std::async(std::launch::async, [&, i] { return step(agents_[i], graphs_[i], ctx); }));
        }
        // Wait for all before rethrowing any failure.
        for (auto& f : futures) {
            f.wait();
        }
        for (std::size_t n = 0; n < active.size(); ++n) {
            results[active[n]] = futures[n].get();
        }
    } else {
        for (const auto i : active) {
            results[i] = step(agents_[i], graphs_[i], ctx);
        }
    }
    for (auto& batch : results) {
        for (auto& e : batch) {
            commit(std::move(e));
        }
    }
    ++ticks_;
    refresh_phase();
    if (config_.snapshot_every > 0 && ticks_ % config_.snapshot_every == 0) {
        snapshot();
    }
    return true;
}

std::size_t Session::run_until_quiesced(std::size_t max_ticks)
{
    std::size_t n = 0;
    while (n < max_ticks && tick()) {
        ++n;
    }
    return n;
}

json Session::synthesize()
{
    std::lock_guard lk(mu_);
    if (phase_ == Phase::Synthesized) {
        return {{"phase", to_string(phase_)}, {"final_node", report_->final_node_id},
                {"citations", report_->bibliography.size()}};
    }
    require_phase({Phase::Quiesced}, "synthesize");
    // Paused agents may still hold interventions; the session ends here.
    std::vector<SessionEvent> expiries;
    for (const auto& a : agents_) {
        for (const auto& i : a.queue) {
            SessionEvent x;
            x.kind = EventKind::InterventionExpired;
            x.agent = a.agent_id;
            x.payload = {{"intervention", i.id}, {"reason", "session ended before the agent resumed"}};
            expiries.push_back(std::move(x));
        }
    }
    SynthesisOptions options;
    options.section_order = config_.section_order;
    options.timestamp = last_seq() + expiries.size() + 1;
    const auto report = final_synthesis(graphs_, corpus_, config_.base, *provider_, templates_, options);
    for (auto& x : expiries) {
        commit(std::move(x));
    }
    SessionEvent e;
    e.kind = EventKind::ReportReady;
    e.payload = {{"report", report_to_json(report)}};
    commit(std::move(e));
    set_phase(Phase::Synthesized, "report ready");
    snapshot();
    return {{"phase", to_string(phase_)}, {"final_node", report_->final_node_id},
            {"citations", report_->bibliography.size()}};
}

void Session::start_runner()
{
    if (runner_.joinable()) {
        return;
    }
    runner_stop_ = false;
    runner_ = std::thread([this] {
        while (!runner_stop_) {
            {
                std::unique_lock lk(mu_);
                runner_cv_.wait_for(lk, std::chrono::milliseconds(200),
                                    [&] { return runner_stop_.load() || phase_ == Phase::Running; });
                if (runner_stop_) {
                    break;
                }
                if (phase_ != Phase::Running) {
                    continue;
                }
                try {
                    tick_locked();
                } catch (const std::exception& ex) {
                    spdlog::error("session {}: tick failed: {}", id_, ex.what());
                    for (const auto& a : agents_) {
                        if (a.active()) {
                            SessionEvent e;
                            e.kind = EventKind::StatusChanged;
                            e.agent = a.agent_id;
                            e.payload = {{"status", to_string(AgentStatus::Paused)}, {"reason", ex.what()}};
                            commit(std::move(e));
                        }
                    }
                    refresh_phase();
                }
            }
            // Let waiting requests in between ticks.
            std::this_thread::sleep_for(std::chrono::milliseconds(1));
        }
    });
}

void Session::stop_runner()
{
    if (!runner_.joinable()) {
        return;
    }
    runner_stop_ = true;
    runner_cv_.notify_all();
    runner_.join();
}

std::vector<SessionEvent> Session::events_since(std::uint64_t from) const
{
    std::lock_guard lk(events_mu_);
    if (from >= events_.size()) {
        return {};
    }
    return {events_.begin() + static_cast<std::ptrdiff_t>(from), events_.end()};
}

bool Session::wait_for_events(std::uint64_t after, std::chrono::milliseconds timeout) const
{
    std::unique_lock lk(events_mu_);
    return events_cv_.wait_for(lk, timeout, [&] { return last_seq_ > after; });
}

std::string Session::event_log_text() const
{
    std::lock_guard lk(events_mu_);
    std::string out;
    for (const auto& e : events_) {
        out += to_line(e);
        out += '\n';
    }
    return out;
}

std::string Session::report_document(ReportFormat format) const
{
    std::lock_guard lk(mu_);
    if (!report_) {
        throw Error(ErrorCode::NotReady, "no report before synthesis");
    }
    return render_report(*report_, format);
}

json Session::report_json() const
{
    std::lock_guard lk(mu_);
    if (!report_) {
        throw Error(ErrorCode::NotReady, "no report before synthesis");
    }
    json sections = json::array();
    for (const auto& s : report_->sections) {
        sections.push_back({{"name", s.name}, {"body", s.body}});
    }
    return {{"markdown", render_report(*report_, ReportFormat::Markdown)},
            {"sections", sections},
            {"citation_map", citation_map(*report_)},
            {"final_node", report_->final_node_id}};
}

json Session::provenance() const
{
    std::lock_guard lk(mu_);
    json nodes = json::array();
    std::size_t leaves = 0;
    std::size_t interims = 0;
    const auto add = [&](const ProvenanceGraph& g) {
        for (const auto* n : g.nodes()) {
            nodes.push_back(node_to_json(*n));
            leaves += n->kind == NodeKind::Leaf;
            interims += n->kind == NodeKind::Interim;
        }
    };
    if (report_) {
        add(report_->graph);
    } else {
        for (const auto& g : graphs_) {
            add(g);
        }
    }
    return {{"nodes", nodes},
            {"counts", {{"leaves", leaves}, {"interims", interims}, {"final", report_ ? 1 : 0}}}};
}

std::string Session::export_csv() const
{
    std::lock_guard lk(mu_);
    return export_corpus_csv(corpus_, clusters_.assignments, owner_);
}

json Session::layout_export() const
{
    std::lock_guard lk(mu_);
    json out = json::array();
    for (std::size_t i = 0; i < layout_.size(); ++i) {
        const auto& pos = layout_.positions()[i];
        const auto& pt = layout_.points()[i];
        out.push_back({{"id", layout_.ids()[i]},
                       {"radius", pos.radius},
                       {"angle", pos.angle},
                       {"x", pt.x},
                       {"y", pt.y},
                       {"cluster", i < clusters_.assignments.size() ? clusters_.assignments[i] : -1}});
    }
    return out;
}

json Session::agents_json() const
{
    std::lock_guard lk(mu_);
    json out = json::array();
    for (const auto& a : agents_) {
        out.push_back(to_json_value(a));
    }
    return out;
}

json Session::summary_json() const
{
    std::lock_guard lk(mu_);
    return {{"id", id_},
            {"phase", to_string(phase_)},
            {"articles", corpus_.size()},
            {"k", clusters_.k},
            {"agents", agents_.size()},
            {"last_seq", last_seq()},
            {"config", to_json_value(config_)}};
}

json Session::observable_state() const
{
    std::lock_guard lk(mu_);
    json articles = json::array();
    for (const auto& a : corpus_.articles()) {
        articles.push_back(article_to_json(a, false));
    }
    json agents = json::array();
    for (const auto& a : agents_) {
        agents.push_back(to_json_value(a));
    }
    json graphs = json::array();
    for (const auto& g : graphs_) {
        graphs.push_back(to_json_value(g));
    }
    return {{"phase", to_string(phase_)},
            {"articles", articles},
            {"owner", owner_},
            {"agents", agents},
            {"graphs", graphs},
            {"report", report_ ? report_to_json(*report_) : json(nullptr)}};
}

std::optional<std::string> Session::check_invariants() const
{
    std::lock_guard lk(mu_);
    for (std::size_t i = 0; i < graphs_.size(); ++i) {
        if (auto v = graphs_[i].validate()) {
            return "agent " + std::to_string(i) + ": " + *v;
        }
        std::set<ArticleId> leaves;
        for (const auto& l : graphs_[i].leaves()) {
            leaves.insert(*graphs_[i].node(l).source_article);
        }
        std::set<ArticleId> included;
        for (const auto& a : corpus_.articles()) {
            if (a.decision == Decision::Included && a.reader == static_cast<int>(i)) {
                included.insert(a.id);
            }
        }
        if (leaves != included) {
            return "agent " + std::to_string(i) + ": leaves do not match Included articles";
        }
        const auto& traj = agents_[i].trajectory;
        std::set<ArticleId> seen;
        for (const auto& t : traj) {
            if (!seen.insert(t.article).second) {
                return "agent " + std::to_string(i) + " read " + t.article + " twice";
            }
        }
    }
    if (report_) {
        if (auto v = report_->graph.validate()) {
            return "final graph: " + *v;
        }
    }
    return std::nullopt;
}

json Session::state_json() const
{
    json articles = json::array();
    for (const auto& a : corpus_.articles()) {
        articles.push_back(article_to_json(a, true));
    }
    json positions = json::array();
    for (const auto& p : layout_.positions()) {
        positions.push_back({p.radius, p.angle});
    }
    json agents = json::array();
    for (const auto& a : agents_) {
        agents.push_back(to_json_value(a));
    }
    json graphs = json::array();
    for (const auto& g : graphs_) {
        graphs.push_back(to_json_value(g));
    }
    return {
        {"seq", last_seq()},
        {"phase", to_string(phase_)},
        {"question", corpus_.research_question()},
        {"question_embedding", corpus_.question_embedding()},
        {"articles", articles},
        {"layout", {{"ids", layout_.ids()}, {"positions", positions}}},
        {"clusters", clusters_to_json(clusters_)},
        {"owner", owner_},
        {"agents", agents},
        {"graphs", graphs},
        {"report", report_ ? report_to_json(*report_) : json(nullptr)},
        {"interventions", interventions_},
        {"ticks", ticks_},
    };
}

void Session::restore_state(const json& j)
{
    phase_ = phase_from_string(j.at("phase").get<std::string>());
    std::vector<ArticleRecord> articles;
    for (const auto& a : j.at("articles")) {
        articles.push_back(article_from_json(a));
    }
    corpus_ = Corpus(std::move(articles), j.at("question").get<std::string>());
    corpus_.set_question_embedding(j.at("question_embedding").get<std::vector<double>>());
    std::vector<Position> positions;
    for (const auto& p : j.at("layout").at("positions")) {
        positions.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
    }
    layout_ = MapLayout(j.at("layout").at("ids").get<std::vector<ArticleId>>(), std::move(positions));
    neighbors_ = layout_.size() > 0 ? NeighborGraph(layout_) : NeighborGraph();
    clusters_ = clusters_from_json(j.at("clusters"));
    owner_ = j.at("owner").get<std::vector<int>>();
    agents_.clear();
    for (const auto& a : j.at("agents")) {
        agents_.push_back(agent_from_json(a));
    }
    graphs_.clear();
    for (const auto& g : j.at("graphs")) {
        graphs_.push_back(graph_from_json(g));
    }
    report_.reset();
    if (!j.at("report").is_null()) {
        report_ = report_from_json(j["report"], graphs_);
    }
    interventions_ = j.at("interventions").get<std::uint64_t>();
    ticks_ = j.value("ticks", std::size_t{0});
}

void Session::snapshot()
{
    if (!dir_ || replaying_) {
        return;
    }
    persist::write_snapshot(*dir_, last_seq(), state_json());
}

std::vector<ScriptedIntervention> parse_intervention_script(std::string_view jsonl)
{
    std::vector<ScriptedIntervention> out;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < jsonl.size()) {
        const std::size_t nl = jsonl.find('\n', pos);
        const auto line = text::trim(jsonl.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
        pos = nl == std::string_view::npos ? jsonl.size() : nl + 1;
        ++line_no;
        if (line.empty()) {
            continue;
        }
        try {
            auto j = json::parse(line);
            ScriptedIntervention s;
            s.tick = j.at("tick").get<std::size_t>();
            s.agent = j.at("agent").get<int>();
            j.erase("tick");
            j.erase("agent");
            s.body = std::move(j);
            out.push_back(std::move(s));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::InvalidArgument, "script line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    return out;
}

std::size_t run_scripted(Session& session, std::vector<ScriptedIntervention> script, std::size_t max_ticks)
{
    std::stable_sort(script.begin(), script.end(),
                     [](const ScriptedIntervention& a, const ScriptedIntervention& b) { return a.tick < b.tick; });
    std::size_t next = 0;
    std::size_t tick = 0;
    while (tick < max_ticks) {
        for (; next < script.size() && script[next].tick <= tick; ++next) {
            session.post_intervention(script[next].agent, script[next].body);
        }
        if (session.tick()) {
            ++tick;
            continue;
        }
        if (next == script.size()) {
            break;
        }
        // Quiesced early: skip ahead to the next scripted entry.
        tick = script[next].tick;
    }
    return tick;
}

SessionManager::SessionManager(std::shared_ptr<Provider> provider, prompts::TemplateSet templates,
                               std::optional<fs::path> root)
    : provider_(std::move(provider))
    , templates_(std::move(templates))
    , root_(std::move(root))
{
}

std::shared_ptr<Session> SessionManager::create(SessionConfig config)
{
    std::lock_guard lk(mu_);
    std::string id;
    do {
        id = "s" + std::to_string(++counter_);
    } while (sessions_.count(id) != 0 || (root_ && fs::exists(*root_ / id)));
    std::optional<fs::path> dir;
    if (root_) {
        dir = *root_ / id;
    }
    auto s = std::make_shared<Session>(id, std::move(config), provider_, templates_, dir);
    sessions_[id] = s;
    return s;
}

std::shared_ptr<Session> SessionManager::get(std::string_view id) const
{
    std::lock_guard lk(mu_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) {
        throw Error(ErrorCode::UnknownSession, std::string(id));
    }
    return it->second;
}

std::vector<std::string> SessionManager::ids() const
{
    std::lock_guard lk(mu_);
    std::vector<std::string> out;
    for (const auto& [id, s] : sessions_) {
        out.push_back(id);
    }
    return out;
}

std::size_t SessionManager::recover_all()
{
    if (!root_ || !fs::exists(*root_)) {
        return 0;
    }
    std::size_t n = 0;
    std::vector<fs::path> dirs;
    for (const auto& entry : fs::directory_iterator(*root_)) {
        if (entry.is_directory() && fs::exists(entry.path() / persist::k_config_file)) {
            dirs.push_back(entry.path());
        }
    }
    std::sort(dirs.begin(), dirs.end());
    for (const auto& d : dirs) {
        try {
            auto s = std::shared_ptr<Session>(Session::recover(d, provider_, templates_));
            std::lock_guard lk(mu_);
            sessions_[s->id()] = s;
            ++n;
        } catch (const std::exception& e) {
            spdlog::error("could not recover session in {}: {}", d.string(), e.what());
        }
    }
    return n;
}

}  // namespace sift
