#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include <json.hpp>

#include "sift/agent.hpp"
#include "sift/corpus.hpp"
#include "sift/events.hpp"
#include "sift/mapping.hpp"
#include "sift/memory.hpp"
#include "sift/persistence.hpp"
#include "sift/prompts.hpp"
#include "sift/provider.hpp"
#include "sift/synthesis.hpp"

namespace sift {

enum class Phase { Created, Mapped, Running, Quiesced, Synthesized };

[[nodiscard]] std::string_view to_string(Phase p) noexcept;
[[nodiscard]] Phase phase_from_string(std::string_view s);

struct SessionConfig {
    AgentConfig base;
    std::uint64_t seed = 42;
    /// Cluster count override; the elbow search picks k when unset.
    std::optional<int> k;
    /// Total reads shared by all agents: floor(B / k) each, the remainder
    /// going one apiece to the lowest agent ids.
    std::optional<int> total_budget;
    std::vector<std::string> section_order{k_report_sections.begin(), k_report_sections.end()};
    std::size_t recheck_cap = k_default_recheck_cap;
    /// Ticks between periodic snapshots.
    std::size_t snapshot_every = 10;
    /// Run agent steps of one tick on separate threads.
    bool parallel = true;
};

[[nodiscard]] nlohmann::json to_json_value(const SessionConfig& c);
[[nodiscard]] SessionConfig session_config_from_json(const nlohmann::json& j);

/// Per-agent budgets for `total` reads over `k` agents.
[[nodiscard]] std::vector<int> split_budget(int total, int k);

/// One review: corpus, map, agents, memories and the event log that is
/// the single source of truth for all of them. Every state change is an
/// event applied through one function, live and on replay alike.
///
/// Public operations are thread-safe. A tick holds the session lock while
/// it runs, so calls made meanwhile wait for the tick to finish.
class Session {
public:
    /// `dir` enables persistence: events.jsonl, snapshots and session.json.
    Session(std::string id, SessionConfig config, std::shared_ptr<Provider> provider,
            prompts::TemplateSet templates = prompts::TemplateSet::builtin(),
            std::optional<std::filesystem::path> dir = std::nullopt);
    ~Session();

    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    /// Rebuilds a persisted session: newest snapshot, then the events
    /// logged after it. Interventions accepted but not consumed stay
    /// queued.
    static std::unique_ptr<Session> recover(const std::filesystem::path& dir, std::shared_ptr<Provider> provider,
                                            prompts::TemplateSet templates = prompts::TemplateSet::builtin());

    [[nodiscard]] const std::string& id() const noexcept { return id_; }
    [[nodiscard]] Phase phase() const;
    [[nodiscard]] const SessionConfig& config() const noexcept { return config_; }

    /// CSV or JSONL corpus. Allowed only before the map is built.
    /// Returns {"articles": n, "abstract_missing": m}.
    nlohmann::json upload_corpus(std::string_view document);
    nlohmann::json upload_records(const std::vector<SourceRecord>& records);

    /// Embeds, lays out, clusters and spawns one agent per cluster.
    nlohmann::json build_map();

    /// Starts (or resumes) one agent or all of them. Idempotent.
    nlohmann::json start(std::optional<int> agent = std::nullopt);
    nlohmann::json pause(std::optional<int> agent = std::nullopt);

    /// Validates and enqueues; InterventionAccepted is logged at once.
    /// Throws UnknownAgent, UnknownArticle, AlreadyRead, InvalidArgument,
    /// PhaseViolation.
    nlohmann::json post_intervention(int agent, const nlohmann::json& body);

    /// One round: every active agent steps on the same starting state,
    /// then the events are committed in agent order. Returns false when
    /// the session is not running.
    bool tick();

    /// Ticks until no agent is active. Returns the ticks run.
    std::size_t run_until_quiesced(std::size_t max_ticks = 100000);

    /// Final synthesis. Requires every agent Done or Paused.
    nlohmann::json synthesize();

    /// Background ticking while the phase is Running (used by the server).
    void start_runner();
    void stop_runner();

    [[nodiscard]] std::string report_document(ReportFormat format = ReportFormat::Markdown) const;
    [[nodiscard]] nlohmann::json report_json() const;
    [[nodiscard]] nlohmann::json provenance() const;
    [[nodiscard]] std::string export_csv() const;
    [[nodiscard]] nlohmann::json layout_export() const;
    [[nodiscard]] nlohmann::json agents_json() const;
    [[nodiscard]] nlohmann::json summary_json() const;

    /// Events with seq > from, in order.
    [[nodiscard]] std::vector<SessionEvent> events_since(std::uint64_t from) const;
    [[nodiscard]] std::uint64_t last_seq() const;
    /// Blocks until an event with seq > after exists or the timeout passes.
    bool wait_for_events(std::uint64_t after, std::chrono::milliseconds timeout) const;
    /// The event log as JSONL text.
    [[nodiscard]] std::string event_log_text() const;

    /// Decisions, ownership, agents, graphs, phase and report: everything
    /// a replay must reproduce. Embeddings are left out.
    [[nodiscard]] nlohmann::json observable_state() const;

    /// Structural invariants: every graph valid, leaves of each agent
    /// matching its Included articles. Returns the first violation.
    [[nodiscard]] std::optional<std::string> check_invariants() const;

    // Read access for tests and tools; not synchronized.
    [[nodiscard]] const Corpus& corpus() const noexcept { return corpus_; }
    [[nodiscard]] const MapLayout& layout() const noexcept { return layout_; }
    [[nodiscard]] const ClusterModel& clusters() const noexcept { return clusters_; }
    [[nodiscard]] const std::vector<AgentState>& agents() const noexcept { return agents_; }
    [[nodiscard]] const std::vector<ProvenanceGraph>& graphs() const noexcept { return graphs_; }
    [[nodiscard]] const std::vector<int>& owner() const noexcept { return owner_; }
    [[nodiscard]] const std::optional<FinalReport>& report() const noexcept { return report_; }

private:
    struct MapState;

    void commit(SessionEvent e);
    void apply(const SessionEvent& e);
    void set_phase(Phase p, const std::string& reason);
    void refresh_phase();
    void snapshot();
    [[nodiscard]] nlohmann::json state_json() const;
    void restore_state(const nlohmann::json& j);
    void require_phase(std::initializer_list<Phase> allowed, std::string_view action) const;
    [[nodiscard]] bool any_active() const;
    [[nodiscard]] AgentState& agent_ref(int agent);
    [[nodiscard]] MapState compute_map(std::optional<int> k) const;
    bool tick_locked();

    std::string id_;
    SessionConfig config_;
    std::shared_ptr<Provider> provider_;
    prompts::TemplateSet templates_;
    std::optional<std::filesystem::path> dir_;
    std::unique_ptr<persist::EventLog> log_;
    bool replaying_ = false;

    mutable std::mutex mu_;
    Phase phase_ = Phase::Created;
    Corpus corpus_;
    MapLayout layout_;
    ClusterModel clusters_;
    NeighborGraph neighbors_;
    std::vector<int> owner_;
    std::vector<AgentState> agents_;
    std::vector<ProvenanceGraph> graphs_;
    std::optional<FinalReport> report_;
    std::uint64_t interventions_ = 0;
    std::size_t ticks_ = 0;
    std::unique_ptr<MapState> pending_map_;

    mutable std::mutex events_mu_;
    mutable std::condition_variable events_cv_;
    std::vector<SessionEvent> events_;
    std::uint64_t last_seq_ = 0;

    std::atomic<bool> runner_stop_{false};
    std::thread runner_;
    std::condition_variable runner_cv_;
};

/// One line of an intervention script: `body` is posted to `agent` just
/// before tick `tick` (counted from 0).
struct ScriptedIntervention {
    std::size_t tick = 0;
    int agent = 0;
    nlohmann::json body;
};

/// JSONL, one intervention per line with extra "tick" and "agent" fields.
[[nodiscard]] std::vector<ScriptedIntervention> parse_intervention_script(std::string_view jsonl);

/// Ticks a started session until it quiesces with no script entries left.
/// Entries whose tick falls while the session is quiesced are posted at
/// once, which revives their agent. Returns the ticks run.
std::size_t run_scripted(Session& session, std::vector<ScriptedIntervention> script,
                         std::size_t max_ticks = 100000);

/// Owns the live sessions of one service instance.
class SessionManager {
public:
    SessionManager(std::shared_ptr<Provider> provider, prompts::TemplateSet templates = prompts::TemplateSet::builtin(),
                   std::optional<std::filesystem::path> root = std::nullopt);

    std::shared_ptr<Session> create(SessionConfig config);
    /// Throws Error(UnknownSession).
    [[nodiscard]] std::shared_ptr<Session> get(std::string_view id) const;
    [[nodiscard]] std::vector<std::string> ids() const;

    /// Recovers every session directory under the root. Returns the count.
    std::size_t recover_all();

    [[nodiscard]] const std::shared_ptr<Provider>& provider() const noexcept { return provider_; }

private:
    std::shared_ptr<Provider> provider_;
    prompts::TemplateSet templates_;
    std::optional<std::filesystem::path> root_;
    mutable std::mutex mu_;
    std::map<std::string, std::shared_ptr<Session>, std::less<>> sessions_;
    std::uint64_t counter_ = 0;
};

}  // namespace sift
