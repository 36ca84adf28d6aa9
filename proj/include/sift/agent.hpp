#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sift/corpus.hpp"
#include "sift/events.hpp"
#include "sift/mapping.hpp"
#include "sift/memory.hpp"
#include "sift/prompts.hpp"
#include "sift/provider.hpp"

namespace sift {

struct AgentConfig {
    std::string research_question;
    std::string detailed_focus;
    std::string inclusion_exclusion_criteria;
    std::string summarization_requirement;

    bool operator==(const AgentConfig&) const = default;
};

/// Field names an Instruct intervention may set.
inline constexpr std::string_view k_config_fields[] = {
    "research_question",
    "detailed_focus",
    "inclusion_exclusion_criteria",
    "summarization_requirement",
};

/// Throws Error(InvalidArgument) for an unknown field name.
void set_config_field(AgentConfig& config, std::string_view field, std::string value);
[[nodiscard]] const std::string& config_field(const AgentConfig& config, std::string_view field);

enum class AgentStatus { Idle, Retrieving, Reading, Synthesizing, Reflecting, Paused, Done };

[[nodiscard]] std::string_view to_string(AgentStatus s) noexcept;
[[nodiscard]] AgentStatus agent_status_from_string(std::string_view s);

enum class InterventionKind { Path, Chat, Instruct, Reassign };

[[nodiscard]] std::string_view to_string(InterventionKind k) noexcept;
[[nodiscard]] InterventionKind intervention_kind_from_string(std::string_view s);

/// A live directive from the user.
///   Path: read `target` next.
///   Chat: free text, answered by a reflection.
///   Instruct: direct edits of config fields, followed by a reflection.
///   Reassign: move the agent to `cluster`; accepted but not acted on.
struct Intervention {
    std::string id;
    InterventionKind kind = InterventionKind::Chat;
    ArticleId target;
    std::string text;
    std::map<std::string, std::string> updates;
    std::optional<int> cluster;

    bool operator==(const Intervention&) const = default;
};

[[nodiscard]] nlohmann::json to_json_value(const Intervention& i);
/// Throws Error(InvalidArgument) on a malformed record.
[[nodiscard]] Intervention intervention_from_json(const nlohmann::json& j);

struct TrajectoryEntry {
    ArticleId article;
    Decision decision = Decision::Undecided;
    std::uint64_t timestamp = 0;
    bool forced = false;

    bool operator==(const TrajectoryEntry&) const = default;
};

struct ConversationTurn {
    std::string speaker;  // "user" or "agent"
    std::string text;

    bool operator==(const ConversationTurn&) const = default;
};

inline constexpr int k_skip_limit = 3;

struct AgentState {
    int agent_id = 0;
    int cluster_id = 0;
    AgentStatus status = AgentStatus::Idle;
    std::string status_reason;
    AgentConfig config;
    ArticleId start_article;
    std::optional<ArticleId> current_article;
    std::vector<TrajectoryEntry> trajectory;
    /// Candidates offered at the last retrieve, distance order.
    std::vector<ArticleId> frontier;
    std::deque<Intervention> queue;
    /// Candidates screened out at retrieve time; never offered again.
    std::set<ArticleId> passed_over;
    int consecutive_skips = 0;
    std::vector<ConversationTurn> conversation;
    std::optional<int> read_budget;
    /// The model's latest running summary of what it has found.
    std::string findings;

    [[nodiscard]] bool has_read(std::string_view article) const;
    [[nodiscard]] bool budget_exhausted() const noexcept;
    [[nodiscard]] bool active() const noexcept
    {
        return status != AgentStatus::Paused && status != AgentStatus::Done;
    }

    bool operator==(const AgentState& other) const;
};

[[nodiscard]] nlohmann::json to_json_value(const AgentState& a);
[[nodiscard]] AgentState agent_from_json(const nlohmann::json& j);
[[nodiscard]] nlohmann::json to_json_value(const AgentConfig& c);
[[nodiscard]] AgentConfig config_from_json(const nlohmann::json& j);

/// One agent per cluster, starting at the cluster's smallest-radius
/// article (ties by id). Throws Error(NoClusters).
[[nodiscard]] std::vector<AgentState> spawn_agents(const ClusterModel& clusters, const Corpus& corpus,
                                                   const MapLayout& layout, const AgentConfig& base);

/// Everything a step reads besides the agent itself. The corpus and the
/// ownership table are not modified while steps run.
struct StepContext {
    const Corpus& corpus;
    const MapLayout& layout;
    const NeighborGraph& neighbors;
    /// Owning agent of each article, by corpus index.
    std::span<const int> owner;
    /// Path targets queued this tick, by corpus index, with the first
    /// agent that queued them. Other agents leave these alone.
    const std::map<std::size_t, int>& claimed;
    Provider& provider;
    const prompts::TemplateSet& templates;
    std::size_t recheck_cap = k_default_recheck_cap;
    /// Base for provisional timestamps inside the step.
    std::uint64_t provisional_base = 0;
};

/// Candidates around the current article (the start article before the
/// first read): the current article itself when it is still unread, then
/// owned articles among the m nearest unread, not passed-over neighbours.
/// When that is empty, the nearest unread owned article anywhere.
[[nodiscard]] std::vector<ArticleId> build_frontier(const AgentState& agent, const StepContext& ctx);

[[nodiscard]] prompts::Variables retrieve_variables(const AgentState& agent, const Corpus& corpus,
                                                    std::span<const ArticleId> candidates);
[[nodiscard]] prompts::Variables read_variables(const AgentState& agent, const Corpus& corpus,
                                                const ArticleRecord& article);

/// Renders and issues the Read prompt without recording anything.
[[nodiscard]] ReadOutput decide_article(const AgentState& agent, const ArticleRecord& article, const StepContext& ctx);

/// One macro-step on private copies of the agent and its graph. Returns
/// the events it produced (seq unset) in causal order:
///   1. queued Chat/Instruct interventions are answered by one reflection;
///   2. queued Path targets are read in FIFO order;
///   3. otherwise the frontier is screened and the selections are read;
///   4. every inclusion is merged into memory;
///   5. Done or Paused status changes.
/// Provider failures end the step with a Paused status instead of
/// propagating.
[[nodiscard]] std::vector<SessionEvent> step(const AgentState& agent, const ProvenanceGraph& graph,
                                             const StepContext& ctx);

/// Applies an agent-scoped event to the agent and its graph; `timestamp`
/// stamps whatever the event creates. The same code path serves live
/// steps and log replay.
void apply_agent_event(AgentState& agent, ProvenanceGraph& graph, const SessionEvent& event, std::uint64_t timestamp);

/// Applies the corpus-level effects of an agent event: screening
/// decisions and ownership transfers.
void apply_corpus_event(Corpus& corpus, std::vector<int>& owner, const SessionEvent& event);

}  // namespace sift
