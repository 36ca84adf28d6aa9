#include "sift/agent.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

#include "sift/error.hpp"
#include "sift/text.hpp"

namespace sift {

using nlohmann::json;

void set_config_field(AgentConfig& c, std::string_view field, std::string value)
{
    if (field == "research_question") {
        c.research_question = std::move(value);
    } else if (field == "detailed_focus") {
        c.detailed_focus = std::move(value);
    } else if (field == "inclusion_exclusion_criteria") {
        c.inclusion_exclusion_criteria = std::move(value);
    } else if (field == "summarization_requirement") {
        c.summarization_requirement = std::move(value);
    } else {
        throw Error(ErrorCode::InvalidArgument, "unknown config field " + std::string(field));
    }
}

const std::string& config_field(const AgentConfig& c, std::string_view field)
{
    if (field == "research_question") {
        return c.research_question;
    }
    if (field == "detailed_focus") {
        return c.detailed_focus;
    }
    if (field == "inclusion_exclusion_criteria") {
        return c.inclusion_exclusion_criteria;
    }
    if (field == "summarization_requirement") {
        return c.summarization_requirement;
    }
    throw Error(ErrorCode::InvalidArgument, "unknown config field " + std::string(field));
}

namespace {

template <typename E, std::size_t N>
std::string_view name_of(E value, const std::pair<E, std::string_view> (&table)[N])
{
    for (const auto& [v, n] : table) {
        if (v == value) {
            return n;
        }
    }
    return table[0].second;
}

template <typename E, std::size_t N>
E value_of(std::string_view name, const std::pair<E, std::string_view> (&table)[N], std::string_view what)
{
    const auto wanted = text::to_lower(name);
    for (const auto& [v, n] : table) {
        if (text::to_lower(n) == wanted) {
            return v;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown " + std::string(what) + " " + std::string(name));
}

constexpr std::pair<AgentStatus, std::string_view> k_status_names[] = {
    {AgentStatus::Idle, "Idle"},           {AgentStatus::Retrieving, "Retrieving"},
    {AgentStatus::Reading, "Reading"},     {AgentStatus::Synthesizing, "Synthesizing"},
    {AgentStatus::Reflecting, "Reflecting"}, {AgentStatus::Paused, "Paused"},
    {AgentStatus::Done, "Done"},
};

constexpr std::pair<InterventionKind, std::string_view> k_intervention_names[] = {
    {InterventionKind::Path, "Path"},
    {InterventionKind::Chat, "Chat"},
    {InterventionKind::Instruct, "Instruct"},
    {InterventionKind::Reassign, "Reassign"},
};

constexpr std::pair<Decision, std::string_view> k_decision_names[] = {
    {Decision::Undecided, "Undecided"},
    {Decision::Included, "Included"},
    {Decision::Excluded, "Excluded"},
};

}  // namespace

std::string_view to_string(AgentStatus s) noexcept
{
    return name_of(s, k_status_names);
}

AgentStatus agent_status_from_string(std::string_view s)
{
    return value_of(s, k_status_names, "agent status");
}

std::string_view to_string(InterventionKind k) noexcept
{
    return name_of(k, k_intervention_names);
}

InterventionKind intervention_kind_from_string(std::string_view s)
{
    return value_of(s, k_intervention_names, "intervention type");
}

json to_json_value(const Intervention& i)
{
    json j = {{"id", i.id}, {"type", to_string(i.kind)}};
    switch (i.kind) {
    case InterventionKind::Path: j["target_article"] = i.target; break;
    case InterventionKind::Chat: j["text"] = i.text; break;
    case InterventionKind::Instruct: j["updates"] = i.updates; break;
    case InterventionKind::Reassign: j["cluster"] = i.cluster ? json(*i.cluster) : json(nullptr); break;
    }
    return j;
}

Intervention intervention_from_json(const json& j)
{
    if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
        throw Error(ErrorCode::InvalidArgument, "intervention needs a string \"type\"");
    }
    Intervention i;
    i.id = j.value("id", "");
    i.kind = intervention_kind_from_string(j["type"].get<std::string>());
    try {
        switch (i.kind) {
        case InterventionKind::Path:
            i.target = j.at("target_article").get<std::string>();
            break;
        case InterventionKind::Chat:
            i.text = j.at("text").get<std::string>();
            if (text::trim(i.text).empty()) {
                throw Error(ErrorCode::InvalidArgument, "chat text is empty");
            }
            break;
        case InterventionKind::Instruct:
            i.updates = j.at("updates").get<std::map<std::string, std::string>>();
            if (i.updates.empty()) {
                throw Error(ErrorCode::InvalidArgument, "instruct carries no updates");
            }
            for (const auto& [field, value] : i.updates) {
                AgentConfig probe;
                set_config_field(probe, field, value);
            }
            break;
        case InterventionKind::Reassign:
            if (j.contains("cluster") && !j["cluster"].is_null()) {
                i.cluster = j["cluster"].get<int>();
            }
            break;
        }
    } catch (const json::exception& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("malformed intervention: ") + e.what());
    }
    return i;
}

bool AgentState::has_read(std::string_view article) const
{
    return std::any_of(trajectory.begin(), trajectory.end(),
                       [&](const TrajectoryEntry& t) { return t.article == article; });
}

bool AgentState::budget_exhausted() const noexcept
{
    return read_budget && static_cast<int>(trajectory.size()) >= *read_budget;
}

bool AgentState::operator==(const AgentState& o) const
{
    return agent_id == o.agent_id && cluster_id == o.cluster_id && status == o.status
        && status_reason == o.status_reason && config == o.config && start_article == o.start_article
        && current_article == o.current_article && trajectory == o.trajectory && frontier == o.frontier
        && queue == o.queue && passed_over == o.passed_over && consecutive_skips == o.consecutive_skips
        && conversation == o.conversation && read_budget == o.read_budget && findings == o.findings;
}

json to_json_value(const AgentConfig& c)
{
    return {
        {"research_question", c.research_question},
        {"detailed_focus", c.detailed_focus},
        {"inclusion_exclusion_criteria", c.inclusion_exclusion_criteria},
        {"summarization_requirement", c.summarization_requirement},
    };
}

AgentConfig config_from_json(const json& j)
{
    AgentConfig c;
    c.research_question = j.value("research_question", "");
    c.detailed_focus = j.value("detailed_focus", "");
    c.inclusion_exclusion_criteria = j.value("inclusion_exclusion_criteria", "");
    c.summarization_requirement = j.value("summarization_requirement", "");
    return c;
}

json to_json_value(const AgentState& a)
{
    json trajectory = json::array();
    for (const auto& t : a.trajectory) {
        trajectory.push_back({{"article", t.article},
                              {"decision", name_of(t.decision, k_decision_names)},
                              {"timestamp", t.timestamp},
                              {"forced", t.forced}});
    }
    json queue = json::array();
    for (const auto& i : a.queue) {
        queue.push_back(to_json_value(i));
    }
    json conversation = json::array();
    for (const auto& c : a.conversation) {
        conversation.push_back({{"speaker", c.speaker}, {"text", c.text}});
    }
    return {
        {"agent_id", a.agent_id},
        {"cluster_id", a.cluster_id},
        {"status", to_string(a.status)},
        {"status_reason", a.status_reason},
        {"config", to_json_value(a.config)},
        {"start_article", a.start_article},
        {"current_article", a.current_article ? json(*a.current_article) : json(nullptr)},
        {"trajectory", trajectory},
        {"frontier", a.frontier},
        {"queue", queue},
        {"passed_over", a.passed_over},
        {"consecutive_skips", a.consecutive_skips},
        {"conversation", conversation},
        {"read_budget", a.read_budget ? json(*a.read_budget) : json(nullptr)},
        {"findings", a.findings},
    };
}

AgentState agent_from_json(const json& j)
{
    AgentState a;
    a.agent_id = j.at("agent_id").get<int>();
    a.cluster_id = j.at("cluster_id").get<int>();
    a.status = agent_status_from_string(j.at("status").get<std::string>());
    a.status_reason = j.value("status_reason", "");
    a.config = config_from_json(j.at("config"));
    a.start_article = j.at("start_article").get<std::string>();
    if (!j.at("current_article").is_null()) {
        a.current_article = j["current_article"].get<std::string>();
    }
    for (const auto& t : j.at("trajectory")) {
        a.trajectory.push_back({t.at("article").get<std::string>(),
                                value_of(t.at("decision").get<std::string>(), k_decision_names, "decision"),
                                t.at("timestamp").get<std::uint64_t>(), t.at("forced").get<bool>()});
    }
    a.frontier = j.at("frontier").get<std::vector<ArticleId>>();
    for (const auto& i : j.at("queue")) {
        a.queue.push_back(intervention_from_json(i));
    }
    a.passed_over = j.at("passed_over").get<std::set<ArticleId>>();
    a.consecutive_skips = j.at("consecutive_skips").get<int>();
    for (const auto& c : j.at("conversation")) {
        a.conversation.push_back({c.at("speaker").get<std::string>(), c.at("text").get<std::string>()});
    }
    if (!j.at("read_budget").is_null()) {
        a.read_budget = j["read_budget"].get<int>();
    }
    a.findings = j.value("findings", "");
    return a;
}

std::vector<AgentState> spawn_agents(const ClusterModel& clusters, const Corpus& corpus, const MapLayout& layout,
                                     const AgentConfig& base)
{
    if (clusters.k < 1 || clusters.assignments.empty()) {
        throw Error(ErrorCode::NoClusters, "");
    }
    if (clusters.assignments.size() != corpus.size() || layout.size() != corpus.size()) {
        throw Error(ErrorCode::InvalidArgument, "cluster model does not match the corpus");
    }
    std::vector<AgentState> agents;
    for (int c = 0; c < clusters.k; ++c) {
        const auto members = clusters.members(c);
        if (members.empty()) {
            throw Error(ErrorCode::NoClusters, "cluster " + std::to_string(c) + " is empty");
        }
        const auto best = *std::min_element(members.begin(), members.end(), [&](std::size_t a, std::size_t b) {
            const double ra = layout.positions()[a].radius;
            const double rb = layout.positions()[b].radius;
            if (ra != rb) {
                return ra < rb;
            }
            return corpus.at(a).id < corpus.at(b).id;
        });
        AgentState a;
        a.agent_id = c;
        a.cluster_id = c;
        a.config = base;
        a.start_article = corpus.at(best).id;
        agents.push_back(std::move(a));
    }
    return agents;
}

std::vector<ArticleId> build_frontier(const AgentState& agent, const StepContext& ctx)
{
    const auto& corpus = ctx.corpus;
    const auto eligible = [&](std::size_t i) {
        const auto& a = corpus.at(i);
        if (a.read_state == ReadState::Read || agent.has_read(a.id) || agent.passed_over.count(a.id) != 0) {
            return false;
        }
        const auto claim = ctx.claimed.find(i);
        return claim == ctx.claimed.end() || claim->second == agent.agent_id;
    };
    const auto owned = [&](std::size_t i) { return ctx.owner[i] == agent.agent_id; };

    const ArticleId& here = agent.current_article ? *agent.current_article : agent.start_article;
    const auto centre = corpus.index_of(here);
    if (!centre) {
        throw Error(ErrorCode::UnknownArticle, here);
    }
    std::vector<ArticleId> out;
    if (eligible(*centre) && owned(*centre)) {
        out.push_back(here);
    }
    for (const auto i : ctx.neighbors.query(ctx.layout, *centre, k_receptive_field, eligible)) {
        if (owned(i)) {
            out.push_back(corpus.at(i).id);
        }
    }
    if (out.empty()) {
        const auto fallback = nearest(ctx.layout, *centre, 1, [&](std::size_t i) { return eligible(i) && owned(i); });
        if (!fallback.empty()) {
            out.push_back(corpus.at(fallback.front()).id);
        }
    }
    return out;
}

namespace {

std::string describe_read(const AgentState& agent, const Corpus& corpus)
{
    if (agent.trajectory.empty()) {
        return "None yet.";
    }
    std::vector<std::string> lines;
    for (const auto& t : agent.trajectory) {
        const auto& a = corpus.find(t.article);
        std::string line = "- [" + a.id + "] " + a.title + " (" + std::string(to_string(t.decision));
        if (!a.summary_phrase.empty() && a.reader == agent.agent_id) {
            line += ": " + a.summary_phrase;
        }
        lines.push_back(line + ")");
    }
    return text::join(lines, "\n");
}

std::string describe_conversation(std::span<const ConversationTurn> turns)
{
    std::vector<std::string> lines;
    for (const auto& t : turns) {
        lines.push_back((t.speaker == "agent" ? "Agent: " : "User: ") + t.text);
    }
    return text::join(lines, "\n");
}

std::string describe_paper(const ArticleRecord& a)
{
    return "Title: " + a.title + "\nAbstract: " + (a.abstract_missing ? std::string("(no abstract available)") : a.abstract);
}

ReadOutput read_output_from_json(const json& j)
{
    ReadOutput r;
    r.analysis = j.value("analysis", "");
    r.response_preparation_analysis = j.value("response_preparation_analysis", "");
    r.related_to_query = j.value("related_to_query", false);
    r.reason_of_exclusion = j.value("reason_of_exclusion", "");
    r.summary_of_the_paper = j.value("summary_of_the_paper", "");
    r.summary_phrase = j.value("summary_phrase", "");
    r.thought = j.value("thought", "");
    return r;
}

json revision_to_json(const Revision& r)
{
    return {{"leaf", r.leaf}, {"article", r.article}, {"excluded", r.excluded}, {"reason", r.reason},
            {"summary", r.summary}};
}

Revision revision_from_json(const json& j)
{
    return {j.at("leaf").get<std::string>(), j.at("article").get<std::string>(), j.at("excluded").get<bool>(),
            j.value("reason", ""), j.value("summary", "")};
}

bool recoverable(ErrorCode c)
{
    return c == ErrorCode::ProviderUnavailable || c == ErrorCode::Timeout || c == ErrorCode::SchemaViolation
        || c == ErrorCode::NoObjectFound || c == ErrorCode::DimensionMismatch;
}

// Working state of one step: private copies plus the events produced.
class Stepper {
public:
    Stepper(const AgentState& agent, const ProvenanceGraph& graph, const StepContext& ctx)
        : work_(agent)
        , graph_(graph)
        , ctx_(ctx)
        , clock_(ctx.provisional_base)
    {
    }

    std::vector<SessionEvent> run()
    {
        try {
            reflect_if_asked();
            const bool forced = follow_paths();
            if (!forced) {
                explore();
            }
            if (work_.active()) {
                if (work_.consecutive_skips >= k_skip_limit) {
                    set_status(AgentStatus::Done, "skip limit reached");
                } else if (work_.budget_exhausted()) {
                    set_status(AgentStatus::Done, "read budget exhausted");
                }
            }
        } catch (const Error& e) {
            if (!recoverable(e.code())) {
                throw;
            }
            spdlog::warn("agent {} paused: {}", work_.agent_id, e.what());
            set_status(AgentStatus::Paused, e.what());
        }
        return std::move(events_);
    }

private:
    void emit(EventKind kind, json payload)
    {
        SessionEvent e;
        e.kind = kind;
        e.agent = work_.agent_id;
        e.payload = std::move(payload);
        apply_agent_event(work_, graph_, e, ++clock_);
        events_.push_back(std::move(e));
    }

    void set_status(AgentStatus s, const std::string& reason)
    {
        emit(EventKind::StatusChanged, {{"status", to_string(s)}, {"reason", reason}});
    }

    template <typename T>
    T ask(SchemaId schema, prompts::Variables vars, std::vector<PromptItem> items, std::string& prompt_out,
          bool final_mode = false)
    {
        CompletionRequest req;
        req.schema = schema;
        req.prompt = ctx_.templates.render(schema, vars);
        req.variables = std::move(vars);
        req.items = std::move(items);
        req.final_synthesis = final_mode;
        prompt_out = req.prompt;
        return std::get<T>(complete_structured(ctx_.provider, req));
    }

    void reflect_if_asked()
    {
        std::vector<Intervention> talk;
        std::vector<std::string> reading;
        for (const auto& i : work_.queue) {
            if (i.kind == InterventionKind::Chat || i.kind == InterventionKind::Instruct) {
                talk.push_back(i);
            } else if (i.kind == InterventionKind::Path) {
                const auto* a = ctx_.corpus.index_of(i.target) ? &ctx_.corpus.find(i.target) : nullptr;
                reading.push_back("Read next: " + (a != nullptr ? a->title + " [" + a->id + "]" : i.target));
            }
        }
        if (talk.empty()) {
            return;
        }
        AgentConfig cfg = work_.config;
        std::set<std::string> direct;
        std::vector<ConversationTurn> turns;
        std::vector<PromptItem> items;
        json ids = json::array();
        for (const auto& i : talk) {
            ids.push_back(i.id);
            std::string body;
            if (i.kind == InterventionKind::Chat) {
                body = i.text;
            } else {
                std::vector<std::string> lines;
                for (const auto& [field, value] : i.updates) {
                    set_config_field(cfg, field, value);
                    direct.insert(field);
                    lines.push_back("set " + field + " to: " + value);
                }
                body = text::join(lines, "\n");
            }
            turns.push_back({"user", body});
            items.push_back({i.id, i.kind == InterventionKind::Chat ? "chat" : "instruct", body});
        }
        std::vector<ConversationTurn> history = work_.conversation;
        history.insert(history.end(), turns.begin(), turns.end());

        prompts::Variables vars{
            {"query", cfg.research_question},
            {"include_exclude_criteria", cfg.inclusion_exclusion_criteria},
            {"paper_reading_instruction_if_any", text::join(reading, "\n")},
            {"findings_so_far", work_.findings},
            {"conversation_history", describe_conversation(history)},
        };
        std::string prompt;
        const auto out = ask<ReflectOutput>(SchemaId::Reflect, vars, items, prompt);

        const auto amend = [&](std::string_view field, const std::string& update) {
            const auto u = text::trim(update);
            if (u.empty() || direct.count(std::string(field)) != 0) {
                return;
            }
            const auto& current = config_field(cfg, field);
            set_config_field(cfg, field, current.empty() ? u : current + " " + u);
        };
        amend("inclusion_exclusion_criteria", out.updates_on_criteria);
        amend("summarization_requirement", out.updates_on_summarization_requirement);
        amend("detailed_focus", out.updates_on_additional_requirement);

        const bool criteria_changed = cfg.inclusion_exclusion_criteria != work_.config.inclusion_exclusion_criteria;
        const bool summary_changed = cfg.summarization_requirement != work_.config.summarization_requirement;
        json revisions = json::array();
        json recheck_prompts = json::array();
        std::string recheck_query;
        if ((criteria_changed || summary_changed) && !graph_.leaves().empty()) {
            std::vector<std::string> changed;
            if (criteria_changed) {
                changed.push_back(cfg.inclusion_exclusion_criteria);
            }
            if (summary_changed) {
                changed.push_back(cfg.summarization_requirement);
            }
            recheck_query = text::join(changed, " ");
            const std::vector<std::string> query_text{recheck_query};
            const auto embedded = ctx_.provider.embed(query_text);
            if (embedded.size() != 1 || embedded.front().values.size() != ctx_.corpus.dimension()) {
                throw Error(ErrorCode::DimensionMismatch, "re-check query embedding");
            }
            AgentState probe = work_;
            probe.config = cfg;
            auto scratch = graph_;
            const auto decided = recheck(
                scratch, ctx_.corpus, embedded.front().values,
                [&](const ArticleRecord& a) {
                    std::string p;
                    auto r = ask<ReadOutput>(SchemaId::Read, read_variables(probe, ctx_.corpus, a),
                                             {{a.id, a.title, a.abstract}}, p);
                    recheck_prompts.push_back(p);
                    return r;
                },
                ctx_.recheck_cap);
            for (const auto& r : decided) {
                revisions.push_back(revision_to_json(r));
            }
        }
        std::string reply = out.reflection;
        if (text::trim(reply).empty()) {
            reply = "Noted.";
        }
        turns.push_back({"agent", reply});
        json turn_json = json::array();
        for (const auto& t : turns) {
            turn_json.push_back({{"speaker", t.speaker}, {"text", t.text}});
        }
        emit(EventKind::ReflectionCompleted, {
                                                 {"interventions", ids},
                                                 {"outcome", to_json(StructuredOutput(out))},
                                                 {"config", to_json_value(cfg)},
                                                 {"instruct_fields", direct},
                                                 {"turns", turn_json},
                                                 {"recheck_query", recheck_query},
                                                 {"revisions", revisions},
                                                 {"recheck_prompts", recheck_prompts},
                                                 {"prompt", prompt},
                                             });
    }

    bool follow_paths()
    {
        std::vector<Intervention> paths;
        for (const auto& i : work_.queue) {
            if (i.kind == InterventionKind::Path) {
                paths.push_back(i);
            }
        }
        bool read_any = false;
        for (const auto& p : paths) {
            const auto idx = ctx_.corpus.index_of(p.target);
            std::string reason;
            if (!idx) {
                reason = "unknown article";
            } else if (ctx_.corpus.at(*idx).read_state == ReadState::Read || work_.has_read(p.target)) {
                reason = "article already read";
            } else if (const auto c = ctx_.claimed.find(*idx); c != ctx_.claimed.end() && c->second != work_.agent_id) {
                reason = "article claimed by agent " + std::to_string(c->second);
            }
            if (!reason.empty()) {
                emit(EventKind::InterventionExpired, {{"intervention", p.id}, {"reason", reason}});
                continue;
            }
            read_article(*idx, true, p.id);
            read_any = true;
        }
        return read_any;
    }

    void explore()
    {
        if (!work_.active()) {
            return;
        }
        if (work_.budget_exhausted()) {
            set_status(AgentStatus::Done, "read budget exhausted");
            return;
        }
        const auto frontier = build_frontier(work_, ctx_);
        if (frontier.empty()) {
            set_status(AgentStatus::Done, "no unread articles remain");
            return;
        }
        std::vector<PromptItem> items;
        for (std::size_t i = 0; i < frontier.size(); ++i) {
            const auto& a = ctx_.corpus.find(frontier[i]);
            items.push_back({std::to_string(i + 1), a.title, a.abstract});
        }
        std::string prompt;
        const auto out =
            ask<RetrieveOutput>(SchemaId::Retrieve, retrieve_variables(work_, ctx_.corpus, frontier), items, prompt);
        std::vector<ArticleId> selected;
        json invalid = json::array();
        if (!out.skip) {
            for (const int n : out.selected) {
                if (n < 1 || static_cast<std::size_t>(n) > frontier.size()) {
                    spdlog::warn("agent {}: model selected candidate {} of {}; ignored", work_.agent_id, n,
                                 frontier.size());
                    invalid.push_back(n);
                    continue;
                }
                const auto& id = frontier[static_cast<std::size_t>(n - 1)];
                if (std::find(selected.begin(), selected.end(), id) == selected.end()) {
                    selected.push_back(id);
                }
            }
        }
        emit(EventKind::FrontierScreened, {
                                              {"candidates", frontier},
                                              {"selected", selected},
                                              {"skip", selected.empty()},
                                              {"invalid_selections", invalid},
                                              {"thought", out.thought},
                                              {"prompt", prompt},
                                          });
        for (const auto& id : selected) {
            if (work_.budget_exhausted()) {
                break;
            }
            read_article(*ctx_.corpus.index_of(id), false, std::nullopt);
        }
    }

    void read_article(std::size_t idx, bool forced, const std::optional<std::string>& intervention)
    {
        const auto& article = ctx_.corpus.at(idx);
        emit(EventKind::AgentMoved, {{"from", work_.current_article ? json(*work_.current_article) : json(nullptr)},
                                     {"to", article.id},
                                     {"forced", forced}});
        std::string prompt;
        const auto out = ask<ReadOutput>(SchemaId::Read, read_variables(work_, ctx_.corpus, article),
                                         {{article.id, article.title, article.abstract}}, prompt);
        json node = nullptr;
        if (out.related_to_query) {
            SynthesisNode leaf;
            leaf.id = graph_.next_id();
            leaf.kind = NodeKind::Leaf;
            leaf.text = out.summary_of_the_paper;
            leaf.summary_phrase = out.summary_phrase;
            leaf.agent_id = work_.agent_id;
            leaf.source_article = article.id;
            node = node_to_json(leaf);
        }
        emit(EventKind::ArticleRead, {
                                         {"article", article.id},
                                         {"forced", forced},
                                         {"intervention", intervention ? json(*intervention) : json(nullptr)},
                                         {"decision", out.related_to_query ? "Included" : "Excluded"},
                                         {"outcome", to_json(StructuredOutput(out))},
                                         {"node", node},
                                         {"prompt", prompt},
                                     });
        if (out.related_to_query) {
            merge(node["node_id"].get<std::string>());
        }
    }

    void merge(const NodeId& leaf)
    {
        std::vector<NodeId> others;
        for (const auto& r : graph_.roots()) {
            if (r != leaf) {
                others.push_back(r);
            }
        }
        const auto none = [&](const std::string& why, const json& prompt, const std::string& thought) {
            emit(EventKind::NodeMerged, {{"leaf", leaf},
                                         {"node", nullptr},
                                         {"identified", json::array()},
                                         {"reasoning", why},
                                         {"thought", thought},
                                         {"prompt", prompt}});
        };
        if (others.empty()) {
            none("No earlier summaries in memory.", nullptr, "");
            return;
        }
        std::vector<std::string> listed;
        std::vector<PromptItem> items;
        for (const auto& r : others) {
            const auto& n = graph_.node(r);
            listed.push_back(r + ": " + n.text);
            items.push_back({r, "", n.text});
        }
        const auto& cfg = work_.config;
        prompts::Variables vars{
            {"query", cfg.research_question},
            {"current_summary_index", leaf},
            {"paper_summary", graph_.node(leaf).text},
            {"previous_summaries", text::join(listed, "\n\n")},
            {"summarization_requirement", cfg.summarization_requirement},
            {"inclusion_exclusion_criteria", cfg.inclusion_exclusion_criteria},
        };
        std::string prompt;
        const auto out = ask<SynthesizeOutput>(SchemaId::Synthesize, vars, items, prompt);

        std::vector<NodeId> identified;
        for (const auto& id : out.identified_relevant_summaries) {
            const auto clean = text::trim(id);
            if (std::find(others.begin(), others.end(), clean) == others.end()) {
                spdlog::warn("agent {}: merge named unknown summary '{}'; ignored", work_.agent_id, clean);
                continue;
            }
            if (std::find(identified.begin(), identified.end(), clean) == identified.end()) {
                identified.push_back(clean);
            }
        }
        if (identified.empty()) {
            none(out.reasoning, prompt, out.thought);
            return;
        }
        std::vector<NodeId> children = identified;
        children.push_back(leaf);
        std::set<NodeId> below(children.begin(), children.end());
        for (const auto& c : children) {
            const auto d = graph_.descendants(c);
            below.insert(d.begin(), d.end());
        }
        SynthesisNode n;
        n.id = graph_.next_id();
        n.kind = NodeKind::Interim;
        n.agent_id = work_.agent_id;
        n.children = children;
        n.text = strip_citation_tags(out.synthesized_summary,
                                     [&](std::string_view id) { return below.count(std::string(id)) != 0; });
        n.citations = citation_ids(n.text);
        emit(EventKind::NodeMerged, {{"leaf", leaf},
                                     {"node", node_to_json(n)},
                                     {"identified", identified},
                                     {"reasoning", out.reasoning},
                                     {"thought", out.thought},
                                     {"prompt", prompt}});
    }

    AgentState work_;
    ProvenanceGraph graph_;
    const StepContext& ctx_;
    std::uint64_t clock_;
    std::vector<SessionEvent> events_;
};

}  // namespace

prompts::Variables retrieve_variables(const AgentState& agent, const Corpus& corpus,
                                      std::span<const ArticleId> candidates)
{
    std::vector<std::string> listed;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
        const auto& a = corpus.find(candidates[i]);
        listed.push_back(std::to_string(i + 1) + ". " + describe_paper(a));
    }
    return {
        {"query", agent.config.research_question},
        {"paper_already_read", describe_read(agent, corpus)},
        {"findings_so_far", agent.findings},
        {"available_papers", text::join(listed, "\n\n")},
        {"inclusion_criteria", agent.config.inclusion_exclusion_criteria},
        {"detailed_focus", agent.config.detailed_focus},
        {"inspiration_conversation_history", describe_conversation(agent.conversation)},
    };
}

prompts::Variables read_variables(const AgentState& agent, const Corpus& corpus, const ArticleRecord& article)
{
    return {
        {"query", agent.config.research_question},
        {"detailed_focus", agent.config.detailed_focus},
        {"paper_already_read", describe_read(agent, corpus)},
        {"findings_so_far", agent.findings},
        {"paper_to_read", describe_paper(article)},
        {"inclusion_criteria", agent.config.inclusion_exclusion_criteria},
        {"inspiration_conversation_history", describe_conversation(agent.conversation)},
    };
}

ReadOutput decide_article(const AgentState& agent, const ArticleRecord& article, const StepContext& ctx)
{
    CompletionRequest req;
    req.schema = SchemaId::Read;
    req.variables = read_variables(agent, ctx.corpus, article);
    req.prompt = ctx.templates.render(SchemaId::Read, req.variables);
    req.items = {{article.id, article.title, article.abstract}};
    return std::get<ReadOutput>(complete_structured(ctx.provider, req));
}

std::vector<SessionEvent> step(const AgentState& agent, const ProvenanceGraph& graph, const StepContext& ctx)
{
    if (!agent.active()) {
        return {};
    }
    return Stepper(agent, graph, ctx).run();
}

void apply_agent_event(AgentState& agent, ProvenanceGraph& graph, const SessionEvent& e, std::uint64_t timestamp)
{
    const auto& p = e.payload;
    const auto drop_intervention = [&](const std::string& id) {
        std::erase_if(agent.queue, [&](const Intervention& i) { return i.id == id; });
    };
    switch (e.kind) {
    case EventKind::AgentMoved:
        agent.current_article = p.at("to").get<std::string>();
        break;
    case EventKind::FrontierScreened: {
        agent.frontier = p.at("candidates").get<std::vector<ArticleId>>();
        const auto selected = p.at("selected").get<std::vector<ArticleId>>();
        for (const auto& c : agent.frontier) {
            if (std::find(selected.begin(), selected.end(), c) == selected.end()) {
                agent.passed_over.insert(c);
            }
        }
        if (p.at("skip").get<bool>()) {
            ++agent.consecutive_skips;
        }
        break;
    }
    case EventKind::ArticleRead: {
        const auto article = p.at("article").get<std::string>();
        const bool forced = p.at("forced").get<bool>();
        const auto out = read_output_from_json(p.at("outcome"));
        agent.trajectory.push_back(
            {article, out.related_to_query ? Decision::Included : Decision::Excluded, timestamp, forced});
        agent.current_article = article;
        if (out.related_to_query) {
            agent.consecutive_skips = 0;
            graph.add_leaf(article, out, timestamp, p.at("node").at("node_id").get<std::string>());
        } else if (!forced) {
            ++agent.consecutive_skips;
        }
        if (!text::trim(out.thought).empty()) {
            agent.findings = out.thought;
        }
        if (!p.at("intervention").is_null()) {
            drop_intervention(p["intervention"].get<std::string>());
        }
        break;
    }
    case EventKind::NodeMerged: {
        if (!p.at("node").is_null()) {
            const auto n = node_from_json(p["node"]);
            graph.merge_node(NodeKind::Interim, n.children, n.text, timestamp, n.id);
        }
        const auto thought = p.value("thought", "");
        if (!text::trim(thought).empty()) {
            agent.findings = thought;
        }
        break;
    }
    case EventKind::ReflectionCompleted: {
        agent.config = config_from_json(p.at("config"));
        for (const auto& t : p.at("turns")) {
            agent.conversation.push_back({t.at("speaker").get<std::string>(), t.at("text").get<std::string>()});
        }
        for (const auto& id : p.at("interventions")) {
            drop_intervention(id.get<std::string>());
        }
        std::vector<Revision> revisions;
        for (const auto& r : p.at("revisions")) {
            revisions.push_back(revision_from_json(r));
        }
        apply_revisions(graph, revisions);
        break;
    }
    case EventKind::InterventionAccepted: {
        auto i = intervention_from_json(p.at("intervention"));
        if (i.kind != InterventionKind::Reassign) {
            agent.queue.push_back(std::move(i));
        }
        break;
    }
    case EventKind::InterventionExpired:
        drop_intervention(p.at("intervention").get<std::string>());
        break;
    case EventKind::StatusChanged: {
        const auto next = agent_status_from_string(p.at("status").get<std::string>());
        if (agent.status == AgentStatus::Done && next != AgentStatus::Done) {
            agent.consecutive_skips = 0;
        }
        agent.status = next;
        agent.status_reason = p.value("reason", "");
        break;
    }
    default:
        break;
    }
}

void apply_corpus_event(Corpus& corpus, std::vector<int>& owner, const SessionEvent& e)
{
    const auto& p = e.payload;
    if (e.kind == EventKind::ArticleRead) {
        const auto id = p.at("article").get<std::string>();
        const auto idx = corpus.index_of(id);
        if (!idx) {
            throw Error(ErrorCode::UnknownArticle, id);
        }
        auto& a = corpus.at(*idx);
        const auto out = read_output_from_json(p.at("outcome"));
        a.read_state = ReadState::Read;
        a.decision = out.related_to_query ? Decision::Included : Decision::Excluded;
        a.exclusion_reason = out.related_to_query ? std::string() : out.reason_of_exclusion;
        a.summary_phrase = out.summary_phrase;
        a.reader = e.agent;
        if (p.at("forced").get<bool>() && e.agent) {
            owner.at(*idx) = *e.agent;
        }
    } else if (e.kind == EventKind::ReflectionCompleted) {
        for (const auto& r : p.at("revisions")) {
            if (!r.at("excluded").get<bool>()) {
                continue;
            }
            auto& a = corpus.find(r.at("article").get<std::string>());
            a.decision = Decision::Excluded;
            a.exclusion_reason = r.value("reason", "");
        }
    }
}

}  // namespace sift
