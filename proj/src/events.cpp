#include "sift/events.hpp"

#include <array>
#include <utility>

#include "sift/error.hpp"

namespace sift {

using nlohmann::json;

namespace {

constexpr std::array<std::pair<EventKind, std::string_view>, 12> k_names = {{
    {EventKind::CorpusIngested, "CorpusIngested"},
    {EventKind::MapBuilt, "MapBuilt"},
    {EventKind::AgentSpawned, "AgentSpawned"},
    {EventKind::AgentMoved, "AgentMoved"},
    {EventKind::FrontierScreened, "FrontierScreened"},
    {EventKind::ArticleRead, "ArticleRead"},
    {EventKind::NodeMerged, "NodeMerged"},
    {EventKind::ReflectionCompleted, "ReflectionCompleted"},
    {EventKind::InterventionAccepted, "InterventionAccepted"},
    {EventKind::InterventionExpired, "InterventionExpired"},
    {EventKind::StatusChanged, "StatusChanged"},
    {EventKind::ReportReady, "ReportReady"},
}};

}  // namespace

std::string_view to_string(EventKind k) noexcept
{
    for (const auto& [kind, name] : k_names) {
        if (kind == k) {
            return name;
        }
    }
    return "StatusChanged";
}

EventKind event_kind_from_string(std::string_view s)
{
    for (const auto& [kind, name] : k_names) {
        if (name == s) {
            return kind;
        }
    }
    throw Error(ErrorCode::InvalidArgument, "unknown event kind " + std::string(s));
}

json to_json(const SessionEvent& e)
{
    return {
        {"seq", e.seq},
        {"timestamp", e.seq},
        {"kind", to_string(e.kind)},
        {"agent", e.agent ? json(*e.agent) : json(nullptr)},
        {"payload", e.payload},
    };
}

SessionEvent event_from_json(const json& j)
{
    SessionEvent e;
    e.seq = j.at("seq").get<std::uint64_t>();
    e.kind = event_kind_from_string(j.at("kind").get<std::string>());
    if (j.contains("agent") && !j["agent"].is_null()) {
        e.agent = j["agent"].get<int>();
    }
    e.payload = j.value("payload", json::object());
    return e;
}

std::string to_line(const SessionEvent& e)
{
    return to_json(e).dump();
}

}  // namespace sift
