#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

namespace sift {

enum class EventKind {
    CorpusIngested,
    MapBuilt,
    AgentSpawned,
    AgentMoved,
    FrontierScreened,
    ArticleRead,
    NodeMerged,
    ReflectionCompleted,
    InterventionAccepted,
    InterventionExpired,
    StatusChanged,
    ReportReady,
};

[[nodiscard]] std::string_view to_string(EventKind k) noexcept;
/// Throws Error(InvalidArgument).
[[nodiscard]] EventKind event_kind_from_string(std::string_view s);

/// One entry of a session's append-only log. `seq` doubles as the logical
/// timestamp of whatever the event created; there is no wall-clock field,
/// so logs of identical runs are byte-identical.
struct SessionEvent {
    std::uint64_t seq = 0;
    EventKind kind = EventKind::StatusChanged;
    std::optional<int> agent;
    nlohmann::json payload = nlohmann::json::object();

    bool operator==(const SessionEvent&) const = default;
};

[[nodiscard]] nlohmann::json to_json(const SessionEvent& e);
[[nodiscard]] SessionEvent event_from_json(const nlohmann::json& j);

/// Single line, no trailing newline.
[[nodiscard]] std::string to_line(const SessionEvent& e);

}  // namespace sift
