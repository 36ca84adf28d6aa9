#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sift/events.hpp"

namespace sift::persist {

inline constexpr std::string_view k_event_file = "events.jsonl";
inline constexpr std::string_view k_config_file = "session.json";

/// Append-only JSONL writer. Every append is flushed before returning, so
/// a crash loses at most the line being written.
class EventLog {
public:
    explicit EventLog(std::filesystem::path file);

    void append(const SessionEvent& e);
    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
    std::ofstream out_;
};

/// Reads a log written by EventLog. A torn final line (no newline, or not
/// valid JSON) is dropped and cut from the file; damage anywhere else
/// throws Error(Io).
[[nodiscard]] std::vector<SessionEvent> read_events(const std::filesystem::path& file);

/// Writes `state` as snapshot-<seq>.json through a temporary file and a
/// rename, then removes all but the newest `keep` snapshots.
void write_snapshot(const std::filesystem::path& dir, std::uint64_t seq, const nlohmann::json& state,
                    std::size_t keep = 2);

struct Snapshot {
    std::uint64_t seq = 0;
    nlohmann::json state;
};

/// Newest readable snapshot in `dir`, if any.
[[nodiscard]] std::optional<Snapshot> latest_snapshot(const std::filesystem::path& dir);

/// Whole-file write through a temporary file and a rename.
void write_file_atomic(const std::filesystem::path& file, const std::string& content);

[[nodiscard]] std::string read_file(const std::filesystem::path& file);

}  // namespace sift::persist
