#include "sift/persistence.hpp"

#include <algorithm>
#include <sstream>

#include <spdlog/spdlog.h>

#include "sift/error.hpp"

namespace sift::persist {

namespace fs = std::filesystem;
using nlohmann::json;

EventLog::EventLog(fs::path file)
    : path_(std::move(file))
{
    fs::create_directories(path_.parent_path());
    out_.open(path_, std::ios::app | std::ios::binary);
    if (!out_) {
        throw Error(ErrorCode::Io, "cannot open " + path_.string());
    }
}

void EventLog::append(const SessionEvent& e)
{
    out_ << to_line(e) << '\n';
    out_.flush();
    if (!out_) {
        throw Error(ErrorCode::Io, "write failed: " + path_.string());
    }
}

std::string read_file(const fs::path& file)
{
    std::ifstream in(file, std::ios::binary);
    if (!in) {
        throw Error(ErrorCode::Io, "cannot read " + file.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::vector<SessionEvent> read_events(const fs::path& file)
{
    std::vector<SessionEvent> out;
    if (!fs::exists(file)) {
        return out;
    }
    const std::string content = read_file(file);
    std::size_t pos = 0;
    std::size_t good_end = 0;
    while (pos < content.size()) {
        const std::size_t nl = content.find('\n', pos);
        const bool last = nl == std::string::npos;
        const std::string line = content.substr(pos, last ? std::string::npos : nl - pos);
        const auto j = json::parse(line, nullptr, false);
        if (last || j.is_discarded()) {
            const bool at_tail = last || nl + 1 >= content.size();
            if (!at_tail) {
                throw Error(ErrorCode::Io, "corrupt event log line in " + file.string());
            }
            spdlog::warn("dropping torn final line of {}", file.string());
            fs::resize_file(file, good_end);
            break;
        }
        out.push_back(event_from_json(j));
        pos = nl + 1;
        good_end = pos;
    }
    return out;
}

void write_file_atomic(const fs::path& file, const std::string& content)
{
    const fs::path tmp = file.string() + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        out << content;
        out.flush();
        if (!out) {
            throw Error(ErrorCode::Io, "write failed: " + tmp.string());
        }
    }
    fs::rename(tmp, file);
}

namespace {

std::vector<std::pair<std::uint64_t, fs::path>> snapshots(const fs::path& dir)
{
    std::vector<std::pair<std::uint64_t, fs::path>> out;
    if (!fs::exists(dir)) {
        return out;
    }
    for (const auto& entry : fs::directory_iterator(dir)) {
        const auto name = entry.path().filename().string();
        if (!name.starts_with("snapshot-") || !name.ends_with(".json")) {
            continue;
        }
        const auto digits = name.substr(9, name.size() - 9 - 5);
        if (digits.empty() || !std::all_of(digits.begin(), digits.end(), ::isdigit)) {
            continue;
        }
        out.emplace_back(std::stoull(digits), entry.path());
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

void write_snapshot(const fs::path& dir, std::uint64_t seq, const json& state, std::size_t keep)
{
    fs::create_directories(dir);
    write_file_atomic(dir / ("snapshot-" + std::to_string(seq) + ".json"), state.dump());
    auto all = snapshots(dir);
    while (all.size() > std::max<std::size_t>(keep, 1)) {
        fs::remove(all.front().second);
        all.erase(all.begin());
    }
}

std::optional<Snapshot> latest_snapshot(const fs::path& dir)
{
    auto all = snapshots(dir);
    for (auto it = all.rbegin(); it != all.rend(); ++it) {
        auto j = json::parse(read_file(it->second), nullptr, false);
        if (j.is_discarded()) {
            spdlog::warn("skipping unreadable snapshot {}", it->second.string());
            continue;
        }
        return Snapshot{it->first, std::move(j)};
    }
    return std::nullopt;
}

}  // namespace sift::persist
