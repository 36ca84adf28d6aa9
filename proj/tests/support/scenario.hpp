#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <vector>

#include "fixture.hpp"
#include "sift/session.hpp"

namespace scenario {

[[nodiscard]] sift::SessionConfig config_for(const fixture::ReviewCorpus& corpus, std::uint64_t seed = 42);

/// Session with the corpus uploaded, the map built and every agent started.
[[nodiscard]] std::unique_ptr<sift::Session> started(const fixture::ReviewCorpus& corpus,
                                                     const sift::SessionConfig& config,
                                                     std::optional<std::filesystem::path> dir = std::nullopt);

/// `count` interventions over `agents` agents: three Paths to distinct
/// off-topic articles for every Chat and Instruct. No agent receives two
/// entries for the same tick.
[[nodiscard]] std::vector<sift::ScriptedIntervention> intervention_script(const fixture::ReviewCorpus& corpus,
                                                                          int agents, std::size_t count = 50,
                                                                          std::uint64_t seed = 7);

[[nodiscard]] std::string script_to_jsonl(const std::vector<sift::ScriptedIntervention>& script);

/// Fresh temporary directory, removed on destruction.
class TempDir {
public:
    TempDir();
    ~TempDir();
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;
    [[nodiscard]] const std::filesystem::path& path() const noexcept { return path_; }

private:
    std::filesystem::path path_;
};

}  // namespace scenario
