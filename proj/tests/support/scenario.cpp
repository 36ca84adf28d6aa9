#include "scenario.hpp"

#include <atomic>
#include <unistd.h>

#include "sift/mock_provider.hpp"
#include "sift/random.hpp"

namespace scenario {

sift::SessionConfig config_for(const fixture::ReviewCorpus& corpus, std::uint64_t seed)
{
    sift::SessionConfig c;
    c.base.research_question = corpus.question;
    c.seed = seed;
    return c;
}

std::unique_ptr<sift::Session> started(const fixture::ReviewCorpus& corpus, const sift::SessionConfig& config,
                                       std::optional<std::filesystem::path> dir)
{
    auto s = std::make_unique<sift::Session>("test", config, std::make_shared<sift::MockProvider>(),
                                             sift::prompts::TemplateSet::builtin(), std::move(dir));
    s->upload_records(corpus.records);
    s->build_map();
    s->start();
    return s;
}

std::vector<sift::ScriptedIntervention> intervention_script(const fixture::ReviewCorpus& corpus, int agents,
                                                            std::size_t count, std::uint64_t seed)
{
    static const char* chats[] = {
        "Please keep each summary short.", "Also consider sleep quality.", "Focus on adults.",
        "Exclude children.", "Looks good, keep going.",
    };
    static const std::pair<const char*, const char*> instructs[] = {
        {"summarization_requirement", "Report the sample size."},
        {"detailed_focus", "breathing exercises"},
        {"inclusion_exclusion_criteria", "Include only adults."},
    };
    std::vector<std::string> off_topic;
    for (const auto& r : corpus.records) {
        if (corpus.markers.count(r.id) == 0) {
            off_topic.push_back(r.id);
        }
    }
    sift::Rng rng(seed);
    for (std::size_t i = off_topic.size(); i > 1; --i) {
        std::swap(off_topic[i - 1], off_topic[rng.below(i)]);
    }
    std::vector<sift::ScriptedIntervention> out;
    std::size_t paths = 0;
    std::size_t chat = 0;
    std::size_t instruct = 0;
    for (std::size_t i = 0; i < count; ++i) {
        sift::ScriptedIntervention s;
        s.agent = static_cast<int>(i % static_cast<std::size_t>(agents));
        s.tick = i / static_cast<std::size_t>(agents);
        switch (i % 5) {
        case 3: s.body = {{"type", "chat"}, {"text", chats[chat++ % std::size(chats)]}}; break;
        case 4: {
            const auto& [field, value] = instructs[instruct++ % std::size(instructs)];
            s.body = {{"type", "instruct"}, {"updates", {{field, value}}}};
            break;
        }
        default: s.body = {{"type", "path"}, {"target_article", off_topic.at(paths++)}}; break;
        }
        out.push_back(std::move(s));
    }
    return out;
}

std::string script_to_jsonl(const std::vector<sift::ScriptedIntervention>& script)
{
    std::string out;
    for (const auto& s : script) {
        auto j = s.body;
        j["tick"] = s.tick;
        j["agent"] = s.agent;
        out += j.dump() + "\n";
    }
    return out;
}

TempDir::TempDir()
{
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path()
        / ("sift-test-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
}

TempDir::~TempDir()
{
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
}

}  // namespace scenario
