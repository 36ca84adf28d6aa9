// Writes a synthetic review corpus, its gold list and an intervention
// script into a directory, for CLI smoke tests and demos.
#include <filesystem>
#include <fstream>
#include <iostream>

#include "fixture.hpp"
#include "scenario.hpp"

int main(int argc, char** argv)
{
    if (argc < 2) {
        std::cerr << "usage: sift_make_fixture <dir> [articles] [seed]\n";
        return 2;
    }
    const std::filesystem::path dir = argv[1];
    const std::size_t n = argc > 2 ? std::stoul(argv[2]) : 150;
    const std::uint64_t seed = argc > 3 ? std::stoull(argv[3]) : 1;
    std::filesystem::create_directories(dir);
    const auto rc = fixture::review_corpus(seed, n, n / 8, 0);
    std::ofstream(dir / "corpus.csv") << fixture::to_csv(rc.records);
    {
        std::ofstream gold(dir / "gold.csv");
        gold << "id\n";
        for (const auto& id : rc.markers) {
            gold << id << "\n";
        }
    }
    std::ofstream(dir / "interventions.jsonl") << scenario::script_to_jsonl(scenario::intervention_script(rc, 1, 5));
    std::ofstream(dir / "question.txt") << rc.question << "\n";
    return 0;
}
