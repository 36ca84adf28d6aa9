#pragma once

#include <cstdint>
#include <memory>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "sift/agent.hpp"
#include "sift/corpus.hpp"
#include "sift/provider.hpp"

namespace sift {

struct SessionConfig;

struct ScreeningResult {
    std::set<ArticleId> predicted;
    std::set<ArticleId> gold;
    std::size_t true_positives = 0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// P = |pred & gold| / |pred| (0 for an empty prediction),
/// R = |pred & gold| / |gold|, F1 their harmonic mean (0 when P + R = 0).
/// Throws Error(EmptyGold).
[[nodiscard]] ScreeningResult screening_metrics(const std::set<ArticleId>& predicted, const std::set<ArticleId>& gold);

/// Every article currently Included.
[[nodiscard]] std::set<ArticleId> included_ids(const Corpus& corpus);

/// Included articles the agents reached on their own, without a Path
/// intervention.
[[nodiscard]] std::set<ArticleId> system_included_ids(const Corpus& corpus, std::span<const AgentState> agents);

/// Header of the corpus export.
inline constexpr std::string_view k_export_header =
    "id,title,cluster,agent_id,read_state,decision,reason_of_exclusion,summary_phrase";

/// One row per article in corpus order. `clusters` and `owner` are
/// indexed like the corpus and may be empty before the map exists.
[[nodiscard]] std::string export_corpus_csv(const Corpus& corpus, std::span<const int> clusters,
                                            std::span<const int> owner);

/// Reads a gold list: a CSV with an id column (an "included" column, when
/// present, keeps rows whose value is 1/true/yes/included), or one id per
/// line.
[[nodiscard]] std::set<ArticleId> read_gold(std::string_view document);

struct ComparisonRow {
    std::uint64_t seed = 0;
    int k = 1;
    ScreeningResult multi;
    ScreeningResult single;
};

struct ComparisonTable {
    std::vector<ComparisonRow> rows;

    /// Seeds where multi-agent recall >= single-agent recall.
    [[nodiscard]] std::size_t multi_recall_not_worse() const;
    [[nodiscard]] std::string to_csv() const;
    [[nodiscard]] std::string summary() const;
};

/// Runs the whole pipeline twice per seed, with the elbow-selected k and
/// with k = 1, under the same total read budget, and scores both against
/// `gold`.
[[nodiscard]] ComparisonTable compare_partitioning(const std::vector<SourceRecord>& records,
                                                   const SessionConfig& base, const std::set<ArticleId>& gold,
                                                   std::span<const std::uint64_t> seeds, int total_budget,
                                                   std::shared_ptr<Provider> provider);

}  // namespace sift
