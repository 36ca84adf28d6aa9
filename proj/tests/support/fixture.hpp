#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "sift/corpus.hpp"
#include "sift/mapping.hpp"

namespace fixture {

/// Synthetic review corpus: three topical blobs with disjoint vocabularies,
/// plus marker articles on the review topic spread over the blobs. Planted
/// markers mention children instead of adults and fail the narrowed
/// criteria.
struct ReviewCorpus {
    std::vector<sift::SourceRecord> records;
    std::string question;
    std::set<std::string> markers;
    std::set<std::string> planted;
    std::vector<int> blob;
};

inline constexpr const char* k_question = "Does mindfulness meditation reduce anxiety in adults?";
// Phrased as an exclusion: the recheck ranks leaves by similarity to the
// changed text, which surfaces the leaves that mention children.
inline constexpr const char* k_narrowing_criteria = "Exclude children.";

[[nodiscard]] ReviewCorpus review_corpus(std::uint64_t seed = 42, std::size_t n = 200, std::size_t markers = 20,
                                         std::size_t planted = 2);

/// Knobs for split_review_corpus. Each article carries `q` question terms
/// among `words` blob terms; the token-overlap screen passes an article
/// iff q / (q + words) clears its threshold, while cosine relevance grows
/// with q / sqrt(q + words). Long decoys can therefore outrank short
/// relevant articles without being relevant, which pushes the relevant
/// ones off the map centre and into their blob's wedge.
struct SplitParams {
    std::size_t n = 200;
    std::size_t markers = 21;
    std::size_t marker_q = 2;
    std::size_t marker_words_min = 12;
    std::size_t marker_words_max = 14;
    /// Share of non-marker articles that are decoys with 3, 2, 1 terms.
    double decoy3 = 0.5;
    double decoy2 = 0.2;
    double decoy1 = 0.15;
};

/// Relevant items split across blobs in layout space, not only in topic.
[[nodiscard]] ReviewCorpus split_review_corpus(std::uint64_t seed, const SplitParams& p = {});

/// Blob articles only; nothing shares a term with the question.
[[nodiscard]] ReviewCorpus irrelevant_corpus(std::uint64_t seed, std::size_t n);

[[nodiscard]] std::string to_csv(const std::vector<sift::SourceRecord>& records);
[[nodiscard]] std::string to_jsonl(const std::vector<sift::SourceRecord>& records);

/// `per_blob` points around each of three centres `separation` apart,
/// with unit-scale uniform noise.
[[nodiscard]] std::vector<sift::Point> planar_blobs(std::uint64_t seed, std::size_t per_blob, double separation);

[[nodiscard]] std::vector<sift::Point> random_points(std::uint64_t seed, std::size_t n, double scale = 1.0);

}  // namespace fixture
