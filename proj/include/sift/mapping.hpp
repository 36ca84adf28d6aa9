#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sift/corpus.hpp"

namespace sift {

struct Point {
    double x = 0.0;
    double y = 0.0;

    bool operator==(const Point&) const = default;
};

[[nodiscard]] inline double squared_distance(Point a, Point b) noexcept
{
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

/// Polar position on the relevance map; radius 0 is the map centre.
struct Position {
    double radius = 0.0;
    double angle = 0.0;

    [[nodiscard]] Point cartesian() const noexcept;
};

/// Per-article positions, indexed like the corpus they were built from.
class MapLayout {
public:
    MapLayout() = default;
    MapLayout(std::vector<ArticleId> ids, std::vector<Position> positions);

    /// Layout over arbitrary planar points; radius and angle are derived.
    static MapLayout from_points(std::vector<ArticleId> ids, std::span<const Point> points);

    [[nodiscard]] std::size_t size() const noexcept { return ids_.size(); }
    [[nodiscard]] const std::vector<ArticleId>& ids() const noexcept { return ids_; }
    [[nodiscard]] const std::vector<Position>& positions() const noexcept { return positions_; }
    [[nodiscard]] const std::vector<Point>& points() const noexcept { return points_; }

    /// Rank of each article id in ascending lexicographic id order; the
    /// tie-breaker for every distance comparison.
    [[nodiscard]] const std::vector<std::size_t>& id_rank() const noexcept { return id_rank_; }

    /// Throws Error(UnknownArticle).
    [[nodiscard]] std::size_t index_of(std::string_view id) const;

private:
    std::vector<ArticleId> ids_;
    std::vector<Position> positions_;
    std::vector<Point> points_;
    std::vector<std::size_t> id_rank_;
};

/// Two leading principal directions of the mean-centred rows, found by
/// power iteration with deflation from a start vector drawn from `seed`.
/// Each direction's sign is fixed so its largest-magnitude component is
/// positive. Returns the two projected coordinates per row.
[[nodiscard]] std::vector<Point> spectral_projection(std::span<const std::vector<double>> rows, std::uint64_t seed,
                                                     int iterations = 100);

/// radius = relevance rank / (N - 1), rank 0 the most relevant with ties
/// by ascending id; angle = atan2 of the spectral projection, in [0, 2pi).
/// Throws Error(EmbeddingsMissing).
[[nodiscard]] MapLayout project_layout(const Corpus& corpus, std::uint64_t seed);

struct ClusterModel {
    int k = 0;
    /// Cluster of each point, in [0, k).
    std::vector<int> assignments;
    std::vector<Point> centroids;
    double wcss = 0.0;
    int iterations = 0;
    /// WCSS after every Lloyd iteration.
    std::vector<double> wcss_history;

    [[nodiscard]] std::vector<std::size_t> members(int cluster) const;
};

inline constexpr int k_max_lloyd_iterations = 100;
inline constexpr int k_kmeans_restarts = 10;

/// k-means++ seeding then Lloyd iterations until the assignment is a
/// fixpoint or k_max_lloyd_iterations pass. A cluster left empty is
/// reseeded with the point farthest from its own centroid. Ties go to the
/// lower cluster index. Single-point transfers that still lower WCSS are
/// then applied (the result stays a Lloyd fixpoint). The whole run is repeated `restarts` times from
/// fresh seedings and the lowest-WCSS model kept (the first on ties).
/// Throws KExceedsN, InvalidArgument (k < 1 or restarts < 1).
[[nodiscard]] ClusterModel kmeans(std::span<const Point> points, int k, std::uint64_t seed,
                                  int restarts = k_kmeans_restarts);

[[nodiscard]] double wcss(std::span<const Point> points, std::span<const int> assignments,
                          std::span<const Point> centroids);

struct ElbowResult {
    int k = 1;
    int kmin = 0;
    int kmax = 0;
    /// WCSS for k = kmin..kmax; empty on the small-N fallback.
    std::vector<double> wcss_curve;
};

/// Elbow selection: the k in [kmin, kmax] whose (k, WCSS_k) lies farthest
/// below the chord from (kmin, WCSS_kmin) to (kmax, WCSS_kmax). Returns
/// k = 1 when N < 2 * kmin. Throws InvalidArgument on a bad range.
[[nodiscard]] ElbowResult elbow(std::span<const Point> points, int kmin, int kmax, std::uint64_t seed);

[[nodiscard]] inline int elbow_k(std::span<const Point> points, int kmin, int kmax, std::uint64_t seed)
{
    return elbow(points, kmin, kmax, seed).k;
}

/// The default search: kmin = 2, kmax = min(15, N / 10), and k = 1 for
/// corpora under 20 articles.
[[nodiscard]] ElbowResult choose_k(std::span<const Point> points, std::uint64_t seed);

inline constexpr std::size_t k_receptive_field = 8;

/// Accepts or rejects a candidate by layout index.
using NeighborFilter = std::function<bool(std::size_t)>;

/// Precomputed m nearest neighbours of every article, ascending by layout
/// distance with ties by id. Filtered queries fall back to a full scan
/// when the cached list runs out of accepted candidates.
class NeighborGraph {
public:
    NeighborGraph() = default;
    NeighborGraph(const MapLayout& layout, std::size_t m = k_receptive_field);

    [[nodiscard]] std::size_t m() const noexcept { return m_; }
    [[nodiscard]] const std::vector<std::size_t>& list(std::size_t index) const { return lists_.at(index); }

    /// Up to `m` nearest others of `index` that pass `accept`.
    [[nodiscard]] std::vector<std::size_t> query(const MapLayout& layout, std::size_t index, std::size_t m,
                                                 const NeighborFilter& accept = {}) const;

private:
    std::size_t m_ = k_receptive_field;
    std::vector<std::vector<std::size_t>> lists_;
};

/// Nearest others of `index` by full scan, optionally filtered.
[[nodiscard]] std::vector<std::size_t> nearest(const MapLayout& layout, std::size_t index, std::size_t m,
                                               const NeighborFilter& accept = {});

/// Id-level query. Throws Error(UnknownArticle).
[[nodiscard]] std::vector<ArticleId> neighbors(const MapLayout& layout, std::string_view article,
                                               std::size_t m = k_receptive_field, const NeighborFilter& accept = {});

}  // namespace sift
