#include "sift/mapping.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "sift/error.hpp"
#include "sift/random.hpp"
#include "sift/vecmath.hpp"

namespace sift {

namespace {

double wrap_angle(double a) noexcept
{
    constexpr double two_pi = 2.0 * std::numbers::pi;
    if (a < 0.0) {
        a += two_pi;
    }
    if (a >= two_pi) {
        a = 0.0;
    }
    return a;
}

Position polar(Point p) noexcept
{
    const double r = std::hypot(p.x, p.y);
    return {r, r == 0.0 ? 0.0 : wrap_angle(std::atan2(p.y, p.x))};
}

std::vector<std::size_t> rank_ids(const std::vector<ArticleId>& ids)
{
    std::vector<std::size_t> order(ids.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return ids[a] < ids[b]; });
    std::vector<std::size_t> rank(ids.size());
    for (std::size_t r = 0; r < order.size(); ++r) {
        rank[order[r]] = r;
    }
    return rank;
}

// Sign convention: the largest-magnitude component is positive.
void fix_sign(std::vector<double>& v) noexcept
{
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); ++i) {
        if (std::abs(v[i]) > std::abs(v[best])) {
            best = i;
        }
    }
    if (!v.empty() && v[best] < 0.0) {
        for (auto& x : v) {
            x = -x;
        }
    }
}

}  // namespace

Point Position::cartesian() const noexcept
{
    return {radius * std::cos(angle), radius * std::sin(angle)};
}

MapLayout::MapLayout(std::vector<ArticleId> ids, std::vector<Position> positions)
    : ids_(std::move(ids))
    , positions_(std::move(positions))
{
    if (ids_.size() != positions_.size()) {
        throw Error(ErrorCode::InvalidArgument, "ids and positions differ in length");
    }
    points_.reserve(positions_.size());
    for (const auto& p : positions_) {
        points_.push_back(p.cartesian());
    }
    id_rank_ = rank_ids(ids_);
}

MapLayout MapLayout::from_points(std::vector<ArticleId> ids, std::span<const Point> points)
{
    if (ids.size() != points.size()) {
        throw Error(ErrorCode::InvalidArgument, "ids and points differ in length");
    }
    std::vector<Position> positions;
    positions.reserve(points.size());
    for (const auto& p : points) {
        positions.push_back(polar(p));
    }
    MapLayout layout(std::move(ids), std::move(positions));
    // Keep the exact input coordinates rather than the polar round trip.
    layout.points_.assign(points.begin(), points.end());
    return layout;
}

std::size_t MapLayout::index_of(std::string_view id) const
{
    const auto it = std::find(ids_.begin(), ids_.end(), id);
    if (it == ids_.end()) {
        throw Error(ErrorCode::UnknownArticle, std::string(id));
    }
    return static_cast<std::size_t>(it - ids_.begin());
}

std::vector<Point> spectral_projection(std::span<const std::vector<double>> rows, std::uint64_t seed, int iterations)
{
    const std::size_t n = rows.size();
    std::vector<Point> out(n);
    if (n == 0) {
        return out;
    }
    const std::size_t dim = rows.front().size();
    for (const auto& r : rows) {
        if (r.size() != dim) {
            throw Error(ErrorCode::DimensionMismatch, "ragged embedding rows");
        }
    }

    std::vector<double> mean(dim, 0.0);
    for (const auto& r : rows) {
        for (std::size_t j = 0; j < dim; ++j) {
            mean[j] += r[j];
        }
    }
    for (auto& m : mean) {
        m /= static_cast<double>(n);
    }
    std::vector<std::vector<double>> centred(n, std::vector<double>(dim));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < dim; ++j) {
            centred[i][j] = rows[i][j] - mean[j];
        }
    }

    // y = C v with C = X^T X / n, without forming C.
    const auto covariance_times = [&](const std::vector<double>& v) {
        std::vector<double> y(dim, 0.0);
        for (const auto& row : centred) {
            const double s = vec::dot(row, v);
            for (std::size_t j = 0; j < dim; ++j) {
                y[j] += s * row[j];
            }
        }
        for (auto& x : y) {
            x /= static_cast<double>(n);
        }
        return y;
    };

    Rng rng(seed);
    std::vector<double> start(dim);
    for (auto& x : start) {
        x = 2.0 * rng.uniform() - 1.0;
    }

    std::vector<std::vector<double>> directions;
    std::vector<double> eigenvalues;
    for (int component = 0; component < 2; ++component) {
        std::vector<double> v = start;
        if (!vec::normalize(v)) {
            break;
        }
        double lambda = 0.0;
        bool vanished = false;
        for (int it = 0; it < iterations; ++it) {
            std::vector<double> y = covariance_times(v);
            for (std::size_t c = 0; c < directions.size(); ++c) {
                const double proj = vec::dot(directions[c], v);
                for (std::size_t j = 0; j < dim; ++j) {
                    y[j] -= eigenvalues[c] * proj * directions[c][j];
                }
            }
            lambda = vec::norm(y);
            if (lambda < 1e-300) {
                vanished = true;
                break;
            }
            for (std::size_t j = 0; j < dim; ++j) {
                v[j] = y[j] / lambda;
            }
        }
        if (vanished) {
            v.assign(dim, 0.0);
            lambda = 0.0;
        }
        fix_sign(v);
        directions.push_back(std::move(v));
        eigenvalues.push_back(lambda);
    }
    while (directions.size() < 2) {
        directions.emplace_back(dim, 0.0);
    }

    for (std::size_t i = 0; i < n; ++i) {
        out[i] = {vec::dot(centred[i], directions[0]), vec::dot(centred[i], directions[1])};
    }
    return out;
}

MapLayout project_layout(const Corpus& corpus, std::uint64_t seed)
{
    if (corpus.empty() || !corpus.embedded()) {
        throw Error(ErrorCode::EmbeddingsMissing, "");
    }
    const std::size_t n = corpus.size();
    std::vector<ArticleId> ids;
    std::vector<std::vector<double>> rows;
    ids.reserve(n);
    rows.reserve(n);
    for (const auto& a : corpus.articles()) {
        if (!a.relevance) {
            throw Error(ErrorCode::EmbeddingsMissing, a.id);
        }
        ids.push_back(a.id);
        rows.push_back(a.embedding);
    }

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const double ra = *corpus.at(a).relevance;
        const double rb = *corpus.at(b).relevance;
        if (ra != rb) {
            return ra > rb;
        }
        return ids[a] < ids[b];
    });

    const auto projected = spectral_projection(rows, seed);
    std::vector<Position> positions(n);
    for (std::size_t rank = 0; rank < n; ++rank) {
        const std::size_t i = order[rank];
        positions[i].radius = n == 1 ? 0.0 : static_cast<double>(rank) / static_cast<double>(n - 1);
        const Point p = projected[i];
        positions[i].angle = (p.x == 0.0 && p.y == 0.0) ? 0.0 : wrap_angle(std::atan2(p.y, p.x));
    }
    return MapLayout(std::move(ids), std::move(positions));
}

std::vector<std::size_t> ClusterModel::members(int cluster) const
{
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < assignments.size(); ++i) {
        if (assignments[i] == cluster) {
            out.push_back(i);
        }
    }
    return out;
}

double wcss(std::span<const Point> points, std::span<const int> assignments, std::span<const Point> centroids)
{
    double total = 0.0;
    for (std::size_t i = 0; i < points.size(); ++i) {
        total += squared_distance(points[i], centroids[static_cast<std::size_t>(assignments[i])]);
    }
    return total;
}

namespace {

std::vector<Point> seed_centroids(std::span<const Point> points, int k, Rng& rng)
{
    const std::size_t n = points.size();
    std::vector<Point> centroids;
    centroids.reserve(static_cast<std::size_t>(k));
    centroids.push_back(points[rng.below(n)]);
    std::vector<double> d2(n, std::numeric_limits<double>::infinity());
    while (centroids.size() < static_cast<std::size_t>(k)) {
        double total = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            d2[i] = std::min(d2[i], squared_distance(points[i], centroids.back()));
            total += d2[i];
        }
        std::size_t pick = 0;
        if (total > 0.0) {
            const double target = rng.uniform() * total;
            double acc = 0.0;
            pick = n - 1;
            for (std::size_t i = 0; i < n; ++i) {
                acc += d2[i];
                if (acc > target && d2[i] > 0.0) {
                    pick = i;
                    break;
                }
            }
        } else {
            pick = rng.below(n);
        }
        centroids.push_back(points[pick]);
    }
    return centroids;
}

int nearest_centroid(Point p, const std::vector<Point>& centroids) noexcept
{
    int best = 0;
    double best_d = squared_distance(p, centroids[0]);
    for (std::size_t c = 1; c < centroids.size(); ++c) {
        const double d = squared_distance(p, centroids[c]);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(c);
        }
    }
    return best;
}

// Moves the farthest-from-centroid point of a multi-member cluster into
// each empty cluster. Returns true when anything moved.
bool repair_empty(std::span<const Point> points, std::vector<int>& assignment, std::vector<Point>& centroids)
{
    const int k = static_cast<int>(centroids.size());
    bool repaired = false;
    for (int c = 0; c < k; ++c) {
        std::vector<std::size_t> sizes(static_cast<std::size_t>(k), 0);
        for (const int a : assignment) {
            ++sizes[static_cast<std::size_t>(a)];
        }
        if (sizes[static_cast<std::size_t>(c)] != 0) {
            continue;
        }
        std::size_t far = points.size();
        double far_d = -1.0;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto owner = static_cast<std::size_t>(assignment[i]);
            if (sizes[owner] < 2) {
                continue;
            }
            const double d = squared_distance(points[i], centroids[owner]);
            if (d > far_d) {
                far_d = d;
                far = i;
            }
        }
        if (far == points.size()) {
            continue;
        }
        assignment[far] = c;
        centroids[static_cast<std::size_t>(c)] = points[far];
        repaired = true;
    }
    return repaired;
}

std::vector<Point> means(std::span<const Point> points, const std::vector<int>& assignment,
                         const std::vector<Point>& previous)
{
    const std::size_t k = previous.size();
    std::vector<Point> sum(k);
    std::vector<std::size_t> count(k, 0);
    for (std::size_t i = 0; i < points.size(); ++i) {
        const auto c = static_cast<std::size_t>(assignment[i]);
        sum[c].x += points[i].x;
        sum[c].y += points[i].y;
        ++count[c];
    }
    std::vector<Point> out(k);
    for (std::size_t c = 0; c < k; ++c) {
        out[c] = count[c] == 0 ? previous[c]
                               : Point{sum[c].x / static_cast<double>(count[c]), sum[c].y / static_cast<double>(count[c])};
    }
    return out;
}

// Hartigan refinement: moves single points between clusters while a move
// lowers WCSS. Moving x from a (n_a members) to b changes WCSS by
// n_b/(n_b+1)|x-c_b|^2 - n_a/(n_a-1)|x-c_a|^2. A result of this pass is
// still a Lloyd fixpoint. Returns true when anything moved.
bool transfer_pass(std::span<const Point> points, std::vector<int>& assignment, std::vector<Point>& centroids)
{
    const std::size_t k = centroids.size();
    std::vector<double> count(k, 0.0);
    for (const int a : assignment) {
        count[static_cast<std::size_t>(a)] += 1.0;
    }
    bool moved_any = false;
    for (int pass = 0; pass < k_max_lloyd_iterations; ++pass) {
        bool moved = false;
        for (std::size_t i = 0; i < points.size(); ++i) {
            const auto a = static_cast<std::size_t>(assignment[i]);
            if (count[a] < 2.0) {
                continue;
            }
            const double remove = count[a] / (count[a] - 1.0) * squared_distance(points[i], centroids[a]);
            std::size_t best = a;
            double best_gain = 1e-12 * (1.0 + remove);
            for (std::size_t b = 0; b < k; ++b) {
                if (b == a) {
                    continue;
                }
                const double gain = remove - count[b] / (count[b] + 1.0) * squared_distance(points[i], centroids[b]);
                if (gain > best_gain) {
                    best_gain = gain;
                    best = b;
                }
            }
            if (best == a) {
                continue;
            }
            assignment[i] = static_cast<int>(best);
            count[a] -= 1.0;
            count[best] += 1.0;
            centroids = means(points, assignment, centroids);
            moved = true;
        }
        if (!moved) {
            break;
        }
        moved_any = true;
    }
    return moved_any;
}

}  // namespace

namespace {

ClusterModel lloyd(std::span<const Point> points, int k, Rng& rng)
{
    ClusterModel model;
    model.k = k;
    model.centroids = seed_centroids(points, k, rng);
    std::vector<int> previous;

    for (int it = 0; it < k_max_lloyd_iterations; ++it) {
        std::vector<int> assignment(points.size());
        for (std::size_t i = 0; i < points.size(); ++i) {
            assignment[i] = nearest_centroid(points[i], model.centroids);
        }
        const bool repaired = repair_empty(points, assignment, model.centroids);
        model.centroids = means(points, assignment, model.centroids);
        model.wcss_history.push_back(wcss(points, assignment, model.centroids));
        model.iterations = it + 1;
        const bool fixpoint = !repaired && assignment == previous;
        previous = std::move(assignment);
        if (fixpoint) {
            break;
        }
    }
    model.assignments = std::move(previous);
    if (repair_empty(points, model.assignments, model.centroids)) {
        model.centroids = means(points, model.assignments, model.centroids);
    }
    if (transfer_pass(points, model.assignments, model.centroids)) {
        model.wcss_history.push_back(wcss(points, model.assignments, model.centroids));
    }
    model.wcss = wcss(points, model.assignments, model.centroids);
    return model;
}

}  // namespace

ClusterModel kmeans(std::span<const Point> points, int k, std::uint64_t seed, int restarts)
{
    if (k < 1) {
        throw Error(ErrorCode::InvalidArgument, "k must be positive");
    }
    if (static_cast<std::size_t>(k) > points.size()) {
        throw Error(ErrorCode::KExceedsN, "k=" + std::to_string(k) + " N=" + std::to_string(points.size()));
    }
    if (restarts < 1) {
        throw Error(ErrorCode::InvalidArgument, "restarts must be positive");
    }
    // One generator across restarts: each seeding continues the stream.
    Rng rng(seed);
    ClusterModel best;
    for (int r = 0; r < restarts; ++r) {
        auto model = lloyd(points, k, rng);
        if (r == 0 || model.wcss < best.wcss) {
            best = std::move(model);
        }
    }
    return best;
}

ElbowResult elbow(std::span<const Point> points, int kmin, int kmax, std::uint64_t seed)
{
    ElbowResult result;
    result.kmin = kmin;
    result.kmax = kmax;
    const auto n = static_cast<int>(points.size());
    if (kmin < 2 || kmin > kmax) {
        throw Error(ErrorCode::InvalidArgument, "elbow range [" + std::to_string(kmin) + ", " + std::to_string(kmax) + "]");
    }
    if (n < 2 * kmin) {
        result.k = 1;
        return result;
    }
    if (kmax > n) {
        throw Error(ErrorCode::InvalidArgument, "kmax exceeds N");
    }
    for (int k = kmin; k <= kmax; ++k) {
        result.wcss_curve.push_back(kmeans(points, k, seed).wcss);
    }
    result.k = kmin;
    if (kmin == kmax) {
        return result;
    }
    // Signed distance below the chord; the constant 1/|chord| factor does
    // not change the argmax but keeps the value a true distance.
    const double x0 = kmin;
    const double y0 = result.wcss_curve.front();
    const double dx = static_cast<double>(kmax - kmin);
    const double dy = result.wcss_curve.back() - y0;
    const double len = std::hypot(dx, dy);
    double best = 0.0;
    for (int k = kmin + 1; k < kmax; ++k) {
        const double px = static_cast<double>(k) - x0;
        const double py = result.wcss_curve[static_cast<std::size_t>(k - kmin)] - y0;
        const double below = (dx * py - dy * px) / len;
        const double d = -below;
        if (d > best) {
            best = d;
            result.k = k;
        }
    }
    return result;
}

ElbowResult choose_k(std::span<const Point> points, std::uint64_t seed)
{
    const std::size_t n = points.size();
    if (n < 20) {
        ElbowResult r;
        r.k = 1;
        return r;
    }
    const int kmax = static_cast<int>(std::min<std::size_t>(15, n / 10));
    return elbow(points, 2, kmax, seed);
}

namespace {

struct Candidate {
    double d2;
    std::size_t rank;
    std::size_t index;

    bool operator<(const Candidate& o) const noexcept
    {
        if (d2 != o.d2) {
            return d2 < o.d2;
        }
        return rank < o.rank;
    }
};

}  // namespace

std::vector<std::size_t> nearest(const MapLayout& layout, std::size_t index, std::size_t m, const NeighborFilter& accept)
{
    const auto& pts = layout.points();
    const auto& rank = layout.id_rank();
    std::vector<Candidate> cands;
    cands.reserve(pts.size());
    for (std::size_t j = 0; j < pts.size(); ++j) {
        if (j == index || (accept && !accept(j))) {
            continue;
        }
        cands.push_back({squared_distance(pts[index], pts[j]), rank[j], j});
    }
    const std::size_t take = std::min(m, cands.size());
    std::partial_sort(cands.begin(), cands.begin() + static_cast<std::ptrdiff_t>(take), cands.end());
    std::vector<std::size_t> out;
    out.reserve(take);
    for (std::size_t i = 0; i < take; ++i) {
        out.push_back(cands[i].index);
    }
    return out;
}

NeighborGraph::NeighborGraph(const MapLayout& layout, std::size_t m)
    : m_(m)
{
    lists_.reserve(layout.size());
    for (std::size_t i = 0; i < layout.size(); ++i) {
        lists_.push_back(nearest(layout, i, m));
    }
}

std::vector<std::size_t> NeighborGraph::query(const MapLayout& layout, std::size_t index, std::size_t m,
                                              const NeighborFilter& accept) const
{
    const auto& cached = lists_.at(index);
    if (m <= m_) {
        std::vector<std::size_t> out;
        for (const std::size_t j : cached) {
            if (out.size() == m) {
                break;
            }
            if (!accept || accept(j)) {
                out.push_back(j);
            }
        }
        // The cache is complete when it did not truncate the candidate set.
        if (out.size() == m || cached.size() < m_) {
            return out;
        }
    }
    return nearest(layout, index, m, accept);
}

std::vector<ArticleId> neighbors(const MapLayout& layout, std::string_view article, std::size_t m,
                                 const NeighborFilter& accept)
{
    const std::size_t index = layout.index_of(article);
    std::vector<ArticleId> out;
    for (const std::size_t j : nearest(layout, index, m, accept)) {
        out.push_back(layout.ids()[j]);
    }
    return out;
}

}  // namespace sift
