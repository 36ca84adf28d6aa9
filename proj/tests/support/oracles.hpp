#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "sift/corpus.hpp"
#include "sift/mapping.hpp"

// Reference implementations written independently of the library, used as
// ground truth. Each is the slow, obvious version of what it checks.
namespace oracle {

/// Lowercased ASCII alphanumeric runs minus the stopword list.
[[nodiscard]] std::set<std::string> content_tokens(std::string_view s);

/// Screening decision the keyword mock must reach: share of the article's
/// content tokens found in question+focus+criteria at least `threshold`,
/// every "only X" keyword present, no "exclude X" keyword present.
[[nodiscard]] bool screens_in(const sift::SourceRecord& r, const std::string& question, const std::string& focus,
                              const std::string& criteria, double threshold = 0.12);

[[nodiscard]] std::set<std::string> screened_ids(const std::vector<sift::SourceRecord>& records,
                                                 const std::string& question, const std::string& focus = "",
                                                 const std::string& criteria = "");

/// FNV-1a 64 computed bit by bit from the published parameters.
[[nodiscard]] std::uint64_t fnv1a(std::string_view s);

/// All other points sorted by (squared distance, id), first m.
[[nodiscard]] std::vector<std::size_t> nearest(const std::vector<sift::Point>& points,
                                               const std::vector<std::string>& ids, std::size_t index,
                                               std::size_t m);

/// Minimum WCSS over every split of the points into two non-empty groups.
[[nodiscard]] double best_two_partition(const std::vector<sift::Point>& points);

[[nodiscard]] double wcss_of(const std::vector<sift::Point>& points, const std::vector<int>& assignment, int k);

/// Largest eigenvalue and unit eigenvector of a symmetric 3x3 matrix via
/// the characteristic cubic.
struct Eigen3 {
    double value;
    double vector[3];
};
[[nodiscard]] Eigen3 leading_eigen3(const double m[3][3]);

/// Bracketed citation numbers in order of appearance.
[[nodiscard]] std::vector<int> citation_numbers(std::string_view text);

}  // namespace oracle
