#pragma once

#include <cmath>
#include <span>
#include <vector>

namespace sift::vec {

using Vector = std::vector<double>;

[[nodiscard]] inline double dot(std::span<const double> a, std::span<const double> b) noexcept
{
    double s = 0.0;
    const std::size_t n = a.size() < b.size() ? a.size() : b.size();
    for (std::size_t i = 0; i < n; ++i) {
        s += a[i] * b[i];
    }
    return s;
}

[[nodiscard]] inline double norm(std::span<const double> a) noexcept
{
    return std::sqrt(dot(a, a));
}

/// Cosine similarity; 0 when either side has zero norm.
[[nodiscard]] inline double cosine(std::span<const double> a, std::span<const double> b) noexcept
{
    const double na = norm(a);
    const double nb = norm(b);
    if (na == 0.0 || nb == 0.0) {
        return 0.0;
    }
    return dot(a, b) / (na * nb);
}

/// Scales to unit length in place. Returns false (and leaves the vector
/// untouched) when the norm is zero.
inline bool normalize(Vector& v) noexcept
{
    const double n = norm(v);
    if (n == 0.0) {
        return false;
    }
    for (auto& x : v) {
        x /= n;
    }
    return true;
}

}  // namespace sift::vec
