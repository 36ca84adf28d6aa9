#pragma once

#include <cstdint>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace sift::text {

/// Lowercased ASCII alphanumeric runs; every other byte separates tokens.
[[nodiscard]] std::vector<std::string> tokenize(std::string_view s);

/// tokenize() minus stopwords.
[[nodiscard]] std::vector<std::string> content_tokens(std::string_view s);

[[nodiscard]] std::set<std::string> content_token_set(std::string_view s);

[[nodiscard]] bool is_stopword(std::string_view token) noexcept;

/// The fixed English stopword list used by every token-level rule.
[[nodiscard]] std::span<const std::string_view> stopwords() noexcept;

/// Splits on '.', '!' or '?' followed by whitespace or end of text. Each
/// sentence keeps its terminator; empty pieces are dropped.
[[nodiscard]] std::vector<std::string> sentences(std::string_view s);

[[nodiscard]] std::vector<std::string> words(std::string_view s);

[[nodiscard]] std::string trim(std::string_view s);

[[nodiscard]] std::string to_lower(std::string_view s);

[[nodiscard]] std::string join(const std::vector<std::string>& parts, std::string_view sep);

/// FNV-1a, 64 bit. Stable across platforms; used for feature hashing.
[[nodiscard]] std::uint64_t fnv1a(std::string_view s) noexcept;

}  // namespace sift::text
