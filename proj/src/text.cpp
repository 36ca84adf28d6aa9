#include "sift/text.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace sift::text {

namespace {

// Sorted for binary search.
constexpr std::array<std::string_view, 96> k_stopwords = {
    "a", "about", "after", "all", "also", "among", "an", "and", "any", "are",
    "as", "at", "be", "been", "before", "being", "between", "both", "but", "by",
    "can", "could", "did", "do", "does", "during", "each", "either", "for", "from",
    "had", "has", "have", "he", "her", "his", "how", "if", "in", "into",
    "is", "it", "its", "may", "might", "more", "most", "much", "must", "no",
    "nor", "not", "of", "on", "only", "or", "other", "our", "out", "over",
    "per", "same", "she", "should", "so", "some", "such", "than", "that", "the",
    "their", "them", "then", "there", "these", "they", "this", "those", "through", "to",
    "under", "up", "upon", "us", "was", "we", "were", "what", "when", "where",
    "whether", "which", "while", "who", "will", "with",
};

bool is_token_char(unsigned char c) noexcept
{
    return std::isalnum(c) != 0;
}

}  // namespace

std::vector<std::string> tokenize(std::string_view s)
{
    std::vector<std::string> out;
    std::string cur;
    for (const char ch : s) {
        const auto c = static_cast<unsigned char>(ch);
        if (c < 0x80 && is_token_char(c)) {
            cur.push_back(static_cast<char>(std::tolower(c)));
        } else if (!cur.empty()) {
            out.push_back(std::move(cur));
            cur.clear();
        }
    }
    if (!cur.empty()) {
        out.push_back(std::move(cur));
    }
    return out;
}

bool is_stopword(std::string_view token) noexcept
{
    return std::binary_search(k_stopwords.begin(), k_stopwords.end(), token);
}

std::span<const std::string_view> stopwords() noexcept
{
    return k_stopwords;
}

std::vector<std::string> content_tokens(std::string_view s)
{
    auto tokens = tokenize(s);
    std::erase_if(tokens, [](const std::string& t) { return is_stopword(t); });
    return tokens;
}

std::set<std::string> content_token_set(std::string_view s)
{
    auto tokens = content_tokens(s);
    return {std::make_move_iterator(tokens.begin()), std::make_move_iterator(tokens.end())};
}

std::vector<std::string> sentences(std::string_view s)
{
    std::vector<std::string> out;
    std::size_t start = 0;
    for (std::size_t i = 0; i < s.size(); ++i) {
        const char c = s[i];
        if (c != '.' && c != '!' && c != '?') {
            continue;
        }
        const bool at_end = i + 1 == s.size();
        if (at_end || std::isspace(static_cast<unsigned char>(s[i + 1])) != 0) {
            auto piece = trim(s.substr(start, i + 1 - start));
            if (!piece.empty()) {
                out.push_back(std::move(piece));
            }
            start = i + 1;
        }
    }
    auto tail = trim(s.substr(std::min(start, s.size())));
    if (!tail.empty()) {
        out.push_back(std::move(tail));
    }
    return out;
}

std::vector<std::string> words(std::string_view s)
{
    std::vector<std::string> out;
    std::string cur;
    for (const char c : s) {
        if (std::isspace(static_cast<unsigned char>(c)) != 0) {
            if (!cur.empty()) {
                out.push_back(std::move(cur));
                cur.clear();
            }
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty()) {
        out.push_back(std::move(cur));
    }
    return out;
}

std::string trim(std::string_view s)
{
    const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    std::size_t b = 0;
    std::size_t e = s.size();
    while (b < e && is_space(s[b])) {
        ++b;
    }
    while (e > b && is_space(s[e - 1])) {
        --e;
    }
    return std::string(s.substr(b, e - b));
}

std::string to_lower(std::string_view s)
{
    std::string out(s);
    for (auto& c : out) {
        c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    }
    return out;
}

std::string join(const std::vector<std::string>& parts, std::string_view sep)
{
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i > 0) {
            out.append(sep);
        }
        out.append(parts[i]);
    }
    return out;
}

std::uint64_t fnv1a(std::string_view s) noexcept
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (const char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace sift::text
