#pragma once

#include <chrono>
#include <cstddef>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sift/structured.hpp"

namespace sift {

/// An entry the prompt enumerates (a candidate paper, a stored summary).
/// Rendered into the prompt text for remote models; backends that reason
/// over structure, such as the mock, read it directly.
struct PromptItem {
    std::string id;
    std::string title;
    std::string body;
};

struct CompletionRequest {
    SchemaId schema = SchemaId::Retrieve;
    std::string prompt;
    std::map<std::string, std::string> variables;
    std::vector<PromptItem> items;
    bool final_synthesis = false;
    bool deterministic = true;
    int retry_budget = 3;
};

struct Embedding {
    std::vector<double> values;
    /// Set when the raw vector was all zero and was replaced by the
    /// canonical unit vector.
    bool degenerate = false;
};

/// Completion and embedding backend. Implementations must be safe to call
/// from several agent workers at once.
class Provider {
public:
    virtual ~Provider() = default;

    /// Raw model text. Throws Error(ProviderUnavailable) once the retry
    /// budget is spent, Error(Timeout) when the transport times out.
    virtual std::string complete(const CompletionRequest& request) = 0;

    /// One unit-norm vector per text, in input order.
    virtual std::vector<Embedding> embed(std::span<const std::string> texts) = 0;

    [[nodiscard]] virtual std::string name() const = 0;
};

/// Appended to the prompt for the single repair attempt.
inline constexpr std::string_view k_repair_suffix =
    "\n\nYour previous output was invalid; emit only the JSON object.";

/// complete() then parse_structured(); on SchemaViolation or NoObjectFound
/// the request is reissued once with k_repair_suffix, then the error is
/// surfaced.
[[nodiscard]] StructuredOutput complete_structured(Provider& provider, const CompletionRequest& request);

/// Fixed unit vector used for texts with no usable tokens.
[[nodiscard]] std::vector<double> canonical_unit_vector(std::size_t dimension);

struct ProviderConfig {
    std::string kind = "mock";  // "mock" or "http"
    std::string endpoint;        // chat-completion URL
    std::string embedding_endpoint;
    std::string model;
    std::string embedding_model;
    std::string api_key_env = "SIFT_API_KEY";
    std::chrono::milliseconds timeout{60000};
    int retry_budget = 3;
    std::chrono::milliseconds backoff_base{500};
    std::size_t max_in_flight = 4;
    std::size_t mock_dimension = 256;

    /// Reads SIFT_PROVIDER, SIFT_ENDPOINT, SIFT_EMBEDDING_ENDPOINT,
    /// SIFT_MODEL, SIFT_EMBEDDING_MODEL, SIFT_TIMEOUT_MS, SIFT_RETRY_BUDGET.
    static ProviderConfig from_environment();
};

[[nodiscard]] std::shared_ptr<Provider> make_provider(const ProviderConfig& config);

}  // namespace sift
