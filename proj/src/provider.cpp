#include "sift/provider.hpp"

#include <cstdlib>

#include <spdlog/spdlog.h>

#include "sift/error.hpp"
#include "sift/http_provider.hpp"
#include "sift/mock_provider.hpp"

namespace sift {

StructuredOutput complete_structured(Provider& provider, const CompletionRequest& request)
{
    const auto attempt = [&](const CompletionRequest& r) { return parse_structured(provider.complete(r), r.schema); };
    try {
        return attempt(request);
    } catch (const Error& e) {
        if (e.code() != ErrorCode::SchemaViolation && e.code() != ErrorCode::NoObjectFound) {
            throw;
        }
        spdlog::warn("{} output rejected ({}); retrying with repair instruction", to_string(request.schema), e.what());
    }
    CompletionRequest repair = request;
    repair.prompt += k_repair_suffix;
    return attempt(repair);
}

std::vector<double> canonical_unit_vector(std::size_t dimension)
{
    std::vector<double> v(dimension, 0.0);
    if (!v.empty()) {
        v[0] = 1.0;
    }
    return v;
}

ProviderConfig ProviderConfig::from_environment()
{
    ProviderConfig c;
    const auto env = [](const char* name) -> std::string {
        const char* v = std::getenv(name);
        return v == nullptr ? std::string() : std::string(v);
    };
    if (auto v = env("SIFT_PROVIDER"); !v.empty()) {
        c.kind = v;
    }
    c.endpoint = env("SIFT_ENDPOINT");
    c.embedding_endpoint = env("SIFT_EMBEDDING_ENDPOINT");
    c.model = env("SIFT_MODEL");
    c.embedding_model = env("SIFT_EMBEDDING_MODEL");
    if (auto v = env("SIFT_TIMEOUT_MS"); !v.empty()) {
        c.timeout = std::chrono::milliseconds(std::stoll(v));
    }
    if (auto v = env("SIFT_RETRY_BUDGET"); !v.empty()) {
        c.retry_budget = std::stoi(v);
    }
    if (auto v = env("SIFT_MAX_IN_FLIGHT"); !v.empty()) {
        c.max_in_flight = static_cast<std::size_t>(std::stoul(v));
    }
    return c;
}

std::shared_ptr<Provider> make_provider(const ProviderConfig& config)
{
    if (config.kind == "mock") {
        MockPolicy policy;
        policy.dimension = config.mock_dimension;
        return std::make_shared<MockProvider>(policy);
    }
    if (config.kind == "http") {
        if (config.endpoint.empty() || config.model.empty()) {
            throw Error(ErrorCode::InvalidArgument, "http provider needs an endpoint and a model");
        }
        return std::make_shared<HttpProvider>(config);
    }
    throw Error(ErrorCode::InvalidArgument, "unknown provider kind " + config.kind);
}

}  // namespace sift
