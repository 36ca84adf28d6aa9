#pragma once

#include <atomic>
#include <memory>
#include <semaphore>
#include <string>

#include "sift/provider.hpp"

namespace sift {

/// Backend speaking the de facto chat-completion and embedding HTTP
/// schemas. Transport failures, 429 and 5xx responses are retried with
/// exponential backoff; other 4xx responses fail at once.
class HttpProvider final : public Provider {
public:
    explicit HttpProvider(ProviderConfig config);

    std::string complete(const CompletionRequest& request) override;
    std::vector<Embedding> embed(std::span<const std::string> texts) override;
    [[nodiscard]] std::string name() const override { return "http:" + config_.model; }

    /// HTTP requests issued so far, retries included.
    [[nodiscard]] std::size_t attempts() const noexcept { return attempts_.load(); }

private:
    std::string post_json(const std::string& url, const std::string& body, int retry_budget);

    ProviderConfig config_;
    std::string api_key_;
    std::counting_semaphore<1024> in_flight_;
    std::atomic<std::size_t> attempts_{0};
};

}  // namespace sift
