#include "sift/http_provider.hpp"

#include <algorithm>
#include <cstdlib>
#include <thread>

#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "sift/error.hpp"
#include "sift/vecmath.hpp"

namespace sift {

using nlohmann::json;

namespace {

struct Url {
    std::string origin;  // scheme://host[:port]
    std::string path;
};

Url split_url(const std::string& url)
{
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos) {
        throw Error(ErrorCode::InvalidArgument, "endpoint must be an absolute URL: " + url);
    }
    const auto path_start = url.find('/', scheme_end + 3);
    if (path_start == std::string::npos) {
        return {url, "/"};
    }
    return {url.substr(0, path_start), url.substr(path_start)};
}

// RAII slot in the in-flight limiter.
class Slot {
public:
    explicit Slot(std::counting_semaphore<1024>& sem) : sem_(sem) { sem_.acquire(); }
    ~Slot() { sem_.release(); }
    Slot(const Slot&) = delete;
    Slot& operator=(const Slot&) = delete;

private:
    std::counting_semaphore<1024>& sem_;
};

}  // namespace

HttpProvider::HttpProvider(ProviderConfig config)
    : config_(std::move(config))
    , in_flight_(static_cast<std::ptrdiff_t>(std::clamp<std::size_t>(config_.max_in_flight, 1, 1024)))
{
    if (const char* key = std::getenv(config_.api_key_env.c_str())) {
        api_key_ = key;
    }
}

std::string HttpProvider::post_json(const std::string& url, const std::string& body, int retry_budget)
{
    const Url target = split_url(url);
    retry_budget = std::max(retry_budget, 1);
    std::string last_error;
    bool timed_out = false;
    for (int attempt = 1; attempt <= retry_budget; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(config_.backoff_base * (1 << std::min(attempt - 2, 10)));
        }
        Slot slot(in_flight_);
        ++attempts_;
        httplib::Client client(target.origin);
        const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
        const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
        client.set_connection_timeout(secs.count(), usecs.count());
        client.set_read_timeout(secs.count(), usecs.count());
        client.set_write_timeout(secs.count(), usecs.count());
        httplib::Headers headers;
        if (!api_key_.empty()) {
            headers.emplace("Authorization", "Bearer " + api_key_);
        }
        auto res = client.Post(target.path, headers, body, "application/json");
        if (!res) {
            const auto err = res.error();
            timed_out = err == httplib::Error::Read || err == httplib::Error::Write
                || err == httplib::Error::ConnectionTimeout;
            last_error = httplib::to_string(err);
            spdlog::warn("provider request to {} failed (attempt {}/{}): {}", url, attempt, retry_budget, last_error);
            continue;
        }
        timed_out = false;
        if (res->status >= 200 && res->status < 300) {
            return res->body;
        }
        last_error = "HTTP " + std::to_string(res->status);
        if (res->status != 429 && res->status < 500) {
            throw Error(ErrorCode::ProviderUnavailable, last_error + ": " + res->body.substr(0, 200));
        }
        spdlog::warn("provider request to {} failed (attempt {}/{}): {}", url, attempt, retry_budget, last_error);
    }
    const std::string detail = last_error + " after " + std::to_string(retry_budget) + " attempts";
    throw Error(timed_out ? ErrorCode::Timeout : ErrorCode::ProviderUnavailable, detail);
}

std::string HttpProvider::complete(const CompletionRequest& request)
{
    json body = {
        {"model", config_.model},
        {"messages", json::array({{{"role", "user"}, {"content", request.prompt}}})},
    };
    if (request.deterministic) {
        body["temperature"] = 0;
    }
    const auto raw = post_json(config_.endpoint, body.dump(), request.retry_budget);
    const auto parsed = json::parse(raw, nullptr, false);
    try {
        return parsed.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const json::exception&) {
        throw Error(ErrorCode::ProviderUnavailable, "unexpected completion response shape");
    }
}

std::vector<Embedding> HttpProvider::embed(std::span<const std::string> texts)
{
    if (texts.empty()) {
        return {};
    }
    json input = json::array();
    for (const auto& t : texts) {
        // Embedding endpoints reject empty strings.
        input.push_back(t.empty() ? std::string(" ") : t);
    }
    const json body = {{"model", config_.embedding_model}, {"input", input}};
    const auto raw = post_json(config_.embedding_endpoint, body.dump(), config_.retry_budget);
    const auto parsed = json::parse(raw, nullptr, false);
    std::vector<Embedding> out(texts.size());
    try {
        const auto& data = parsed.at("data");
        if (data.size() != texts.size()) {
            throw Error(ErrorCode::DimensionMismatch, "embedding count differs from input count");
        }
        for (std::size_t i = 0; i < data.size(); ++i) {
            const auto& item = data[i];
            const std::size_t slot = item.contains("index") ? item["index"].get<std::size_t>() : i;
            if (slot >= out.size()) {
                throw Error(ErrorCode::ProviderUnavailable, "embedding index out of range");
            }
            out[slot].values = item.at("embedding").get<std::vector<double>>();
        }
    } catch (const json::exception&) {
        throw Error(ErrorCode::ProviderUnavailable, "unexpected embedding response shape");
    }
    for (std::size_t i = 0; i < out.size(); ++i) {
        auto& e = out[i];
        if (texts[i].empty() || !vec::normalize(e.values)) {
            e.values = canonical_unit_vector(e.values.empty() ? 1 : e.values.size());
            e.degenerate = true;
        }
    }
    return out;
}

}  // namespace sift
