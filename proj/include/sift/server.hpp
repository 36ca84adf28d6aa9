#pragma once

#include <atomic>
#include <memory>
#include <string>

#include "sift/error.hpp"
#include "sift/session.hpp"

namespace sift {

/// HTTP status for a library error.
[[nodiscard]] int http_status(ErrorCode code) noexcept;

/// JSON over HTTP in front of a SessionManager, with the event log as a
/// server-sent event stream. Every session created here gets a background
/// runner that ticks while the session is Running.
class Server {
public:
    explicit Server(std::shared_ptr<SessionManager> sessions);
    ~Server();

    Server(const Server&) = delete;
    Server& operator=(const Server&) = delete;

    /// Binds to `host`; port 0 picks a free one. Returns the bound port or
    /// -1 on failure.
    int bind(const std::string& host, int port);
    /// Serves until stop(). Call after bind().
    bool listen();
    void stop();

    [[nodiscard]] SessionManager& sessions() noexcept { return *sessions_; }

private:
    struct Impl;
    std::shared_ptr<SessionManager> sessions_;
    std::unique_ptr<Impl> impl_;
};

}  // namespace sift
