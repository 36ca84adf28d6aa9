#include "sift/server.hpp"

#include <charconv>

#include <httplib.h>
#include <spdlog/spdlog.h>

namespace sift {

using nlohmann::json;

int http_status(ErrorCode code) noexcept
{
    switch (code) {
    case ErrorCode::UnknownSession:
    case ErrorCode::UnknownAgent:
    case ErrorCode::UnknownArticle:
    case ErrorCode::UnknownNode:
        return 404;
    case ErrorCode::PhaseViolation:
    case ErrorCode::AlreadyRead:
    case ErrorCode::NotReady:
        return 409;
    case ErrorCode::EmptyCorpus:
    case ErrorCode::DuplicateId:
    case ErrorCode::MissingField:
    case ErrorCode::MalformedUpload:
    case ErrorCode::InvalidArgument:
        return 400;
    case ErrorCode::TooFewPoints:
    case ErrorCode::KExceedsN:
    case ErrorCode::NoEvidence:
    case ErrorCode::EmptyGold:
    case ErrorCode::NoClusters:
        return 422;
    case ErrorCode::ProviderUnavailable:
    case ErrorCode::Timeout:
    case ErrorCode::SchemaViolation:
    case ErrorCode::NoObjectFound:
    case ErrorCode::DimensionMismatch:
    case ErrorCode::EmbeddingsMissing:
        return 502;
    default:
        return 500;
    }
}

namespace {

void send_json(httplib::Response& res, const json& body, int status = 200)
{
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

void send_error(httplib::Response& res, int status, std::string_view code, std::string_view detail)
{
    send_json(res, {{"error", code}, {"detail", detail}}, status);
}

json body_json(const httplib::Request& req)
{
    if (req.body.empty()) {
        return json::object();
    }
    try {
        return json::parse(req.body);
    } catch (const json::parse_error& e) {
        throw Error(ErrorCode::InvalidArgument, std::string("request body is not JSON: ") + e.what());
    }
}

int parse_int(const std::string& s, std::string_view what)
{
    int v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw Error(ErrorCode::InvalidArgument, std::string(what) + " '" + s + "' is not an integer");
    }
    return v;
}

std::uint64_t parse_seq(const std::string& s)
{
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size()) {
        throw Error(ErrorCode::InvalidArgument, "event id '" + s + "' is not a sequence number");
    }
    return v;
}

std::string sse_frame(const SessionEvent& e)
{
    return "id: " + std::to_string(e.seq) + "\nevent: " + std::string(to_string(e.kind)) + "\ndata: " + to_line(e)
        + "\n\n";
}

}  // namespace

struct Server::Impl {
    httplib::Server http;
    std::atomic<bool> stopping{false};
};

Server::Server(std::shared_ptr<SessionManager> sessions)
    : sessions_(std::move(sessions))
    , impl_(std::make_unique<Impl>())
{
    auto& http = impl_->http;
    auto* mgr = sessions_.get();
    auto* stopping = &impl_->stopping;

    // Wraps a handler so library errors become JSON error responses.
    using Handler = std::function<void(const httplib::Request&, httplib::Response&)>;
    const auto guarded = [](Handler h) {
        return [h = std::move(h)](const httplib::Request& req, httplib::Response& res) {
            try {
                h(req, res);
            } catch (const Error& e) {
                send_error(res, http_status(e.code()), to_string(e.code()), e.detail());
            } catch (const json::exception& e) {
                send_error(res, 400, "InvalidArgument", e.what());
            } catch (const std::exception& e) {
                spdlog::error("{} {}: {}", req.method, req.path, e.what());
                send_error(res, 500, "Internal", e.what());
            }
        };
    };
    const auto session_of = [mgr](const httplib::Request& req) { return mgr->get(req.matches[1].str()); };
    const auto agent_of = [](const httplib::Request& req) { return parse_int(req.matches[2].str(), "agent id"); };

    http.Post("/sessions", guarded([mgr](const httplib::Request& req, httplib::Response& res) {
                  auto s = mgr->create(session_config_from_json(body_json(req)));
                  s->start_runner();
                  send_json(res, s->summary_json(), 201);
              }));
    http.Get("/sessions", guarded([mgr](const httplib::Request&, httplib::Response& res) {
                 send_json(res, {{"sessions", mgr->ids()}});
             }));
    http.Get(R"(/sessions/([^/]+))", guarded([session_of](const httplib::Request& req, httplib::Response& res) {
                 send_json(res, session_of(req)->summary_json());
             }));
    http.Post(R"(/sessions/([^/]+)/corpus)",
              guarded([session_of](const httplib::Request& req, httplib::Response& res) {
                  send_json(res, session_of(req)->upload_corpus(req.body));
              }));
    http.Post(R"(/sessions/([^/]+)/map)", guarded([session_of](const httplib::Request& req, httplib::Response& res) {
                  send_json(res, session_of(req)->build_map());
              }));
    http.Get(R"(/sessions/([^/]+)/map)", guarded([session_of](const httplib::Request& req, httplib::Response& res) {
                 send_json(res, {{"points", session_of(req)->layout_export()}});
             }));
    http.Post(R"(/sessions/([^/]+)/start)", guarded([session_of](const httplib::Request& req, httplib::Response& res) {
                  send_json(res, session_of(req)->start());
              }));
    http.Post(R"(/sessions/([^/]+)/pause)", guarded([session_of](const httplib::Request& req, httplib::Response& res) {
                  send_json(res, session_of(req)->pause());
              }));
    http.Get(R"(/sessions/([^/]+)/agents)", guarded([session_of](const httplib::Request& req, httplib::Response& res) {
                 send_json(res, {{"agents", session_of(req)->agents_json()}});
             }));
    http.Post(R"(/sessions/([^/]+)/agents/([^/]+)/start)",
              guarded([session_of, agent_of](const httplib::Request& req, httplib::Response& res) {
                  send_json(res, session_of(req)->start(agent_of(req)));
              }));
    http.Post(R"(/sessions/([^/]+)/agents/([^/]+)/pause)",
              guarded([session_of, agent_of](const httplib::Request& req, httplib::Response& res) {
                  send_json(res, session_of(req)->pause(agent_of(req)));
              }));
    http.Post(R"(/sessions/([^/]+)/agents/([^/]+)/interventions)",
              guarded([session_of, agent_of](const httplib::Request& req, httplib::Response& res) {
                  send_json(res, session_of(req)->post_intervention(agent_of(req), body_json(req)), 202);
              }));
    http.Post(R"(/sessions/([^/]+)/synthesize)",
              guarded([session_of](const httplib::Request& req, httplib::Response& res) {
                  send_json(res, session_of(req)->synthesize());
              }));
    http.Get(R"(/sessions/([^/]+)/report)", guarded([session_of](const httplib::Request& req, httplib::Response& res) {
                 const auto s = session_of(req);
                 const auto format = req.has_param("format") ? req.get_param_value("format") : "json";
                 if (format == "markdown" || format == "md") {
                     res.set_content(s->report_document(ReportFormat::Markdown), "text/markdown");
                 } else if (format == "text") {
                     res.set_content(s->report_document(ReportFormat::PlainText), "text/plain");
                 } else if (format == "json") {
                     send_json(res, s->report_json());
                 } else {
                     throw Error(ErrorCode::InvalidArgument, "unknown report format " + format);
                 }
             }));
    http.Get(R"(/sessions/([^/]+)/provenance)",
             guarded([session_of](const httplib::Request& req, httplib::Response& res) {
                 send_json(res, session_of(req)->provenance());
             }));
    http.Get(R"(/sessions/([^/]+)/export\.csv)",
             guarded([session_of](const httplib::Request& req, httplib::Response& res) {
                 res.set_content(session_of(req)->export_csv(), "text/csv");
             }));
    http.Get(R"(/sessions/([^/]+)/events\.jsonl)",
             guarded([session_of](const httplib::Request& req, httplib::Response& res) {
                 res.set_content(session_of(req)->event_log_text(), "application/x-ndjson");
             }));
    http.Get(R"(/sessions/([^/]+)/events)",
             guarded([session_of, stopping](const httplib::Request& req, httplib::Response& res) {
                 const auto s = session_of(req);
                 std::uint64_t from = 0;
                 if (req.has_header("Last-Event-ID")) {
                     from = parse_seq(req.get_header_value("Last-Event-ID"));
                 } else if (req.has_param("from")) {
                     from = parse_seq(req.get_param_value("from"));
                 }
                 // follow=0 sends the backlog and closes.
                 const bool follow = !req.has_param("follow") || req.get_param_value("follow") != "0";
                 res.set_header("Cache-Control", "no-cache");
                 res.set_chunked_content_provider(
                     "text/event-stream",
                     [s, from, follow, stopping](std::size_t, httplib::DataSink& sink) mutable {
                         for (const auto& e : s->events_since(from)) {
                             const auto frame = sse_frame(e);
                             if (!sink.write(frame.data(), frame.size())) {
                                 return false;
                             }
                             from = e.seq;
                         }
                         if (!follow) {
                             sink.done();
                             return true;
                         }
                         for (int waited = 0; !stopping->load(); ++waited) {
                             if (s->wait_for_events(from, std::chrono::milliseconds(250))) {
                                 return true;
                             }
                             if (!sink.is_writable()) {
                                 return false;
                             }
                             if (waited % 60 == 59) {
                                 constexpr std::string_view ping = ": keepalive\n\n";
                                 if (!sink.write(ping.data(), ping.size())) {
                                     return false;
                                 }
                             }
                         }
                         sink.done();
                         return true;
                     });
             }));
}

Server::~Server()
{
    stop();
}

int Server::bind(const std::string& host, int port)
{
    if (port == 0) {
        return impl_->http.bind_to_any_port(host);
    }
    return impl_->http.bind_to_port(host, port) ? port : -1;
}

bool Server::listen()
{
    return impl_->http.listen_after_bind();
}

void Server::stop()
{
    impl_->stopping = true;
    impl_->http.stop();
}

}  // namespace sift
