#include "erd/http.hpp"

#include <thread>

#include "erd/errors.hpp"
#include "httplib.h"

namespace erd {

using nlohmann::json;

int http_status(ProtocolErrorKind kind) noexcept {
    switch (kind) {
        case ProtocolErrorKind::not_found: return 404;
        case ProtocolErrorKind::conflict: return 409;
        case ProtocolErrorKind::gone: return 410;
        case ProtocolErrorKind::validation: return 422;
        case ProtocolErrorKind::transport: return 502;
    }
    return 500;
}

namespace {

ProtocolErrorKind kind_from_string(std::string_view s) {
    if (s == "not_found") return ProtocolErrorKind::not_found;
    if (s == "conflict") return ProtocolErrorKind::conflict;
    if (s == "gone") return ProtocolErrorKind::gone;
    if (s == "validation") return ProtocolErrorKind::validation;
    return ProtocolErrorKind::transport;
}

json error_body(ProtocolErrorKind kind, const std::string& message,
                const std::vector<std::string>& offenders = {}) {
    return {{"protocol_version", kProtocolVersion},
            {"error", to_string(kind)},
            {"message", message},
            {"offenders", offenders}};
}

void reply(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

// Runs a handler, mapping library errors onto protocol error responses.
template <typename F>
void guarded(httplib::Response& res, F&& handler) {
    try {
        handler();
    } catch (const ProtocolError& e) {
        reply(res, http_status(e.kind()), error_body(e.kind(), e.what(), e.offenders()));
    } catch (const json::exception& e) {
        reply(res, 400, error_body(ProtocolErrorKind::validation, std::string("malformed body: ") + e.what()));
    } catch (const Error& e) {
        reply(res, 422, error_body(ProtocolErrorKind::validation, e.what()));
    }
}

}  // namespace

struct HttpServer::Impl {
    MockServer& server;
    httplib::Server http;
    std::thread thread;
    std::function<void(const std::string&)> results_hook;

    explicit Impl(MockServer& s) : server(s) {
        http.Post("/runs", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto info = server.create_run(json::parse(req.body).get<RunConfig>());
                reply(res, 201, info);
            });
        });
        http.Get(R"(/runs/([^/]+)/round)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] { reply(res, 200, server.next_round(req.matches[1])); });
        });
        http.Post(R"(/runs/([^/]+)/decisions)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                const auto submission = json::parse(req.body).get<DecisionSubmission>();
                reply(res, 200, server.submit_decisions(req.matches[1], submission));
            });
        });
        http.Get(R"(/runs/([^/]+)/results)", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&] {
                json body = server.results(req.matches[1]);
                body["protocol_version"] = kProtocolVersion;
                reply(res, 200, body);
                if (results_hook) results_hook(req.matches[1]);
            });
        });
    }
};

HttpServer::HttpServer(MockServer& server) : impl_(std::make_unique<Impl>(server)) {}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind(const std::string& host, int port) {
    if (port == 0) {
        const int bound = impl_->http.bind_to_any_port(host);
        if (bound < 0) throw IoError("cannot bind " + host);
        return bound;
    }
    if (!impl_->http.bind_to_port(host, port)) {
        throw IoError("cannot bind " + host + ":" + std::to_string(port));
    }
    return port;
}

void HttpServer::start() {
    impl_->thread = std::thread([this] { impl_->http.listen_after_bind(); });
    impl_->http.wait_until_ready();
}

void HttpServer::on_results(std::function<void(const std::string&)> hook) {
    impl_->results_hook = std::move(hook);
}

void HttpServer::serve_forever() { impl_->http.listen_after_bind(); }

void HttpServer::stop() {
    if (!impl_) return;
    impl_->http.stop();
    if (impl_->thread.joinable()) impl_->thread.join();
}

// --- client transport ---------------------------------------------------------------

struct HttpTransport::Impl {
    httplib::Client client;
    RetryPolicy retry;

    Impl(const std::string& endpoint, RetryPolicy r) : client(endpoint), retry(r) {
        client.set_connection_timeout(retry.timeout);
        client.set_read_timeout(retry.timeout);
        client.set_write_timeout(retry.timeout);
    }

    template <typename Send>
    json call(const std::string& what, Send&& send) {
        auto backoff = retry.initial_backoff;
        std::string last_error;
        for (int attempt = 1; attempt <= retry.max_attempts; ++attempt) {
            auto res = send();
            if (res) {
                json body;
                try {
                    body = json::parse(res->body);
                } catch (const json::exception&) {
                    throw ProtocolError(ProtocolErrorKind::transport,
                                        what + ": non-JSON response (HTTP " + std::to_string(res->status) + ")");
                }
                if (res->status >= 400) {
                    throw ProtocolError(kind_from_string(body.value("error", std::string())),
                                        body.value("message", std::string("HTTP ") + std::to_string(res->status)),
                                        body.value("offenders", std::vector<std::string>{}));
                }
                return body;
            }
            last_error = httplib::to_string(res.error());
            if (attempt < retry.max_attempts) {
                std::this_thread::sleep_for(backoff);
                backoff *= 2;
            }
        }
        throw ProtocolError(ProtocolErrorKind::transport,
                            what + " failed after " + std::to_string(retry.max_attempts) +
                                " attempts: " + last_error);
    }
};

HttpTransport::HttpTransport(const std::string& endpoint, RetryPolicy retry)
    : impl_(std::make_unique<Impl>(endpoint, retry)) {}

HttpTransport::~HttpTransport() = default;

RunInfo HttpTransport::create_run(const RunConfig& config) {
    const auto body = json(config).dump();
    return impl_->call("POST /runs", [&] {
        return impl_->client.Post("/runs", body, "application/json");
    }).get<RunInfo>();
}

RoundPayload HttpTransport::next_round(const std::string& run_id) {
    const auto path = "/runs/" + run_id + "/round";
    return impl_->call("GET " + path, [&] { return impl_->client.Get(path); }).get<RoundPayload>();
}

SubmitAck HttpTransport::submit(const std::string& run_id, const DecisionSubmission& submission) {
    const auto path = "/runs/" + run_id + "/decisions";
    const auto body = json(submission).dump();
    return impl_->call("POST " + path, [&] {
        return impl_->client.Post(path, body, "application/json");
    }).get<SubmitAck>();
}

MetricsReport HttpTransport::results(const std::string& run_id) {
    const auto path = "/runs/" + run_id + "/results";
    return impl_->call("GET " + path, [&] { return impl_->client.Get(path); }).get<MetricsReport>();
}

}  // namespace erd
