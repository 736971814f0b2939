#pragma once
// HTTP/JSON binding of the mock server:
//   POST /runs                  RunConfig          -> 201 RunInfo
//   GET  /runs/{id}/round                          -> 200 RoundPayload
//   POST /runs/{id}/decisions   DecisionSubmission -> 200 SubmitAck
//   GET  /runs/{id}/results                        -> 200 MetricsReport
// Errors carry {"protocol_version", "error", "message", "offenders"} with
// 404 not_found, 409 conflict, 410 gone, 422 validation.

#include <chrono>
#include <functional>
#include <memory>
#include <string>

#include "erd/erdserver.hpp"
#include "erd/errors.hpp"

namespace erd {

int http_status(ProtocolErrorKind kind) noexcept;

class HttpServer {
public:
    explicit HttpServer(MockServer& server);
    ~HttpServer();
    HttpServer(const HttpServer&) = delete;
    HttpServer& operator=(const HttpServer&) = delete;

    // Binds host:port (port 0 picks a free one) and returns the bound port.
    int bind(const std::string& host, int port);
    // Serves on a background thread until stop().
    void start();
    // Serves on the calling thread until stop().
    void serve_forever();
    void stop();

    // Called with the run id after each successful GET /runs/{id}/results.
    void on_results(std::function<void(const std::string&)> hook);

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

struct RetryPolicy {
    int max_attempts = 5;
    std::chrono::milliseconds initial_backoff{50};
    std::chrono::milliseconds timeout{10000};
};

// Transport over HTTP. Connection failures are retried with doubling backoff;
// server-side protocol errors are rethrown verbatim as ProtocolError.
class HttpTransport final : public Transport {
public:
    explicit HttpTransport(const std::string& endpoint, RetryPolicy retry = {});
    ~HttpTransport() override;

    RunInfo create_run(const RunConfig& config) override;
    RoundPayload next_round(const std::string& run_id) override;
    SubmitAck submit(const std::string& run_id, const DecisionSubmission& submission) override;
    MetricsReport results(const std::string& run_id) override;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace erd
