#pragma once
// Round-based mock evaluation server, the threshold/minDelay decision policy
// and the client loop that drives a model through a run.
//
// A run replays a corpus one post per active user per round. Every round must
// be answered for every user in its payload before the next one is released.
// A positive answer retires the user as flagged (k = round); a user whose
// history ends in this round and is answered negatively retires as exhausted
// (k = total posts). The run finishes when no active user remains.

#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "erd/corpus.hpp"
#include "erd/metrics.hpp"
#include "erd/model.hpp"
#include "json.hpp"

namespace erd {

inline constexpr int kProtocolVersion = 1;

struct RunConfig {
    std::string corpus;
    std::string run_id;                    // empty: server assigns one
    std::optional<MetricsConfig> metrics;  // empty: server default
};

struct RunInfo {
    std::string run_id;
    std::string corpus;
    int round_limit = 0;  // = max posts in the corpus
    std::size_t n_users = 0;
};

struct RoundItem {
    std::string user_id;
    std::string post;
    std::size_t index = 0;
    bool last = false;  // this is the user's final post
};

struct RoundPayload {
    int round = 0;
    std::vector<RoundItem> items;
};

struct Answer {
    std::string user_id;
    int decision = 0;
    double score = 0.0;
};

struct DecisionSubmission {
    int round = 0;
    std::vector<Answer> answers;
};

struct SubmitAck {
    int round = 0;
    std::size_t accepted = 0;
    std::size_t flagged = 0;
    std::size_t exhausted = 0;
    std::size_t remaining = 0;  // active users after this round
    bool finished = false;
};

enum class RunUserStatus : std::uint8_t { active, flagged, exhausted };

struct RunState {
    int round = 1;
    std::vector<RunUserStatus> status;
    std::vector<Decision> decisions;  // recorded so far, in retirement order
    bool awaiting_decisions = false;
    bool finished = false;
};

void to_json(nlohmann::json& j, const RunConfig& v);
void from_json(const nlohmann::json& j, RunConfig& v);
void to_json(nlohmann::json& j, const RunInfo& v);
void from_json(const nlohmann::json& j, RunInfo& v);
void to_json(nlohmann::json& j, const RoundPayload& v);
void from_json(const nlohmann::json& j, RoundPayload& v);
void to_json(nlohmann::json& j, const DecisionSubmission& v);
void from_json(const nlohmann::json& j, DecisionSubmission& v);
void to_json(nlohmann::json& j, const SubmitAck& v);
void from_json(const nlohmann::json& j, SubmitAck& v);

// Thread-safe; each run is serialized independently.
class MockServer {
public:
    explicit MockServer(MetricsConfig metrics = {});
    ~MockServer();
    MockServer(const MockServer&) = delete;
    MockServer& operator=(const MockServer&) = delete;

    // Registers a corpus under corpus.name, replacing any previous one.
    void add_corpus(Corpus corpus);
    std::vector<std::string> corpora() const;

    RunInfo create_run(const RunConfig& config);
    RoundPayload next_round(const std::string& run_id);
    SubmitAck submit_decisions(const std::string& run_id, const DecisionSubmission& submission);
    MetricsReport results(const std::string& run_id);
    RunState snapshot(const std::string& run_id);

private:
    struct Run;
    Run& find_run(const std::string& run_id);

    MetricsConfig metrics_;
    mutable std::mutex mutex_;
    std::map<std::string, std::shared_ptr<const Corpus>> corpora_;
    std::map<std::string, std::unique_ptr<Run>> runs_;
    std::size_t next_id_ = 1;
};

// --- decision policy -----------------------------------------------------------

// per_round: evaluate every round on the last M posts with k = round.
// checkpoint: evaluate only at rounds that are multiples of M, or at a user's
// final post, with k rounded up to the checkpoint; mirrors offline validation.
enum class WindowMode : std::uint8_t { per_round, checkpoint };

const char* to_string(WindowMode mode) noexcept;
WindowMode window_mode_from_string(std::string_view text);

struct PolicyConfig {
    double threshold = 0.7;
    int min_delay = 5;
    int window_size = 0;  // 0: the checkpoint's M
    WindowMode window_mode = WindowMode::per_round;

    void validate() const;
};

void to_json(nlohmann::json& j, const PolicyConfig& c);
void from_json(const nlohmann::json& j, PolicyConfig& c);

enum class Action : std::uint8_t { alarm, proceed };

// alarm iff p > threshold and k >= min_delay
Action policy_decide(double probability, int posts_read, const PolicyConfig& policy);

// --- client ----------------------------------------------------------------------

class Transport {
public:
    virtual ~Transport() = default;
    virtual RunInfo create_run(const RunConfig& config) = 0;
    virtual RoundPayload next_round(const std::string& run_id) = 0;
    virtual SubmitAck submit(const std::string& run_id, const DecisionSubmission& submission) = 0;
    virtual MetricsReport results(const std::string& run_id) = 0;
};

class InProcessTransport final : public Transport {
public:
    explicit InProcessTransport(MockServer& server) : server_(server) {}
    RunInfo create_run(const RunConfig& config) override { return server_.create_run(config); }
    RoundPayload next_round(const std::string& id) override { return server_.next_round(id); }
    SubmitAck submit(const std::string& id, const DecisionSubmission& s) override {
        return server_.submit_decisions(id, s);
    }
    MetricsReport results(const std::string& id) override { return server_.results(id); }

private:
    MockServer& server_;
};

struct ClientLogEntry {
    int round = 0;
    std::string user_id;
    double score = 0.0;
    std::string action;  // "alarm", "continue" or "hold" (not evaluated this round)
};

struct ClientResult {
    RunInfo run;
    MetricsReport report;
    std::vector<ClientLogEntry> log;
};

ClientResult client_run(Transport& transport, const std::string& corpus, const ModelParams& params,
                        const PolicyConfig& policy);

std::string decision_log_csv(const std::vector<ClientLogEntry>& log);

}  // namespace erd
