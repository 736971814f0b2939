#include "erd/erdserver.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

#include "erd/errors.hpp"

namespace erd {

using nlohmann::json;

const char* to_string(ProtocolErrorKind kind) noexcept {
    switch (kind) {
        case ProtocolErrorKind::not_found: return "not_found";
        case ProtocolErrorKind::conflict: return "conflict";
        case ProtocolErrorKind::gone: return "gone";
        case ProtocolErrorKind::validation: return "validation";
        case ProtocolErrorKind::transport: return "transport";
    }
    return "transport";
}

// --- wire format -------------------------------------------------------------------

namespace {

void check_version(const json& j) {
    const auto v = j.value("protocol_version", -1);
    if (v != kProtocolVersion) {
        throw ProtocolError(ProtocolErrorKind::validation,
                            "unsupported protocol_version " + std::to_string(v) + " (expected " +
                                std::to_string(kProtocolVersion) + ")");
    }
}

}  // namespace

void to_json(json& j, const RunConfig& v) {
    j = json{{"protocol_version", kProtocolVersion}, {"corpus", v.corpus}};
    if (!v.run_id.empty()) j["run_id"] = v.run_id;
    if (v.metrics) j["metrics"] = *v.metrics;
}

void from_json(const json& j, RunConfig& v) {
    check_version(j);
    v.corpus = j.at("corpus").get<std::string>();
    v.run_id = j.value("run_id", std::string());
    if (j.contains("metrics")) v.metrics = j.at("metrics").get<MetricsConfig>();
}

void to_json(json& j, const RunInfo& v) {
    j = json{{"protocol_version", kProtocolVersion},
             {"run_id", v.run_id},
             {"corpus", v.corpus},
             {"round_limit", v.round_limit},
             {"n_users", v.n_users}};
}

void from_json(const json& j, RunInfo& v) {
    check_version(j);
    v.run_id = j.at("run_id").get<std::string>();
    v.corpus = j.at("corpus").get<std::string>();
    v.round_limit = j.at("round_limit").get<int>();
    v.n_users = j.at("n_users").get<std::size_t>();
}

void to_json(json& j, const RoundPayload& v) {
    json items = json::array();
    for (const auto& it : v.items) {
        items.push_back({{"user_id", it.user_id}, {"post", it.post}, {"index", it.index}, {"last", it.last}});
    }
    j = json{{"protocol_version", kProtocolVersion}, {"round", v.round}, {"items", std::move(items)}};
}

void from_json(const json& j, RoundPayload& v) {
    check_version(j);
    v.round = j.at("round").get<int>();
    v.items.clear();
    for (const auto& it : j.at("items")) {
        v.items.push_back({it.at("user_id").get<std::string>(), it.at("post").get<std::string>(),
                           it.at("index").get<std::size_t>(), it.value("last", false)});
    }
}

void to_json(json& j, const DecisionSubmission& v) {
    json answers = json::array();
    for (const auto& a : v.answers) {
        answers.push_back({{"user_id", a.user_id}, {"decision", a.decision}, {"score", a.score}});
    }
    j = json{{"protocol_version", kProtocolVersion}, {"round", v.round}, {"answers", std::move(answers)}};
}

void from_json(const json& j, DecisionSubmission& v) {
    check_version(j);
    v.round = j.at("round").get<int>();
    v.answers.clear();
    for (const auto& a : j.at("answers")) {
        v.answers.push_back({a.at("user_id").get<std::string>(), a.at("decision").get<int>(),
                             a.at("score").get<double>()});
    }
}

void to_json(json& j, const SubmitAck& v) {
    j = json{{"protocol_version", kProtocolVersion}, {"round", v.round},
             {"accepted", v.accepted},               {"flagged", v.flagged},
             {"exhausted", v.exhausted},             {"remaining", v.remaining},
             {"finished", v.finished}};
}

void from_json(const json& j, SubmitAck& v) {
    check_version(j);
    v.round = j.at("round").get<int>();
    v.accepted = j.at("accepted").get<std::size_t>();
    v.flagged = j.at("flagged").get<std::size_t>();
    v.exhausted = j.at("exhausted").get<std::size_t>();
    v.remaining = j.at("remaining").get<std::size_t>();
    v.finished = j.at("finished").get<bool>();
}

// --- server ------------------------------------------------------------------------

struct MockServer::Run {
    std::mutex mutex;
    RunInfo info;
    std::shared_ptr<const Corpus> corpus;
    MetricsConfig metrics;
    RunState state;
    std::unordered_map<std::string_view, std::size_t> index;  // user_id -> corpus position
    std::vector<std::size_t> pending;                          // users in the issued payload
};

MockServer::MockServer(MetricsConfig metrics) : metrics_(std::move(metrics)) { metrics_.validate(); }

MockServer::~MockServer() = default;

void MockServer::add_corpus(Corpus corpus) {
    corpus.validate();
    auto name = corpus.name;
    std::lock_guard lock(mutex_);
    corpora_[name] = std::make_shared<const Corpus>(std::move(corpus));
}

std::vector<std::string> MockServer::corpora() const {
    std::lock_guard lock(mutex_);
    std::vector<std::string> names;
    for (const auto& [name, _] : corpora_) names.push_back(name);
    return names;
}

RunInfo MockServer::create_run(const RunConfig& config) {
    std::lock_guard lock(mutex_);
    const auto it = corpora_.find(config.corpus);
    if (it == corpora_.end()) {
        throw ProtocolError(ProtocolErrorKind::not_found, "unknown corpus '" + config.corpus + "'");
    }
    auto run = std::make_unique<Run>();
    run->corpus = it->second;
    run->metrics = config.metrics.value_or(metrics_);
    run->metrics.validate();
    if (config.run_id.empty()) {
        char id[32];
        do {
            std::snprintf(id, sizeof id, "run-%04zu", next_id_++);
        } while (runs_.count(id));
        run->info.run_id = id;
    } else {
        if (runs_.count(config.run_id)) {
            throw ProtocolError(ProtocolErrorKind::conflict, "run '" + config.run_id + "' already exists");
        }
        run->info.run_id = config.run_id;
    }
    run->info.corpus = config.corpus;
    run->info.round_limit = run->corpus->max_posts();
    run->info.n_users = run->corpus->users.size();
    run->state.status.assign(run->info.n_users, RunUserStatus::active);
    for (std::size_t i = 0; i < run->corpus->users.size(); ++i) {
        run->index.emplace(run->corpus->users[i].user_id, i);
    }
    auto info = run->info;
    runs_.emplace(info.run_id, std::move(run));
    return info;
}

MockServer::Run& MockServer::find_run(const std::string& run_id) {
    std::lock_guard lock(mutex_);
    const auto it = runs_.find(run_id);
    if (it == runs_.end()) throw ProtocolError(ProtocolErrorKind::not_found, "unknown run '" + run_id + "'");
    return *it->second;
}

RoundPayload MockServer::next_round(const std::string& run_id) {
    auto& run = find_run(run_id);
    std::lock_guard lock(run.mutex);
    auto& s = run.state;
    if (s.finished) throw ProtocolError(ProtocolErrorKind::gone, "run '" + run_id + "' has finished");
    if (s.awaiting_decisions) {
        throw ProtocolError(ProtocolErrorKind::conflict,
                            "decisions pending for round " + std::to_string(s.round));
    }
    RoundPayload payload;
    payload.round = s.round;
    run.pending.clear();
    const auto r = static_cast<std::size_t>(s.round);
    for (std::size_t i = 0; i < run.corpus->users.size(); ++i) {
        const auto& user = run.corpus->users[i];
        if (s.status[i] != RunUserStatus::active || user.posts.size() < r) continue;
        payload.items.push_back({user.user_id, user.posts[r - 1].text, r - 1, user.posts.size() == r});
        run.pending.push_back(i);
    }
    s.awaiting_decisions = true;
    return payload;
}

SubmitAck MockServer::submit_decisions(const std::string& run_id, const DecisionSubmission& submission) {
    auto& run = find_run(run_id);
    std::lock_guard lock(run.mutex);
    auto& s = run.state;
    if (submission.round < s.round || (s.finished && submission.round == s.round)) {
        throw ProtocolError(ProtocolErrorKind::conflict,
                            "duplicate submission for round " + std::to_string(submission.round));
    }
    if (s.finished) throw ProtocolError(ProtocolErrorKind::gone, "run '" + run_id + "' has finished");
    if (!s.awaiting_decisions || submission.round != s.round) {
        throw ProtocolError(ProtocolErrorKind::conflict,
                            "round " + std::to_string(submission.round) + " has not been issued");
    }

    // Validate everything before touching state.
    std::set<std::size_t> expected(run.pending.begin(), run.pending.end());
    std::set<std::size_t> seen;
    std::vector<std::string> offenders;
    std::vector<std::pair<std::size_t, int>> answers;
    for (const auto& a : submission.answers) {
        const auto it = run.index.find(a.user_id);
        if (it == run.index.end() || !expected.count(it->second) || !seen.insert(it->second).second ||
            (a.decision != 0 && a.decision != 1) || !std::isfinite(a.score) || a.score < 0 || a.score > 1) {
            offenders.push_back(a.user_id);
            continue;
        }
        answers.emplace_back(it->second, a.decision);
    }
    for (const auto u : expected) {
        if (!seen.count(u)) offenders.push_back(run.corpus->users[u].user_id);
    }
    if (!offenders.empty()) {
        std::string msg = "submission for round " + std::to_string(s.round) + " rejected; offending users:";
        for (const auto& o : offenders) msg += " " + o;
        throw ProtocolError(ProtocolErrorKind::validation, msg, offenders);
    }

    SubmitAck ack;
    ack.round = s.round;
    ack.accepted = answers.size();
    std::sort(answers.begin(), answers.end());
    for (const auto& [u, decision] : answers) {
        const auto& user = run.corpus->users[u];
        if (decision == 1) {
            s.status[u] = RunUserStatus::flagged;
            s.decisions.push_back({user.user_id, Label::positive, s.round});
            ++ack.flagged;
        } else if (user.total_posts() == s.round) {
            s.status[u] = RunUserStatus::exhausted;
            s.decisions.push_back({user.user_id, Label::negative, user.total_posts()});
            ++ack.exhausted;
        }
    }
    s.awaiting_decisions = false;
    run.pending.clear();
    ack.remaining = static_cast<std::size_t>(
        std::count(s.status.begin(), s.status.end(), RunUserStatus::active));
    if (ack.remaining == 0) {
        s.finished = true;
    } else {
        ++s.round;
    }
    ack.finished = s.finished;
    return ack;
}

MetricsReport MockServer::results(const std::string& run_id) {
    auto& run = find_run(run_id);
    std::lock_guard lock(run.mutex);
    if (!run.state.finished) {
        const auto remaining = std::count(run.state.status.begin(), run.state.status.end(), RunUserStatus::active);
        throw ProtocolError(ProtocolErrorKind::conflict,
                            "run '" + run_id + "' incomplete: " + std::to_string(remaining) +
                                " users still active");
    }
    return compute_report(run.state.decisions, *run.corpus, run.metrics);
}

RunState MockServer::snapshot(const std::string& run_id) {
    auto& run = find_run(run_id);
    std::lock_guard lock(run.mutex);
    return run.state;
}

// --- policy -------------------------------------------------------------------------

const char* to_string(WindowMode mode) noexcept {
    return mode == WindowMode::per_round ? "per_round" : "checkpoint";
}

WindowMode window_mode_from_string(std::string_view text) {
    if (text == "per_round") return WindowMode::per_round;
    if (text == "checkpoint") return WindowMode::checkpoint;
    throw ValidationError("unknown window mode '" + std::string(text) + "'");
}

void PolicyConfig::validate() const {
    if (!(threshold > 0 && threshold < 1)) throw ValidationError("threshold must be in (0,1)");
    if (min_delay < 1) throw ValidationError("min_delay must be >= 1");
    if (window_size < 0) throw ValidationError("window_size must be >= 0");
}

void to_json(json& j, const PolicyConfig& c) {
    j = json{{"threshold", c.threshold},
             {"min_delay", c.min_delay},
             {"window_size", c.window_size},
             {"window_mode", to_string(c.window_mode)}};
}

void from_json(const json& j, PolicyConfig& c) {
    const PolicyConfig d;
    c.threshold = j.value("threshold", d.threshold);
    c.min_delay = j.value("min_delay", d.min_delay);
    c.window_size = j.value("window_size", d.window_size);
    c.window_mode = window_mode_from_string(j.value("window_mode", std::string(to_string(d.window_mode))));
}

Action policy_decide(double probability, int posts_read, const PolicyConfig& policy) {
    return probability > policy.threshold && posts_read >= policy.min_delay ? Action::alarm
                                                                            : Action::proceed;
}

// --- client -------------------------------------------------------------------------

ClientResult client_run(Transport& transport, const std::string& corpus, const ModelParams& params,
                        const PolicyConfig& policy) {
    policy.validate();
    const int M = policy.window_size > 0 ? policy.window_size : params.features.window_size;
    if (policy.window_mode == WindowMode::checkpoint && M != params.features.window_size) {
        throw ValidationError("checkpoint window mode requires the model's window size");
    }
    ClientResult result;
    result.run = transport.create_run({corpus, {}, {}});
    std::unordered_map<std::string, std::deque<std::string>> windows;

    for (;;) {
        const auto payload = transport.next_round(result.run.run_id);
        DecisionSubmission submission;
        submission.round = payload.round;
        for (const auto& item : payload.items) {
            auto& window = windows[item.user_id];
            window.push_back(item.post);
            while (window.size() > static_cast<std::size_t>(M)) window.pop_front();

            int k = payload.round;
            bool evaluate = true;
            if (policy.window_mode == WindowMode::checkpoint) {
                evaluate = payload.round % M == 0 || item.last;
                k = checkpoint_at_or_after(payload.round, M);
            }
            double score = 0.0;
            const char* action = "hold";
            int decision = 0;
            if (evaluate) {
                const std::vector<std::string_view> posts(window.begin(), window.end());
                const TimedWindow tw{item.user_id, k, join_posts(posts), 0, 0};
                score = predict_proba(params, featurize(params.features, tw, params.mode)).probability;
                decision = policy_decide(score, k, policy) == Action::alarm ? 1 : 0;
                action = decision ? "alarm" : "continue";
            }
            submission.answers.push_back({item.user_id, decision, score});
            result.log.push_back({payload.round, item.user_id, score, action});
            if (decision == 1 || item.last) windows.erase(item.user_id);
        }
        if (transport.submit(result.run.run_id, submission).finished) break;
    }
    result.report = transport.results(result.run.run_id);
    return result;
}

std::string decision_log_csv(const std::vector<ClientLogEntry>& log) {
    std::string out = "round,user_id,score,action\n";
    char buf[64];
    for (const auto& e : log) {
        std::snprintf(buf, sizeof buf, "%.9f", e.score);
        out += std::to_string(e.round) + "," + e.user_id + "," + buf + "," + e.action + "\n";
    }
    return out;
}

}  // namespace erd
