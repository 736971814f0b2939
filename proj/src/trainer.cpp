#include "erd/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "erd/errors.hpp"
#include "erd/report.hpp"
#include "rng.hpp"

namespace erd {

using nlohmann::json;

const char* to_string(LossMode mode) noexcept {
    return mode == LossMode::constant_paper ? "constant_paper" : "weighted_ce";
}

LossMode loss_mode_from_string(std::string_view text) {
    if (text == "constant_paper") return LossMode::constant_paper;
    if (text == "weighted_ce") return LossMode::weighted_ce;
    throw ValidationError("unknown loss mode '" + std::string(text) + "'");
}

TemporalLoss temporal_loss(std::span<const double> pred_probs, std::span<const Label> pred_labels,
                           std::span<const int> pred_times, std::span<const Label> real_labels,
                           std::span<const int> real_times, int theta, LossMode mode) {
    const auto n = pred_probs.size();
    if (n == 0) throw ContractViolation("temporal_loss: empty batch");
    if (pred_labels.size() != n || pred_times.size() != n || real_labels.size() != n ||
        real_times.size() != n) {
        throw ContractViolation("temporal_loss: input lengths differ");
    }
    TemporalLoss out;
    out.per_sample.resize(n);
    out.logit_grad.resize(n);
    out.delayed.resize(n);
    const double inv_n = 1.0 / static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const bool true_positive = pred_labels[i] == Label::positive && pred_labels[i] == real_labels[i];
        const bool late = real_times[i] < pred_times[i] || theta < pred_times[i];
        out.delayed[i] = true_positive && late;
        const double p = pred_probs[i];
        if (!out.delayed[i]) {
            out.per_sample[i] = cross_entropy(p, real_labels[i]);
            out.logit_grad[i] = inv_n * cross_entropy_logit_grad(p, real_labels[i]);
        } else if (mode == LossMode::constant_paper) {
            out.per_sample[i] = 1.0;
            out.logit_grad[i] = 0.0;
        } else {
            const double weight = latency_cost(pred_times[i], theta);
            out.per_sample[i] = weight * cross_entropy(p, Label::positive);
            out.logit_grad[i] = inv_n * weight * cross_entropy_logit_grad(p, Label::positive);
        }
        out.loss += out.per_sample[i];
    }
    out.loss /= static_cast<double>(n);
    return out;
}

std::vector<UserRunState> initial_states(const Corpus& corpus) {
    std::vector<UserRunState> states(corpus.users.size());
    for (std::size_t i = 0; i < states.size(); ++i) states[i].user = i;
    return states;
}

// --- config --------------------------------------------------------------------------

void TrainConfig::validate() const {
    if (epochs < 1) throw ValidationError("epochs must be >= 1");
    if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
    if (window_size < 1) throw ValidationError("window_size must be >= 1");
    if (loss.theta < 1) throw ValidationError("theta must be >= 1");
    if (w_acc < 0 || w_erde < 0 || (w_acc == 0 && w_erde == 0)) {
        throw ValidationError("selection weights must be >= 0 and not both 0");
    }
    if (!(decision_threshold > 0 && decision_threshold < 1)) {
        throw ValidationError("decision_threshold must be in (0,1)");
    }
    if (min_delay < 1) throw ValidationError("min_delay must be >= 1");
    if (!(valid_fraction > 0 && valid_fraction < 1)) {
        throw ValidationError("valid_fraction must be in (0,1)");
    }
    if (!(optimizer.learning_rate > 0)) throw ValidationError("learning_rate must be > 0");
    feature_config().validate();
    metrics.validate();
}

FeatureConfig TrainConfig::feature_config() const {
    auto f = features;
    f.window_size = window_size;
    return f;
}

void to_json(json& j, const TrainConfig& c) {
    j = json{{"epochs", c.epochs},
             {"batch_size", c.batch_size},
             {"window_size", c.window_size},
             {"seed", c.seed},
             {"mode", to_string(c.mode)},
             {"theta", c.loss.theta},
             {"loss_mode", to_string(c.loss.mode)},
             {"optimizer", c.optimizer},
             {"features", c.feature_config()},
             {"metrics", c.metrics},
             {"w_acc", c.w_acc},
             {"w_erde", c.w_erde},
             {"decision_threshold", c.decision_threshold},
             {"min_delay", c.min_delay},
             {"valid_fraction", c.valid_fraction}};
}

void from_json(const json& j, TrainConfig& c) {
    TrainConfig d;
    c.epochs = j.value("epochs", d.epochs);
    c.batch_size = j.value("batch_size", d.batch_size);
    c.window_size = j.value("window_size", d.window_size);
    c.seed = j.value("seed", d.seed);
    c.mode = mode_from_string(j.value("mode", std::string(to_string(d.mode))));
    c.loss.theta = j.value("theta", d.loss.theta);
    c.loss.mode = loss_mode_from_string(j.value("loss_mode", std::string(to_string(d.loss.mode))));
    c.optimizer = j.value("optimizer", d.optimizer);
    c.features = j.value("features", d.features);
    c.metrics = j.value("metrics", d.metrics);
    c.w_acc = j.value("w_acc", d.w_acc);
    c.w_erde = j.value("w_erde", d.w_erde);
    c.decision_threshold = j.value("decision_threshold", d.decision_threshold);
    c.min_delay = j.value("min_delay", d.min_delay);
    c.valid_fraction = j.value("valid_fraction", d.valid_fraction);
}

// --- delay passes ----------------------------------------------------------------------

DelayPassResult run_delay_pass(ModelParams& params, OptimizerState* optimizer,
                               const Corpus& corpus, std::vector<UserRunState>& states, int delay,
                               const TrainConfig& config) {
    if (delay < 1) throw ContractViolation("delay must be >= 1");
    DelayPassResult result;
    result.delay = delay;

    std::vector<std::size_t> active;
    for (std::size_t i = 0; i < states.size(); ++i) {
        if (states[i].status == UserStatus::active) active.push_back(i);
    }
    const auto M = params.features.window_size;
    const auto batch = static_cast<std::size_t>(config.batch_size);
    for (std::size_t start = 0; start < active.size(); start += batch) {
        const auto stop = std::min(active.size(), start + batch);
        const auto n = stop - start;
        std::vector<FeatureVector> features(n);
        std::vector<double> probs(n);
        std::vector<Label> pred_labels(n), real_labels(n);
        std::vector<int> pred_times(n), real_times(n);
        for (std::size_t b = 0; b < n; ++b) {
            auto& state = states[active[start + b]];
            const auto& user = corpus.users[state.user];
            features[b] = featurize(params.features, build_window(user, delay, M), params.mode);
            probs[b] = predict_proba(params, features[b]).probability;
            const bool alarm = probs[b] > config.decision_threshold && delay >= config.min_delay;
            if (alarm) {
                state.status = UserStatus::flagged_positive;
                state.pred_time = delay;
                state.pred_label = Label::positive;
            } else if (delay >= user.total_posts()) {
                state.status = UserStatus::exhausted;
                state.pred_time = user.total_posts();
                state.pred_label = Label::negative;
            }
            pred_labels[b] = alarm ? Label::positive : Label::negative;
            pred_times[b] = state.status == UserStatus::active ? delay : state.pred_time;
            real_labels[b] = user.label;
            real_times[b] = user.total_posts();
        }
        const auto loss = temporal_loss(probs, pred_labels, pred_times, real_labels, real_times,
                                        config.loss.theta, config.loss.mode);
        if (!std::isfinite(loss.loss)) {
            throw NumericalError("non-finite loss at delay " + std::to_string(delay));
        }
        result.loss_sum += loss.loss * static_cast<double>(n);
        result.evaluated += n;

        if (optimizer) {
            std::vector<double> grad(params.size(), 0.0);
            for (std::size_t b = 0; b < n; ++b) {
                if (loss.logit_grad[b] != 0.0) {
                    accumulate_logit_gradient(grad, params, features[b], loss.logit_grad[b]);
                }
            }
            adamw_step(params, *optimizer, grad);
            ++result.updates;
            if (!params.all_finite()) {
                throw NumericalError("non-finite parameters after update at delay " + std::to_string(delay));
            }
        }
    }
    return result;
}

std::vector<Decision> collect_decisions(const Corpus& corpus, std::span<const UserRunState> states) {
    std::vector<Decision> out;
    out.reserve(states.size());
    for (const auto& s : states) {
        if (s.status == UserStatus::active) {
            throw ContractViolation("user '" + corpus.users[s.user].user_id + "' was never retired");
        }
        const auto& user = corpus.users[s.user];
        out.push_back({user.user_id, s.pred_label, std::min(s.pred_time, user.total_posts())});
    }
    return out;
}

std::vector<TimelineEntry> build_timeline(const Corpus& corpus, std::span<const UserRunState> states) {
    std::vector<TimelineEntry> out;
    out.reserve(states.size());
    for (const auto& s : states) {
        const auto& user = corpus.users[s.user];
        TimelineEntry e;
        e.user_id = user.user_id;
        e.pred_time = s.pred_time;
        e.posts_read = std::min(s.pred_time, user.total_posts());
        e.total_posts = user.total_posts();
        e.pred_label = s.pred_label;
        e.label = user.label;
        e.outcome = classify_outcome({user.user_id, s.pred_label, std::max(1, e.posts_read)}, user);
        out.push_back(std::move(e));
    }
    return out;
}

namespace {

// Replays the whole delay scheme once. `optimizer` null means evaluation only.
StageLog replay(ModelParams& params, OptimizerState* optimizer, const Corpus& corpus,
                const TrainConfig& config, std::vector<UserRunState>& states, int epoch) {
    StageLog log;
    double loss_sum = 0.0;
    std::size_t evaluated = 0;
    for (const int k : delay_checkpoints(params.features.window_size, corpus)) {
        DelayPassResult pass;
        try {
            pass = run_delay_pass(params, optimizer, corpus, states, k, config);
        } catch (const NumericalError& e) {
            throw NumericalError("epoch " + std::to_string(epoch) + ", " + e.what());
        }
        if (pass.evaluated == 0) continue;
        log.loss_per_delay.emplace_back(k, pass.loss_sum / static_cast<double>(pass.evaluated));
        loss_sum += pass.loss_sum;
        evaluated += pass.evaluated;
    }
    log.loss = evaluated ? loss_sum / static_cast<double>(evaluated) : 0.0;
    log.timeline = build_timeline(corpus, states);
    return log;
}

}  // namespace

StageLog train_epoch(ModelParams& params, OptimizerState& optimizer, const Corpus& corpus,
                     const TrainConfig& config, int epoch) {
    auto states = initial_states(corpus);
    return replay(params, &optimizer, corpus, config, states, epoch);
}

ValidationResult validate_epoch(const ModelParams& params, const Corpus& corpus,
                                const TrainConfig& config) {
    auto frozen = params;
    auto states = initial_states(corpus);
    ValidationResult r;
    r.stage = replay(frozen, nullptr, corpus, config, states, 0);
    r.decisions = collect_decisions(corpus, states);
    auto metrics = config.metrics;
    metrics.theta = config.loss.theta;
    r.report = compute_report(r.decisions, corpus, metrics);
    r.accuracy = r.report.accuracy;
    r.erde = r.report.erde.at(config.loss.theta);
    return r;
}

std::size_t select_best(std::span<const EpochLog> logs, double w_acc, double w_erde) {
    if (logs.empty()) throw ContractViolation("select_best: no epochs logged");
    std::size_t best = 0;
    double best_score = -INFINITY;
    for (std::size_t i = 0; i < logs.size(); ++i) {
        const double score = w_acc * logs[i].valid_accuracy + w_erde * (1.0 - logs[i].valid_erde);
        if (score > best_score) {
            best_score = score;
            best = i;
        }
    }
    return best;
}

std::pair<Corpus, Corpus> stratified_split(const Corpus& corpus, double valid_fraction,
                                           std::uint64_t seed) {
    detail::Rng rng(seed);
    std::vector<bool> to_valid(corpus.users.size(), false);
    for (const Label label : {Label::positive, Label::negative}) {
        std::vector<std::size_t> idx;
        for (std::size_t i = 0; i < corpus.users.size(); ++i) {
            if (corpus.users[i].label == label) idx.push_back(i);
        }
        rng.shuffle(idx);
        const auto take = static_cast<std::size_t>(std::llround(valid_fraction * static_cast<double>(idx.size())));
        for (std::size_t i = 0; i < take; ++i) to_valid[idx[i]] = true;
    }
    Corpus train{corpus.name + "-train", Split::train, {}};
    Corpus valid{corpus.name + "-valid", Split::trial, {}};
    for (std::size_t i = 0; i < corpus.users.size(); ++i) {
        (to_valid[i] ? valid : train).users.push_back(corpus.users[i]);
    }
    if (train.users.empty() || valid.users.empty()) {
        throw ValidationError("stratified split produced an empty partition");
    }
    return {std::move(train), std::move(valid)};
}

FitResult fit(const Corpus& train, const Corpus& valid, const TrainConfig& config,
              const EpochCallback& on_epoch) {
    config.validate();
    auto params = ModelParams::zeros(config.feature_config(), config.mode, config.seed);
    FitResult result;
    result.optimizer = OptimizerState::for_params(params, config.optimizer);
    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        EpochLog log;
        log.epoch = epoch;
        log.train = train_epoch(params, result.optimizer, train, config, epoch);
        auto v = validate_epoch(params, valid, config);
        log.valid = std::move(v.stage);
        log.valid_accuracy = v.accuracy;
        log.valid_erde = v.erde;
        log.valid_report = std::move(v.report);
        if (on_epoch) on_epoch(log, params, result.optimizer);
        result.logs.push_back(std::move(log));
        result.epoch_params.push_back(params);
    }
    result.best_epoch = select_best(result.logs, config.w_acc, config.w_erde);
    return result;
}

// --- logs and timelines -------------------------------------------------------------------

namespace {

json stage_json(const StageLog& s) {
    json delays = json::array();
    for (const auto& [k, loss] : s.loss_per_delay) delays.push_back({{"delay", k}, {"loss", loss}});
    json timeline = json::array();
    for (const auto& e : s.timeline) {
        timeline.push_back({{"user_id", e.user_id},
                            {"pred_time", e.pred_time},
                            {"posts_read", e.posts_read},
                            {"total_posts", e.total_posts},
                            {"pred_label", to_int(e.pred_label)},
                            {"label", to_int(e.label)},
                            {"outcome", to_string(e.outcome)}});
    }
    return {{"loss", s.loss}, {"loss_per_delay", delays}, {"timeline", timeline}};
}

StageLog stage_from_json(const json& j) {
    StageLog s;
    s.loss = j.at("loss").get<double>();
    for (const auto& d : j.at("loss_per_delay")) {
        s.loss_per_delay.emplace_back(d.at("delay").get<int>(), d.at("loss").get<double>());
    }
    for (const auto& t : j.at("timeline")) {
        TimelineEntry e;
        e.user_id = t.at("user_id").get<std::string>();
        e.pred_time = t.at("pred_time").get<int>();
        e.posts_read = t.at("posts_read").get<int>();
        e.total_posts = t.at("total_posts").get<int>();
        e.pred_label = label_from_int(t.at("pred_label").get<long long>());
        e.label = label_from_int(t.at("label").get<long long>());
        e.outcome = outcome_from_string(t.at("outcome").get<std::string>());
        s.timeline.push_back(std::move(e));
    }
    return s;
}

}  // namespace

void to_json(json& j, const EpochLog& log) {
    j = json{{"epoch", log.epoch},
             {"train", stage_json(log.train)},
             {"valid", stage_json(log.valid)},
             {"valid_accuracy", log.valid_accuracy},
             {"valid_erde", log.valid_erde},
             {"valid_report", log.valid_report}};
}

void from_json(const json& j, EpochLog& log) {
    log.epoch = j.at("epoch").get<int>();
    log.train = stage_from_json(j.at("train"));
    log.valid = stage_from_json(j.at("valid"));
    log.valid_accuracy = j.at("valid_accuracy").get<double>();
    log.valid_erde = j.at("valid_erde").get<double>();
    log.valid_report = j.at("valid_report").get<MetricsReport>();
}

std::string timeline_csv(std::span<const EpochLog> logs) {
    std::string out = "epoch,stage,user_id,pred_time,result,unread_posts,outcome,label,pred_label\n";
    char buf[256];
    for (const auto& log : logs) {
        for (const auto* stage : {&log.train, &log.valid}) {
            const char* name = stage == &log.train ? "train" : "valid";
            for (const auto& e : stage->timeline) {
                std::snprintf(buf, sizeof buf, "%d,%s,%s,%d,%s,%d,%s,%d,%d\n", log.epoch, name,
                              e.user_id.c_str(), e.pred_time, correct(e.outcome) ? "correct" : "wrong",
                              e.total_posts - e.posts_read, to_string(e.outcome), to_int(e.label),
                              to_int(e.pred_label));
                out += buf;
            }
        }
    }
    return out;
}

std::vector<std::filesystem::path> export_timeline(std::span<const EpochLog> logs,
                                                   const std::filesystem::path& dir, int theta) {
    if (logs.empty()) throw ContractViolation("export_timeline: no epoch logs");
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    auto write = [&](const std::filesystem::path& path, const std::string& content) {
        std::ofstream out(path, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + path.string() + "'");
        out << content;
        written.push_back(path);
    };
    write(dir / "timeline.csv", timeline_csv(logs));
    char name[64];
    for (const auto& log : logs) {
        for (const auto* stage : {&log.train, &log.valid}) {
            const char* label = stage == &log.train ? "train" : "valid";
            std::snprintf(name, sizeof name, "timeline_%s_epoch%02d.svg", label, log.epoch);
            write(dir / name, timeline_svg(stage->timeline, theta,
                                           std::string(label) + " epoch " + std::to_string(log.epoch)));
        }
    }
    return written;
}

}  // namespace erd
