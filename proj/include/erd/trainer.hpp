#pragma once
// Temporal fine-tuning: each epoch replays every user stream checkpoint by
// checkpoint (k = M, 2M, ...), retiring users on a positive prediction or when
// their history runs out, and minimizes the delay-aware loss at every delay.
// Validation replays the same scheme without updates and scores the final
// decisions with ERDE.

#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "erd/corpus.hpp"
#include "erd/metrics.hpp"
#include "erd/model.hpp"
#include "json.hpp"

namespace erd {

// constant_paper: a delayed true positive contributes the constant 1 (no gradient).
// weighted_ce: a delayed true positive contributes lc_theta(pred_time) * CE(p, positive).
enum class LossMode : std::uint8_t { constant_paper, weighted_ce };

const char* to_string(LossMode mode) noexcept;
LossMode loss_mode_from_string(std::string_view text);

struct LossConfig {
    int theta = 30;
    LossMode mode = LossMode::constant_paper;
};

struct TemporalLoss {
    double loss = 0.0;
    std::vector<double> per_sample;
    std::vector<double> logit_grad;  // d loss / d logit_i, already divided by n
    std::vector<bool> delayed;       // sample took the delayed-TP branch
};

TemporalLoss temporal_loss(std::span<const double> pred_probs, std::span<const Label> pred_labels,
                           std::span<const int> pred_times, std::span<const Label> real_labels,
                           std::span<const int> real_times, int theta, LossMode mode);

enum class UserStatus : std::uint8_t { active, flagged_positive, exhausted };

struct UserRunState {
    std::size_t user = 0;  // index into the corpus
    UserStatus status = UserStatus::active;
    int pred_time = 0;     // meaningful once retired
    Label pred_label = Label::negative;
};

std::vector<UserRunState> initial_states(const Corpus& corpus);

struct TrainConfig {
    int epochs = 10;
    int batch_size = 8;
    int window_size = 10;
    std::uint64_t seed = 7;
    Mode mode = Mode::temporal;
    LossConfig loss;
    AdamWConfig optimizer;
    FeatureConfig features;  // window_size is overwritten by `window_size`
    MetricsConfig metrics;
    double w_acc = 1.0;
    double w_erde = 1.0;
    double decision_threshold = 0.5;  // alarm iff p > threshold (ties are negative)
    int min_delay = 1;
    double valid_fraction = 0.15;

    void validate() const;
    FeatureConfig feature_config() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct DelayPassResult {
    int delay = 0;
    std::size_t evaluated = 0;
    double loss_sum = 0.0;
    std::size_t updates = 0;
};

// Evaluates every active user at checkpoint `delay`. With an optimizer, takes
// one AdamW step per mini-batch of `batch_size` users (corpus order).
DelayPassResult run_delay_pass(ModelParams& params, OptimizerState* optimizer,
                               const Corpus& corpus, std::vector<UserRunState>& states, int delay,
                               const TrainConfig& config);

struct TimelineEntry {
    std::string user_id;
    int pred_time = 0;
    int posts_read = 0;
    int total_posts = 0;
    Label pred_label = Label::negative;
    Label label = Label::negative;
    Outcome outcome = Outcome::TN;
};

struct StageLog {
    std::vector<std::pair<int, double>> loss_per_delay;
    double loss = 0.0;  // mean over every evaluated (user, delay) sample
    std::vector<TimelineEntry> timeline;
};

// Final decisions from retired states: k = posts actually read = min(pred_time, total_posts).
std::vector<Decision> collect_decisions(const Corpus& corpus, std::span<const UserRunState> states);
std::vector<TimelineEntry> build_timeline(const Corpus& corpus, std::span<const UserRunState> states);

StageLog train_epoch(ModelParams& params, OptimizerState& optimizer, const Corpus& corpus,
                     const TrainConfig& config, int epoch = 0);

struct ValidationResult {
    StageLog stage;
    std::vector<Decision> decisions;
    MetricsReport report;
    double accuracy = 0.0;
    double erde = 0.0;  // ERDE at config.loss.theta
};

ValidationResult validate_epoch(const ModelParams& params, const Corpus& corpus,
                                const TrainConfig& config);

struct EpochLog {
    int epoch = 0;
    StageLog train;
    StageLog valid;
    double valid_accuracy = 0.0;
    double valid_erde = 0.0;
    MetricsReport valid_report;
};

void to_json(nlohmann::json& j, const EpochLog& log);
void from_json(const nlohmann::json& j, EpochLog& log);

// argmax of w_acc * accuracy + w_erde * (1 - ERDE); earliest epoch on ties.
std::size_t select_best(std::span<const EpochLog> logs, double w_acc, double w_erde);

// Stratified by label, seed-pinned; both halves keep corpus order.
std::pair<Corpus, Corpus> stratified_split(const Corpus& corpus, double valid_fraction,
                                           std::uint64_t seed);

struct FitResult {
    std::vector<EpochLog> logs;
    std::vector<ModelParams> epoch_params;
    std::size_t best_epoch = 0;
    OptimizerState optimizer;
};

using EpochCallback = std::function<void(const EpochLog&, const ModelParams&, const OptimizerState&)>;

FitResult fit(const Corpus& train, const Corpus& valid, const TrainConfig& config,
              const EpochCallback& on_epoch = {});

// timeline.csv plus one SVG per (stage, epoch) with the theta deadline marked.
std::vector<std::filesystem::path> export_timeline(std::span<const EpochLog> logs,
                                                   const std::filesystem::path& dir, int theta);

std::string timeline_csv(std::span<const EpochLog> logs);

}  // namespace erd
