#pragma once
// Linear stand-in for the fine-tuned transformer: hashed unigram+bigram text
// features, an explicit time channel carrying the delay, a logistic head, and
// AdamW updates. Everything here is exactly differentiable.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "erd/corpus.hpp"
#include "json.hpp"

namespace erd {

// temporal: the delay is visible to the model; sliding_window: the time channel is zeroed.
enum class Mode : std::uint8_t { temporal = 0, sliding_window = 1 };

const char* to_string(Mode mode) noexcept;
Mode mode_from_string(std::string_view text);

struct FeatureConfig {
    std::uint32_t dim = 1u << 15;  // hashed text dimension D
    int window_size = 10;          // M, also the time-bucket width
    int n_buckets = 10;            // buckets cap at n_buckets * M posts
    double time_norm = 30.0;       // continuous time feature is k / time_norm
    std::uint64_t hash_seed = 0x9e3779b97f4a7c15ull;
    int ngram_max = 1;             // 1: unigrams, 2: unigrams and bigrams

    std::size_t time_block() const noexcept { return 1 + static_cast<std::size_t>(n_buckets); }
    void validate() const;
    bool operator==(const FeatureConfig&) const = default;
};

struct FeatureVector {
    std::vector<std::pair<std::uint32_t, double>> text;  // sorted by index, unique, sqrt(count)
    std::vector<double> time;                            // [k / time_norm, one-hot bucket...]

    bool operator==(const FeatureVector&) const = default;
};

// Lowercases ASCII and splits on anything that is not a letter, digit or non-ASCII byte.
std::vector<std::string> tokenize(std::string_view text);

// 64-bit FNV-1a over the bytes, offset basis mixed with `seed`.
std::uint64_t feature_hash(std::string_view token, std::uint64_t seed) noexcept;

FeatureVector featurize(const FeatureConfig& config, std::string_view text, int delay, Mode mode);
FeatureVector featurize(const FeatureConfig& config, const TimedWindow& window, Mode mode);

// Parameters are stored flat as [text weights (D) | time weights | bias].
struct ModelParams {
    FeatureConfig features;
    Mode mode = Mode::temporal;
    std::uint64_t seed = 0;
    std::vector<double> weights;

    static ModelParams zeros(const FeatureConfig& features, Mode mode, std::uint64_t seed = 0);

    std::size_t size() const noexcept { return weights.size(); }
    std::size_t time_offset() const noexcept { return features.dim; }
    std::size_t bias_index() const noexcept { return weights.size() - 1; }
    double bias() const noexcept { return weights.back(); }
    bool all_finite() const noexcept;
};

struct PredictOutput {
    double probability = 0.5;
    double logit = 0.0;
};

double sigmoid(double x) noexcept;

// Throws NumericalError on a non-finite logit, ContractViolation on shape mismatch.
double logit(const ModelParams& params, const FeatureVector& x);
PredictOutput predict_proba(const ModelParams& params, const FeatureVector& x);

// grad += scale * d(logit)/d(params) at x
void accumulate_logit_gradient(std::span<double> grad, const ModelParams& params,
                               const FeatureVector& x, double scale);

inline constexpr double kProbClamp = 1e-7;

// Binary cross-entropy on p clamped to [kProbClamp, 1 - kProbClamp].
double cross_entropy(double probability, Label label) noexcept;
// d CE / d logit; zero where the clamp is active.
double cross_entropy_logit_grad(double probability, Label label) noexcept;

struct Sample {
    FeatureVector features;
    Label label = Label::negative;
};

struct LossAndGrad {
    double loss = 0.0;
    std::vector<double> grad;
};

// Mean CE over a non-empty batch and its gradient with respect to all parameters.
LossAndGrad ce_loss_and_grad(const ModelParams& params, std::span<const Sample> batch);

struct AdamWConfig {
    double learning_rate = 1e-2;
    double weight_decay = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct OptimizerState {
    AdamWConfig config;
    std::uint64_t step = 0;
    std::vector<double> first_moment;
    std::vector<double> second_moment;

    static OptimizerState for_params(const ModelParams& params, const AdamWConfig& config);
};

// Decoupled weight decay, then the bias-corrected Adam step.
void adamw_step(ModelParams& params, OptimizerState& state, std::span<const double> grad);

struct ProbePoint {
    int delay = 0;
    double probability = 0.0;
    bool alarm = false;  // probability > threshold
};

std::vector<ProbePoint> probe_time_sensitivity(const ModelParams& params, std::string_view text,
                                               std::span<const int> delays, double threshold);

struct Checkpoint {
    ModelParams params;
    std::optional<OptimizerState> optimizer;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Little-endian binary: magic, version, metadata, weights, optional optimizer, FNV checksum.
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const OptimizerState* optimizer = nullptr);
std::string serialize_checkpoint(const ModelParams& params, const OptimizerState* optimizer);
Checkpoint load_checkpoint(const std::filesystem::path& path,
                           std::optional<std::uint32_t> expected_dim = std::nullopt);
Checkpoint parse_checkpoint(std::string_view bytes,
                            std::optional<std::uint32_t> expected_dim = std::nullopt);

// Throws CheckpointError when the checkpoint's mode differs from `mode`.
void require_mode(const ModelParams& params, Mode mode);

void to_json(nlohmann::json& j, const FeatureConfig& c);
void from_json(const nlohmann::json& j, FeatureConfig& c);
void to_json(nlohmann::json& j, const AdamWConfig& c);
void from_json(const nlohmann::json& j, AdamWConfig& c);

}  // namespace erd
