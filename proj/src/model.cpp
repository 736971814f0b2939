#include "erd/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include "erd/errors.hpp"

namespace erd {

using nlohmann::json;

const char* to_string(Mode mode) noexcept {
    return mode == Mode::temporal ? "temporal" : "sliding_window";
}

Mode mode_from_string(std::string_view text) {
    if (text == "temporal") return Mode::temporal;
    if (text == "sliding_window") return Mode::sliding_window;
    throw ValidationError("unknown mode '" + std::string(text) + "'");
}

void FeatureConfig::validate() const {
    if (dim == 0) throw ValidationError("feature dim must be >= 1");
    if (window_size < 1) throw ValidationError("window size must be >= 1");
    if (n_buckets < 1) throw ValidationError("n_buckets must be >= 1");
    if (!(time_norm > 0)) throw ValidationError("time_norm must be > 0");
    if (ngram_max < 1 || ngram_max > 2) throw ValidationError("ngram_max must be 1 or 2");
}

// --- features ----------------------------------------------------------------

std::vector<std::string> tokenize(std::string_view text) {
    std::vector<std::string> tokens;
    std::string current;
    for (const char ch : text) {
        const auto c = static_cast<unsigned char>(ch);
        if (c >= 0x80 || std::isalnum(c)) {
            current += static_cast<char>(c < 0x80 ? std::tolower(c) : c);
        } else if (!current.empty()) {
            tokens.push_back(std::move(current));
            current.clear();
        }
    }
    if (!current.empty()) tokens.push_back(std::move(current));
    return tokens;
}

std::uint64_t feature_hash(std::string_view token, std::uint64_t seed) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ull ^ seed;
    for (const char c : token) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ull;
    }
    return h;
}

FeatureVector featurize(const FeatureConfig& config, std::string_view text, int delay, Mode mode) {
    if (delay < 1) throw ContractViolation("delay must be >= 1");
    const auto tokens = tokenize(text);

    std::vector<std::uint32_t> indices;
    indices.reserve(tokens.size() * static_cast<std::size_t>(config.ngram_max));
    for (std::size_t i = 0; i < tokens.size(); ++i) {
        indices.push_back(static_cast<std::uint32_t>(feature_hash(tokens[i], config.hash_seed) % config.dim));
        if (config.ngram_max >= 2 && i + 1 < tokens.size()) {
            const std::string bigram = tokens[i] + '\x1f' + tokens[i + 1];
            indices.push_back(static_cast<std::uint32_t>(feature_hash(bigram, config.hash_seed) % config.dim));
        }
    }
    std::sort(indices.begin(), indices.end());

    FeatureVector fv;
    for (std::size_t i = 0; i < indices.size();) {
        std::size_t j = i;
        while (j < indices.size() && indices[j] == indices[i]) ++j;
        fv.text.emplace_back(indices[i], std::sqrt(static_cast<double>(j - i)));
        i = j;
    }

    fv.time.assign(config.time_block(), 0.0);
    if (mode == Mode::temporal) {
        fv.time[0] = static_cast<double>(delay) / config.time_norm;
        const int bucket = std::min((delay - 1) / config.window_size, config.n_buckets - 1);
        fv.time[1 + static_cast<std::size_t>(bucket)] = 1.0;
    }
    return fv;
}

FeatureVector featurize(const FeatureConfig& config, const TimedWindow& window, Mode mode) {
    return featurize(config, sanitize_markers(window.text), window.delay, mode);
}

// --- parameters and prediction -------------------------------------------------

ModelParams ModelParams::zeros(const FeatureConfig& features, Mode mode, std::uint64_t seed) {
    features.validate();
    ModelParams p;
    p.features = features;
    p.mode = mode;
    p.seed = seed;
    p.weights.assign(static_cast<std::size_t>(features.dim) + features.time_block() + 1, 0.0);
    return p;
}

bool ModelParams::all_finite() const noexcept {
    return std::all_of(weights.begin(), weights.end(), [](double w) { return std::isfinite(w); });
}

double sigmoid(double x) noexcept {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

namespace {

void check_shape(const ModelParams& params, const FeatureVector& x) {
    if (x.time.size() != params.features.time_block() ||
        params.weights.size() != params.features.dim + x.time.size() + 1) {
        throw ContractViolation("feature vector does not match model dimensions");
    }
    if (!x.text.empty() && x.text.back().first >= params.features.dim) {
        throw ContractViolation("feature index out of range");
    }
}

}  // namespace

double logit(const ModelParams& params, const FeatureVector& x) {
    check_shape(params, x);
    double z = params.bias();
    for (const auto& [i, v] : x.text) z += params.weights[i] * v;
    const auto off = params.time_offset();
    for (std::size_t t = 0; t < x.time.size(); ++t) z += params.weights[off + t] * x.time[t];
    if (!std::isfinite(z)) throw NumericalError("non-finite logit: model parameters are corrupt");
    return z;
}

PredictOutput predict_proba(const ModelParams& params, const FeatureVector& x) {
    const double z = logit(params, x);
    return {sigmoid(z), z};
}

void accumulate_logit_gradient(std::span<double> grad, const ModelParams& params,
                               const FeatureVector& x, double scale) {
    if (grad.size() != params.weights.size()) throw ContractViolation("gradient size mismatch");
    for (const auto& [i, v] : x.text) grad[i] += scale * v;
    const auto off = params.time_offset();
    for (std::size_t t = 0; t < x.time.size(); ++t) grad[off + t] += scale * x.time[t];
    grad[params.bias_index()] += scale;
}

double cross_entropy(double probability, Label label) noexcept {
    const double p = std::clamp(probability, kProbClamp, 1.0 - kProbClamp);
    return label == Label::positive ? -std::log(p) : -std::log1p(-p);
}

double cross_entropy_logit_grad(double probability, Label label) noexcept {
    if (probability < kProbClamp || probability > 1.0 - kProbClamp) return 0.0;
    return probability - (label == Label::positive ? 1.0 : 0.0);
}

LossAndGrad ce_loss_and_grad(const ModelParams& params, std::span<const Sample> batch) {
    if (batch.empty()) throw ContractViolation("empty batch");
    LossAndGrad out;
    out.grad.assign(params.weights.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(batch.size());
    for (const auto& s : batch) {
        const auto p = predict_proba(params, s.features).probability;
        out.loss += cross_entropy(p, s.label);
        accumulate_logit_gradient(out.grad, params, s.features,
                                  inv_n * cross_entropy_logit_grad(p, s.label));
    }
    out.loss *= inv_n;
    return out;
}

// --- AdamW -----------------------------------------------------------------------

OptimizerState OptimizerState::for_params(const ModelParams& params, const AdamWConfig& config) {
    OptimizerState s;
    s.config = config;
    s.first_moment.assign(params.weights.size(), 0.0);
    s.second_moment.assign(params.weights.size(), 0.0);
    return s;
}

void adamw_step(ModelParams& params, OptimizerState& state, std::span<const double> grad) {
    const auto n = params.weights.size();
    if (grad.size() != n || state.first_moment.size() != n || state.second_moment.size() != n) {
        throw ContractViolation("optimizer/gradient shape mismatch");
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (!std::isfinite(grad[i])) {
            throw NumericalError("non-finite gradient at parameter " + std::to_string(i) +
                                 " (step " + std::to_string(state.step + 1) + ")");
        }
    }
    const auto& c = state.config;
    ++state.step;
    const double t = static_cast<double>(state.step);
    const double correction1 = 1.0 - std::pow(c.beta1, t);
    const double correction2 = 1.0 - std::pow(c.beta2, t);
    const double decay = 1.0 - c.learning_rate * c.weight_decay;
    for (std::size_t i = 0; i < n; ++i) {
        auto& m = state.first_moment[i];
        auto& v = state.second_moment[i];
        m = c.beta1 * m + (1.0 - c.beta1) * grad[i];
        v = c.beta2 * v + (1.0 - c.beta2) * grad[i] * grad[i];
        auto& w = params.weights[i];
        w *= decay;
        w -= c.learning_rate * (m / correction1) / (std::sqrt(v / correction2) + c.epsilon);
    }
}

std::vector<ProbePoint> probe_time_sensitivity(const ModelParams& params, std::string_view text,
                                               std::span<const int> delays, double threshold) {
    std::vector<ProbePoint> out;
    out.reserve(delays.size());
    const auto clean = sanitize_markers(text);
    for (const int k : delays) {
        const double p = predict_proba(params, featurize(params.features, clean, k, params.mode)).probability;
        out.push_back({k, p, p > threshold});
    }
    return out;
}

// --- checkpoints --------------------------------------------------------------------

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

namespace {

constexpr char kMagic[8] = {'E', 'R', 'D', 'C', 'K', 'P', 'T', '\0'};

class Writer {
public:
    template <typename T>
    void put(T value) {
        char raw[sizeof(T)];
        std::memcpy(raw, &value, sizeof(T));
        bytes_.append(raw, sizeof(T));
    }
    void put_all(const std::vector<double>& values) {
        put<std::uint64_t>(values.size());
        bytes_.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(double));
    }
    void raw(const char* data, std::size_t n) { bytes_.append(data, n); }
    std::string& bytes() { return bytes_; }

private:
    std::string bytes_;
};

class Reader {
public:
    explicit Reader(std::string_view bytes) : bytes_(bytes) {}

    template <typename T>
    T get() {
        need(sizeof(T));
        T value;
        std::memcpy(&value, bytes_.data() + pos_, sizeof(T));
        pos_ += sizeof(T);
        return value;
    }
    std::vector<double> get_all(std::size_t expected) {
        const auto n = get<std::uint64_t>();
        if (n != expected) throw CheckpointError("checkpoint: array length mismatch");
        need(n * sizeof(double));
        std::vector<double> out(n);
        std::memcpy(out.data(), bytes_.data() + pos_, n * sizeof(double));
        pos_ += n * sizeof(double);
        return out;
    }
    std::size_t pos() const { return pos_; }

private:
    void need(std::size_t n) const {
        if (bytes_.size() - pos_ < n) throw CheckpointError("checkpoint: truncated file");
    }
    std::string_view bytes_;
    std::size_t pos_ = 0;
};

std::uint64_t checksum(std::string_view bytes) { return feature_hash(bytes, 0); }

}  // namespace

std::string serialize_checkpoint(const ModelParams& params, const OptimizerState* optimizer) {
    Writer w;
    w.raw(kMagic, sizeof kMagic);
    w.put<std::uint32_t>(kCheckpointVersion);
    w.put<std::uint8_t>(static_cast<std::uint8_t>(params.mode));
    w.put<std::uint8_t>(optimizer ? 1 : 0);
    w.put<std::uint16_t>(0);
    w.put<std::uint32_t>(params.features.dim);
    w.put<std::int32_t>(params.features.window_size);
    w.put<std::int32_t>(params.features.n_buckets);
    w.put<double>(params.features.time_norm);
    w.put<std::uint64_t>(params.features.hash_seed);
    w.put<std::int32_t>(params.features.ngram_max);
    w.put<std::uint64_t>(params.seed);
    w.put_all(params.weights);
    if (optimizer) {
        const auto& c = optimizer->config;
        for (double v : {c.learning_rate, c.weight_decay, c.beta1, c.beta2, c.epsilon}) w.put<double>(v);
        w.put<std::uint64_t>(optimizer->step);
        w.put_all(optimizer->first_moment);
        w.put_all(optimizer->second_moment);
    }
    w.put<std::uint64_t>(checksum(w.bytes()));
    return std::move(w.bytes());
}

void save_checkpoint(const std::filesystem::path& path, const ModelParams& params,
                     const OptimizerState* optimizer) {
    if (!params.all_finite()) throw NumericalError("refusing to save non-finite parameters");
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    const auto bytes = serialize_checkpoint(params, optimizer);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write checkpoint '" + path.string() + "'");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

Checkpoint parse_checkpoint(std::string_view bytes, std::optional<std::uint32_t> expected_dim) {
    if (bytes.size() < sizeof kMagic + sizeof(std::uint64_t) ||
        std::memcmp(bytes.data(), kMagic, sizeof kMagic) != 0) {
        throw CheckpointError("not a checkpoint file (bad magic)");
    }
    const auto body = bytes.substr(0, bytes.size() - sizeof(std::uint64_t));
    std::uint64_t stored;
    std::memcpy(&stored, bytes.data() + body.size(), sizeof stored);
    if (stored != checksum(body)) throw CheckpointError("checkpoint checksum mismatch (corrupt file)");

    Reader r(body.substr(sizeof kMagic));
    const auto version = r.get<std::uint32_t>();
    if (version != kCheckpointVersion) {
        throw CheckpointError("unsupported checkpoint version " + std::to_string(version));
    }
    Checkpoint ck;
    const auto mode = r.get<std::uint8_t>();
    if (mode > 1) throw CheckpointError("checkpoint: unknown mode flag");
    ck.params.mode = static_cast<Mode>(mode);
    const bool has_optimizer = r.get<std::uint8_t>() != 0;
    r.get<std::uint16_t>();
    auto& f = ck.params.features;
    f.dim = r.get<std::uint32_t>();
    f.window_size = r.get<std::int32_t>();
    f.n_buckets = r.get<std::int32_t>();
    f.time_norm = r.get<double>();
    f.hash_seed = r.get<std::uint64_t>();
    f.ngram_max = r.get<std::int32_t>();
    ck.params.seed = r.get<std::uint64_t>();
    if (expected_dim && *expected_dim != f.dim) {
        throw CheckpointError("checkpoint dimension mismatch: file has D=" + std::to_string(f.dim) +
                              ", expected " + std::to_string(*expected_dim));
    }
    try {
        f.validate();
    } catch (const ValidationError& e) {
        throw CheckpointError(std::string("checkpoint metadata invalid: ") + e.what());
    }
    const std::size_t n = static_cast<std::size_t>(f.dim) + f.time_block() + 1;
    ck.params.weights = r.get_all(n);
    if (has_optimizer) {
        OptimizerState s;
        s.config.learning_rate = r.get<double>();
        s.config.weight_decay = r.get<double>();
        s.config.beta1 = r.get<double>();
        s.config.beta2 = r.get<double>();
        s.config.epsilon = r.get<double>();
        s.step = r.get<std::uint64_t>();
        s.first_moment = r.get_all(n);
        s.second_moment = r.get_all(n);
        ck.optimizer = std::move(s);
    }
    if (r.pos() + sizeof kMagic != body.size()) throw CheckpointError("checkpoint: trailing bytes");
    if (!ck.params.all_finite()) throw CheckpointError("checkpoint contains non-finite parameters");
    return ck;
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::optional<std::uint32_t> expected_dim) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open checkpoint '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_checkpoint(buf.str(), expected_dim);
}

void require_mode(const ModelParams& params, Mode mode) {
    if (params.mode != mode) {
        throw CheckpointError(std::string("checkpoint was trained in ") + to_string(params.mode) +
                              " mode, refusing to evaluate it as " + to_string(mode));
    }
}

void to_json(json& j, const FeatureConfig& c) {
    j = json{{"dim", c.dim},
             {"window_size", c.window_size},
             {"n_buckets", c.n_buckets},
             {"time_norm", c.time_norm},
             {"hash_seed", c.hash_seed},
             {"ngram_max", c.ngram_max}};
}

void from_json(const json& j, FeatureConfig& c) {
    FeatureConfig d;
    c.dim = j.value("dim", d.dim);
    c.window_size = j.value("window_size", d.window_size);
    c.n_buckets = j.value("n_buckets", d.n_buckets);
    c.time_norm = j.value("time_norm", d.time_norm);
    c.hash_seed = j.value("hash_seed", d.hash_seed);
    c.ngram_max = j.value("ngram_max", d.ngram_max);
}

void to_json(json& j, const AdamWConfig& c) {
    j = json{{"learning_rate", c.learning_rate},
             {"weight_decay", c.weight_decay},
             {"beta1", c.beta1},
             {"beta2", c.beta2},
             {"epsilon", c.epsilon}};
}

void from_json(const json& j, AdamWConfig& c) {
    AdamWConfig d;
    c.learning_rate = j.value("learning_rate", d.learning_rate);
    c.weight_decay = j.value("weight_decay", d.weight_decay);
    c.beta1 = j.value("beta1", d.beta1);
    c.beta2 = j.value("beta2", d.beta2);
    c.epsilon = j.value("epsilon", d.epsilon);
}

}  // namespace erd
