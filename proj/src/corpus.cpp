#include "erd/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "erd/errors.hpp"
#include "rng.hpp"

namespace erd {

using nlohmann::json;

Label label_from_int(long long value) {
    if (value == 0) return Label::negative;
    if (value == 1) return Label::positive;
    throw ValidationError("label must be 0 or 1, got " + std::to_string(value));
}

const char* to_string(Split split) noexcept {
    switch (split) {
        case Split::train: return "train";
        case Split::trial: return "trial";
        case Split::test: return "test";
    }
    return "train";
}

Split split_from_string(std::string_view text) {
    if (text == "train") return Split::train;
    if (text == "trial") return Split::trial;
    if (text == "test") return Split::test;
    throw ValidationError("unknown split '" + std::string(text) + "'");
}

namespace {

bool blank(std::string_view s) {
    return std::all_of(s.begin(), s.end(),
                       [](unsigned char c) { return std::isspace(c) != 0; });
}

Split infer_split(const std::string& stem) {
    if (stem.find("test") != std::string::npos) return Split::test;
    if (stem.find("trial") != std::string::npos) return Split::trial;
    return Split::train;
}

}  // namespace

void Corpus::validate() const {
    if (users.empty()) throw ValidationError("corpus '" + name + "' is empty");
    std::unordered_set<std::string_view> seen;
    for (const auto& user : users) {
        if (user.user_id.empty()) throw ValidationError("empty user_id");
        if (!seen.insert(user.user_id).second) {
            throw ValidationError("duplicate user_id '" + user.user_id + "'");
        }
        if (user.posts.empty()) {
            throw ValidationError("user '" + user.user_id + "' has no posts");
        }
        for (std::size_t i = 0; i < user.posts.size(); ++i) {
            if (user.posts[i].index != i) {
                throw ValidationError("user '" + user.user_id + "': post indices not consecutive");
            }
            if (blank(user.posts[i].text)) {
                throw ValidationError("user '" + user.user_id + "': post " + std::to_string(i) +
                                      " is blank");
            }
        }
    }
}

int Corpus::max_posts() const noexcept {
    int m = 0;
    for (const auto& u : users) m = std::max(m, u.total_posts());
    return m;
}

std::size_t Corpus::positives() const noexcept {
    return static_cast<std::size_t>(
        std::count_if(users.begin(), users.end(), [](const auto& u) { return u.positive(); }));
}

double Corpus::positive_ratio() const noexcept {
    return users.empty() ? 0.0
                         : static_cast<double>(positives()) / static_cast<double>(users.size());
}

const UserHistory* Corpus::find(std::string_view user_id) const noexcept {
    for (const auto& u : users) {
        if (u.user_id == user_id) return &u;
    }
    return nullptr;
}

CorpusStats corpus_stats(const Corpus& corpus) {
    CorpusStats s;
    s.users = corpus.users.size();
    s.positives = corpus.positives();
    s.negatives = s.users - s.positives;
    if (s.users == 0) return s;
    long long total = 0;
    s.min_posts = corpus.users.front().total_posts();
    for (const auto& u : corpus.users) {
        total += u.total_posts();
        s.min_posts = std::min(s.min_posts, u.total_posts());
        s.max_posts = std::max(s.max_posts, u.total_posts());
    }
    s.mean_posts = static_cast<double>(total) / static_cast<double>(s.users);
    return s;
}

std::string format_stats(const Corpus& corpus, const CorpusStats& s) {
    char buf[256];
    std::snprintf(buf, sizeof buf,
                  "%-12s %-6s | %6s %6s %6s | %7s %5s %5s\n"
                  "%-12s %-6s | %6zu %6zu %6zu | %7.1f %5d %5d\n",
                  "corpus", "split", "total", "pos", "neg", "mean", "min", "max",
                  corpus.name.c_str(), to_string(corpus.split), s.users, s.positives, s.negatives,
                  s.mean_posts, s.min_posts, s.max_posts);
    return buf;
}

UserHistory make_user(std::string user_id, Label label, std::vector<std::string> posts) {
    UserHistory u;
    u.user_id = std::move(user_id);
    u.label = label;
    u.posts.reserve(posts.size());
    for (std::size_t i = 0; i < posts.size(); ++i) u.posts.push_back({i, std::move(posts[i])});
    return u;
}

// --- JSONL -----------------------------------------------------------------

Corpus parse_corpus(std::string_view jsonl, std::string name, Split split) {
    Corpus corpus;
    corpus.name = std::move(name);
    corpus.split = split;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= jsonl.size()) {
        const auto nl = jsonl.find('\n', pos);
        const auto line = jsonl.substr(pos, nl == std::string_view::npos ? jsonl.size() - pos
                                                                        : nl - pos);
        ++line_no;
        pos = nl == std::string_view::npos ? jsonl.size() + 1 : nl + 1;
        if (blank(line)) continue;

        json record;
        try {
            record = json::parse(line);
        } catch (const json::parse_error& e) {
            throw ParseError(line_no, e.what());
        }
        try {
            if (!record.is_object()) throw ParseError(line_no, "expected a JSON object");
            const auto& id = record.at("user_id");
            const auto& label = record.at("label");
            const auto& posts = record.at("posts");
            if (!id.is_string()) throw ParseError(line_no, "user_id must be a string");
            if (!label.is_number_integer()) throw ParseError(line_no, "label must be 0 or 1");
            if (!posts.is_array()) throw ParseError(line_no, "posts must be an array");
            std::vector<std::string> texts;
            texts.reserve(posts.size());
            for (const auto& p : posts) {
                if (!p.is_string()) throw ParseError(line_no, "posts must contain strings");
                texts.push_back(p.get<std::string>());
            }
            Label l;
            try {
                l = label_from_int(label.get<long long>());
            } catch (const ValidationError& e) {
                throw ParseError(line_no, e.what());
            }
            corpus.users.push_back(make_user(id.get<std::string>(), l, std::move(texts)));
        } catch (const json::out_of_range& e) {
            throw ParseError(line_no, e.what());
        }
    }
    corpus.validate();
    return corpus;
}

Corpus load_corpus(const std::filesystem::path& path, std::optional<Split> split) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open corpus '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    const auto stem = path.stem().string();
    return parse_corpus(buf.str(), stem, split.value_or(infer_split(stem)));
}

std::string serialize_corpus(const Corpus& corpus) {
    std::string out;
    for (const auto& user : corpus.users) {
        nlohmann::ordered_json record;
        record["user_id"] = user.user_id;
        record["label"] = to_int(user.label);
        auto posts = nlohmann::ordered_json::array();
        for (const auto& p : user.posts) posts.push_back(p.text);
        record["posts"] = std::move(posts);
        out += record.dump();
        out += '\n';
    }
    return out;
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write corpus '" + path.string() + "'");
    out << serialize_corpus(corpus);
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

// --- synthetic generator -----------------------------------------------------

std::vector<std::string> SyntheticSpec::validate() const {
    auto fail = [](const std::string& what) { throw ValidationError("synthetic spec: " + what); };
    if (n_users == 0) fail("n_users must be >= 1");
    if (!(positive_ratio >= 0.0 && positive_ratio <= 1.0)) fail("positive_ratio must be in [0,1]");
    if (posts_min < 1) fail("posts_min must be >= 1");
    if (posts_min > posts_max) fail("posts range min > max");
    if (!(length_skew > 0.0)) fail("length_skew must be > 0");
    if (onset_min < 0) fail("onset_min must be >= 0");
    if (onset_min > onset_max) fail("onset range min > max");
    if (!(risk_signal_strength > 0.0 && risk_signal_strength <= 1.0)) {
        fail("risk_signal_strength must be in (0,1]");
    }
    if (!(noise_rate >= 0.0 && noise_rate <= 1.0)) fail("noise_rate must be in [0,1]");
    if (risk_vocab_size == 0 || neutral_vocab_size == 0) fail("vocabulary sizes must be >= 1");
    if (words_min < 1 || words_min > words_max) fail("words range invalid");
    if (!(neutral_zipf_exponent >= 0.0)) fail("neutral_zipf_exponent must be >= 0");
    if (name.empty()) fail("name must be non-empty");

    std::vector<std::string> warnings;
    if (onset_max >= posts_min) {
        warnings.push_back("onset_max (" + std::to_string(onset_max) + ") >= posts_min (" +
                           std::to_string(posts_min) +
                           "): some positive users may never emit risk vocabulary");
    }
    return warnings;
}

void to_json(json& j, const SyntheticSpec& s) {
    j = json{{"seed", s.seed},
             {"name", s.name},
             {"split", to_string(s.split)},
             {"n_users", s.n_users},
             {"positive_ratio", s.positive_ratio},
             {"posts_per_user_range", {s.posts_min, s.posts_max}},
             {"length_skew", s.length_skew},
             {"onset_range", {s.onset_min, s.onset_max}},
             {"risk_signal_strength", s.risk_signal_strength},
             {"noise_rate", s.noise_rate},
             {"risk_vocab_size", s.risk_vocab_size},
             {"neutral_vocab_size", s.neutral_vocab_size},
             {"neutral_zipf_exponent", s.neutral_zipf_exponent},
             {"words_per_post_range", {s.words_min, s.words_max}}};
}

void from_json(const json& j, SyntheticSpec& s) {
    SyntheticSpec d;
    s.seed = j.value("seed", d.seed);
    s.name = j.value("name", d.name);
    s.split = split_from_string(j.value("split", std::string(to_string(d.split))));
    s.n_users = j.value("n_users", d.n_users);
    s.positive_ratio = j.value("positive_ratio", d.positive_ratio);
    auto range = [&](const char* key, int& lo, int& hi) {
        if (!j.contains(key)) return;
        const auto& r = j.at(key);
        if (!r.is_array() || r.size() != 2) {
            throw ValidationError(std::string(key) + " must be a [min, max] pair");
        }
        lo = r[0].get<int>();
        hi = r[1].get<int>();
    };
    s.posts_min = d.posts_min;
    s.posts_max = d.posts_max;
    range("posts_per_user_range", s.posts_min, s.posts_max);
    s.length_skew = j.value("length_skew", d.length_skew);
    s.onset_min = d.onset_min;
    s.onset_max = d.onset_max;
    range("onset_range", s.onset_min, s.onset_max);
    s.risk_signal_strength = j.value("risk_signal_strength", d.risk_signal_strength);
    s.noise_rate = j.value("noise_rate", d.noise_rate);
    s.risk_vocab_size = j.value("risk_vocab_size", d.risk_vocab_size);
    s.neutral_vocab_size = j.value("neutral_vocab_size", d.neutral_vocab_size);
    s.neutral_zipf_exponent = j.value("neutral_zipf_exponent", d.neutral_zipf_exponent);
    s.words_min = d.words_min;
    s.words_max = d.words_max;
    range("words_per_post_range", s.words_min, s.words_max);
}

namespace {

constexpr const char* kNeutralSyllables[] = {
    "ba", "be", "bi", "bo", "ca", "co", "da", "de", "do", "fa", "fe", "ga", "la", "le",
    "li", "lo", "ma", "me", "mi", "mo", "na", "ne", "no", "pa", "pe", "po", "ra", "re",
    "ri", "ro", "sa", "se", "si", "so", "ta", "te", "ti", "to", "va", "ve"};
constexpr const char* kRiskStems[] = {"tris", "llor", "mied", "dol",  "sol", "vac",
                                      "cans", "ang",  "pen",  "rot",  "gris", "culp"};
constexpr const char* kRiskEndings[] = {"ez", "ura", "or", "ia"};

// Word i spelled in base-|alphabet| digits, at least `min_parts` parts.
template <std::size_t N>
std::string spell(std::size_t i, const char* const (&alphabet)[N], std::size_t min_parts) {
    std::string word;
    std::size_t parts = 0;
    do {
        word += alphabet[i % N];
        i /= N;
        ++parts;
    } while (i > 0 || parts < min_parts);
    return word;
}

}  // namespace

std::vector<std::string> neutral_vocabulary(std::size_t size) {
    std::vector<std::string> words;
    words.reserve(size);
    for (std::size_t i = 0; words.size() < size; ++i) words.push_back(spell(i, kNeutralSyllables, 2));
    return words;
}

std::vector<std::string> risk_vocabulary(std::size_t size) {
    constexpr std::size_t stems = std::size(kRiskStems);
    constexpr std::size_t endings = std::size(kRiskEndings);
    std::vector<std::string> words;
    words.reserve(size);
    for (std::size_t i = 0; words.size() < size; ++i) {
        std::string w = std::string(kRiskStems[i % stems]) + kRiskEndings[(i / stems) % endings];
        if (const auto round = i / (stems * endings); round > 0) w += kRiskEndings[round % endings];
        if (const auto round = i / (stems * endings * endings); round > 0) w += std::to_string(round);
        words.push_back(std::move(w));
    }
    return words;
}

Corpus generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const auto neutral = neutral_vocabulary(spec.neutral_vocab_size);
    const auto risk = risk_vocabulary(spec.risk_vocab_size);

    // Cumulative Zipf weights over the neutral pool, rank r has weight 1/(r+1)^s.
    std::vector<double> cdf(neutral.size());
    double acc = 0.0;
    for (std::size_t r = 0; r < neutral.size(); ++r) {
        acc += std::pow(static_cast<double>(r + 1), -spec.neutral_zipf_exponent);
        cdf[r] = acc;
    }
    auto draw_neutral = [&](detail::Rng& rng) -> std::string_view {
        const double u = rng.uniform() * acc;
        const auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        return neutral[std::min<std::size_t>(static_cast<std::size_t>(it - cdf.begin()), neutral.size() - 1)];
    };

    detail::Rng rng(spec.seed);
    const auto n_pos = static_cast<std::size_t>(
        std::llround(static_cast<double>(spec.n_users) * spec.positive_ratio));
    std::vector<Label> labels(spec.n_users, Label::negative);
    std::fill_n(labels.begin(), std::min(n_pos, spec.n_users), Label::positive);
    rng.shuffle(labels);

    Corpus corpus;
    corpus.name = spec.name;
    corpus.split = spec.split;
    corpus.users.reserve(spec.n_users);
    const int span = spec.posts_max - spec.posts_min + 1;
    for (std::size_t i = 0; i < spec.n_users; ++i) {
        char id[64];
        std::snprintf(id, sizeof id, "%s-%04zu", spec.name.c_str(), i);
        const Label label = labels[i];
        const int length = std::min(
            spec.posts_max,
            spec.posts_min + static_cast<int>(std::floor(span * std::pow(rng.uniform(), spec.length_skew))));
        const int onset = label == Label::positive
                              ? static_cast<int>(rng.between(spec.onset_min, spec.onset_max))
                              : length;  // negatives never switch on
        std::vector<std::string> posts;
        posts.reserve(static_cast<std::size_t>(length));
        for (int j = 0; j < length; ++j) {
            const double q = j >= onset ? spec.risk_signal_strength : spec.noise_rate;
            const auto n_words = rng.between(spec.words_min, spec.words_max);
            std::vector<std::string_view> words;
            words.reserve(static_cast<std::size_t>(n_words) + 1);
            for (long long w = 0; w < n_words; ++w) words.push_back(draw_neutral(rng));
            if (rng.bernoulli(q)) {
                const auto at = rng.below(words.size() + 1);
                words.insert(words.begin() + static_cast<std::ptrdiff_t>(at), risk[rng.below(risk.size())]);
            }
            posts.push_back(join_posts(words));
        }
        corpus.users.push_back(make_user(id, label, std::move(posts)));
    }
    corpus.validate();
    return corpus;
}

SyntheticSpec benchmark_spec(std::uint64_t seed, Split split) {
    SyntheticSpec s;
    s.split = split;
    if (split == Split::test) {
        s.seed = seed ^ 0x5deece66dull;
        s.name = "test";
        s.n_users = 100;
    } else {
        s.seed = seed;
        s.name = to_string(split);
        s.n_users = 200;
    }
    return s;
}

SyntheticSpec depression_shaped_spec(std::uint64_t seed) {
    SyntheticSpec s;
    s.seed = seed;
    s.name = "depression-train";
    s.n_users = 175;
    s.positive_ratio = 94.0 / 175.0;
    return s;
}

// --- delay scheme ------------------------------------------------------------

int checkpoint_at_or_after(int k, int window_size) {
    if (window_size < 1) throw ContractViolation("window size must be >= 1");
    if (k <= 0) return window_size;
    return ((k + window_size - 1) / window_size) * window_size;
}

std::vector<int> delay_checkpoints(int window_size, const Corpus& corpus) {
    if (window_size < 1) throw ContractViolation("window size must be >= 1");
    const int last = checkpoint_at_or_after(std::max(1, corpus.max_posts()), window_size);
    std::vector<int> out;
    for (int k = window_size; k <= last; k += window_size) out.push_back(k);
    return out;
}

DelaySchedule make_schedule(int window_size, const Corpus& corpus) {
    return {window_size, delay_checkpoints(window_size, corpus)};
}

std::string join_posts(const std::vector<std::string_view>& posts) {
    std::string out;
    std::size_t n = posts.empty() ? 0 : posts.size() - 1;
    for (const auto p : posts) n += p.size();
    out.reserve(n);
    for (std::size_t i = 0; i < posts.size(); ++i) {
        if (i) out += ' ';
        out += posts[i];
    }
    return out;
}

TimedWindow build_window(const UserHistory& user, int delay, int window_size) {
    if (delay <= 0) throw ContractViolation("delay must be >= 1, got " + std::to_string(delay));
    if (window_size < 1) throw ContractViolation("window size must be >= 1");
    const auto end = static_cast<std::size_t>(std::min(delay, user.total_posts()));
    const auto begin = end > static_cast<std::size_t>(window_size) ? end - window_size : 0;
    std::vector<std::string_view> texts;
    texts.reserve(end - begin);
    for (auto i = begin; i < end; ++i) texts.push_back(user.posts[i].text);
    return {user.user_id, delay, join_posts(texts), begin, end};
}

std::string sanitize_markers(std::string_view text) {
    static constexpr std::string_view kMarkers[] = {"[CLS]", "[TIME]", "[SEP]"};
    std::string out(text);
    bool changed = true;
    while (changed) {
        changed = false;
        for (const auto marker : kMarkers) {
            for (auto at = out.find(marker); at != std::string::npos; at = out.find(marker, at)) {
                out.erase(at, marker.size());
                changed = true;
            }
        }
    }
    return out;
}

std::string encode_timed_input(const TimedWindow& window) {
    return "[CLS] " + sanitize_markers(window.text) + " [TIME] " + std::to_string(window.delay) +
           " [SEP]";
}

std::pair<std::string, int> decode_timed_input(std::string_view encoded) {
    constexpr std::string_view head = "[CLS] ";
    constexpr std::string_view tail = " [SEP]";
    constexpr std::string_view time = " [TIME] ";
    if (encoded.size() < head.size() + tail.size() || encoded.substr(0, head.size()) != head ||
        encoded.substr(encoded.size() - tail.size()) != tail) {
        throw ContractViolation("not a time-annotated input");
    }
    const auto body = encoded.substr(head.size(), encoded.size() - head.size() - tail.size());
    const auto at = body.rfind(time);
    if (at == std::string_view::npos) throw ContractViolation("missing [TIME] marker");
    const auto digits = body.substr(at + time.size());
    if (digits.empty() ||
        !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        throw ContractViolation("malformed delay");
    }
    return {std::string(body.substr(0, at)), std::stoi(std::string(digits))};
}

}  // namespace erd
