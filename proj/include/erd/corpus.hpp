#pragma once
// Users, posts and corpora; JSONL storage; the seeded synthetic generator;
// delay checkpoints, post windows and the time-annotated input encoding.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "json.hpp"

namespace erd {

enum class Label : std::uint8_t { negative = 0, positive = 1 };

inline int to_int(Label l) noexcept { return static_cast<int>(l); }
Label label_from_int(long long value);  // throws ValidationError unless 0 or 1

enum class Split : std::uint8_t { train, trial, test };

const char* to_string(Split split) noexcept;
Split split_from_string(std::string_view text);

struct Post {
    std::size_t index = 0;
    std::string text;
};

struct UserHistory {
    std::string user_id;
    std::vector<Post> posts;
    Label label = Label::negative;

    int total_posts() const noexcept { return static_cast<int>(posts.size()); }
    bool positive() const noexcept { return label == Label::positive; }
};

struct Corpus {
    std::string name;
    Split split = Split::train;
    std::vector<UserHistory> users;

    // Throws ValidationError on empty corpus, duplicate ids, empty posts or bad indices.
    void validate() const;

    int max_posts() const noexcept;
    std::size_t positives() const noexcept;
    double positive_ratio() const noexcept;
    const UserHistory* find(std::string_view user_id) const noexcept;
};

// User counts and history lengths.
struct CorpusStats {
    std::size_t users = 0;
    std::size_t positives = 0;
    std::size_t negatives = 0;
    double mean_posts = 0.0;
    int min_posts = 0;
    int max_posts = 0;
};

CorpusStats corpus_stats(const Corpus& corpus);
std::string format_stats(const Corpus& corpus, const CorpusStats& stats);

// Builds a Corpus from raw (user_id, label, posts) records, assigning post indices.
UserHistory make_user(std::string user_id, Label label, std::vector<std::string> posts);

// JSONL, one {"user_id", "label", "posts"} object per line, UTF-8.
Corpus load_corpus(const std::filesystem::path& path, std::optional<Split> split = std::nullopt);
Corpus parse_corpus(std::string_view jsonl, std::string name, Split split = Split::train);
void save_corpus(const Corpus& corpus, const std::filesystem::path& path);
std::string serialize_corpus(const Corpus& corpus);

// --- synthetic corpus ------------------------------------------------------

struct SyntheticSpec {
    std::uint64_t seed = 7;
    std::string name = "synthetic";
    Split split = Split::train;
    std::size_t n_users = 200;
    double positive_ratio = 0.45;
    int posts_min = 11;
    int posts_max = 100;
    // history length = min + floor((max-min+1) * u^skew); 1 is uniform, larger skews short
    double length_skew = 2.5;
    int onset_min = 0;
    int onset_max = 15;
    double risk_signal_strength = 0.6;
    double noise_rate = 0.05;
    std::size_t risk_vocab_size = 12;
    std::size_t neutral_vocab_size = 30;
    double neutral_zipf_exponent = 0.0;  // 0 draws neutral words uniformly
    int words_min = 3;
    int words_max = 8;

    // Throws ValidationError for degenerate ranges; returns non-fatal warnings.
    std::vector<std::string> validate() const;
};

void to_json(nlohmann::json& j, const SyntheticSpec& spec);
void from_json(const nlohmann::json& j, SyntheticSpec& spec);

// Vocabulary pools are a function of the pool sizes only, never of the seed,
// so corpora generated with different seeds share the same risk signal.
std::vector<std::string> risk_vocabulary(std::size_t size);
std::vector<std::string> neutral_vocabulary(std::size_t size);

// Deterministic in `spec`.
Corpus generate_synthetic(const SyntheticSpec& spec);

// Pinned benchmark: 200 train / 100 test users, 45% positive, onset <= 15,
// signal 0.6, noise 0.05. The test split uses a seed derived from `seed`.
SyntheticSpec benchmark_spec(std::uint64_t seed, Split split);

// Shaped like the depression train split: 175 users, 94 positive, 11..100 posts.
SyntheticSpec depression_shaped_spec(std::uint64_t seed);

// --- delay scheme ------------------------------------------------------------

struct DelaySchedule {
    int window_size = 10;
    std::vector<int> checkpoints;
};

// [M, 2M, ...] up to the corpus maximum history length rounded up to a multiple of M.
std::vector<int> delay_checkpoints(int window_size, const Corpus& corpus);
DelaySchedule make_schedule(int window_size, const Corpus& corpus);

// First checkpoint >= k, i.e. ceil(k / M) * M.
int checkpoint_at_or_after(int k, int window_size);

struct TimedWindow {
    std::string user_id;
    int delay = 1;
    std::string text;
    std::size_t begin = 0;  // covered post indices [begin, end)
    std::size_t end = 0;
};

// Covers [max(0, min(k,n) - M), min(k,n)); posts joined by a single space.
TimedWindow build_window(const UserHistory& user, int delay, int window_size);

std::string join_posts(const std::vector<std::string_view>& posts);

// Removes the literal "[CLS]", "[TIME]" and "[SEP]" markers.
std::string sanitize_markers(std::string_view text);

// "[CLS] " + text + " [TIME] " + k + " [SEP]" with the text sanitized first.
std::string encode_timed_input(const TimedWindow& window);

// Inverse of encode_timed_input for well-formed strings.
std::pair<std::string, int> decode_timed_input(std::string_view encoded);

}  // namespace erd
