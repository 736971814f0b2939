#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "erd/corpus.hpp"
#include "erd/errors.hpp"

using namespace erd;
namespace fs = std::filesystem;

namespace {

Corpus tiny_corpus() {
    Corpus c;
    c.name = "tiny";
    c.users.push_back(make_user("a", Label::positive, {"uno", "dos", "tres"}));
    c.users.push_back(make_user("b", Label::negative, {"hola"}));
    return c;
}

UserHistory numbered_user(int n) {
    std::vector<std::string> posts;
    for (int i = 0; i < n; ++i) posts.push_back("p" + std::to_string(i));
    return make_user("u", Label::negative, std::move(posts));
}

fs::path temp_file(const std::string& name) {
    const auto dir = fs::temp_directory_path() / "erd_unit_corpus";
    fs::create_directories(dir);
    return dir / name;
}

}  // namespace

TEST_CASE("parse_corpus reads one user per line and keeps post order") {
    const auto c = parse_corpus(R"({"user_id":"x","label":1,"posts":["a","b","c"]})", "t");
    REQUIRE(c.users.size() == 1);
    CHECK(c.users[0].total_posts() == 3);
    CHECK(c.users[0].positive());
    CHECK(c.users[0].posts[2].text == "c");
    CHECK(c.users[0].posts[2].index == 2);
}

TEST_CASE("parse errors carry the offending line number") {
    const std::string text =
        "{\"user_id\":\"x\",\"label\":0,\"posts\":[\"a\"]}\n"
        "\n"
        "{\"user_id\":\"y\",\"label\":0,\"posts\":[\"a\"\n";
    try {
        parse_corpus(text, "t");
        FAIL("expected a parse error");
    } catch (const ParseError& e) {
        CHECK(e.line() == 3);
    }
    CHECK_THROWS_AS(parse_corpus(R"({"user_id":"x","label":2,"posts":["a"]})", "t"), ParseError);
    CHECK_THROWS_AS(parse_corpus(R"({"user_id":"x","posts":["a"]})", "t"), ParseError);
    CHECK_THROWS_AS(parse_corpus(R"({"user_id":"x","label":1,"posts":[3]})", "t"), ParseError);
}

TEST_CASE("corpus validation rejects duplicates, empty corpora and blank posts") {
    const std::string dup =
        "{\"user_id\":\"x\",\"label\":0,\"posts\":[\"a\"]}\n{\"user_id\":\"x\",\"label\":1,\"posts\":[\"b\"]}\n";
    CHECK_THROWS_AS(parse_corpus(dup, "t"), ValidationError);
    CHECK_THROWS_AS(parse_corpus("\n\n", "t"), ValidationError);
    CHECK_THROWS_AS(parse_corpus(R"({"user_id":"x","label":0,"posts":["  "]})", "t"), ValidationError);
    CHECK_THROWS_AS(parse_corpus(R"({"user_id":"x","label":0,"posts":[]})", "t"), ValidationError);
}

TEST_CASE("save then load is the identity") {
    auto c = tiny_corpus();
    c.users[1].posts[0].text = "día \"triste\" \\ ñ";
    const auto path = temp_file("roundtrip.jsonl");
    save_corpus(c, path);
    const auto back = load_corpus(path);
    REQUIRE(back.users.size() == c.users.size());
    for (std::size_t i = 0; i < c.users.size(); ++i) {
        CHECK(back.users[i].user_id == c.users[i].user_id);
        CHECK(back.users[i].label == c.users[i].label);
        REQUIRE(back.users[i].posts.size() == c.users[i].posts.size());
        for (std::size_t j = 0; j < c.users[i].posts.size(); ++j) {
            CHECK(back.users[i].posts[j].text == c.users[i].posts[j].text);
        }
    }
    CHECK(serialize_corpus(back) == serialize_corpus(c));
    CHECK(back.name == "roundtrip");
}

TEST_CASE("load_corpus infers the split from the file stem") {
    const auto path = temp_file("test.jsonl");
    save_corpus(tiny_corpus(), path);
    CHECK(load_corpus(path).split == Split::test);
    CHECK(load_corpus(path, Split::trial).split == Split::trial);
    CHECK_THROWS_AS(load_corpus(temp_file("missing.jsonl")), IoError);
}

TEST_CASE("generate_synthetic is deterministic in its SyntheticSpec") {
    SyntheticSpec spec;
    spec.seed = 7;
    spec.n_users = 4;
    spec.positive_ratio = 0.5;
    CHECK(serialize_corpus(generate_synthetic(spec)) == serialize_corpus(generate_synthetic(spec)));
    spec.seed = 8;
    const auto other = generate_synthetic(spec);
    spec.seed = 7;
    CHECK(serialize_corpus(other) != serialize_corpus(generate_synthetic(spec)));
}

TEST_CASE("generator honours the user count and positive fraction") {
    SyntheticSpec spec;
    spec.n_users = 37;
    spec.positive_ratio = 0.3;
    const auto c = generate_synthetic(spec);
    CHECK(c.users.size() == 37);
    CHECK(c.positives() == 11);  // round(37 * 0.3)
    for (const auto& u : c.users) {
        CHECK(u.total_posts() >= spec.posts_min);
        CHECK(u.total_posts() <= spec.posts_max);
    }
    spec.positive_ratio = 0.0;
    CHECK(generate_synthetic(spec).positives() == 0);
}

TEST_CASE("risk-token rates match signal strength and noise") {
    const auto spec = benchmark_spec(7, Split::train);
    const auto c = generate_synthetic(spec);
    std::set<std::string> risk;
    for (auto& w : risk_vocabulary(spec.risk_vocab_size)) risk.insert(w);
    auto has_risk = [&](const std::string& text) {
        std::istringstream in(text);
        std::string w;
        while (in >> w) {
            if (risk.count(w)) return true;
        }
        return false;
    };
    // Posts at index >= onset_max are past every positive user's onset.
    std::size_t pos_posts = 0, pos_hits = 0, neg_posts = 0, neg_hits = 0;
    for (const auto& u : c.users) {
        for (const auto& p : u.posts) {
            if (u.positive() && static_cast<int>(p.index) >= spec.onset_max) {
                ++pos_posts;
                pos_hits += has_risk(p.text);
            } else if (!u.positive()) {
                ++neg_posts;
                neg_hits += has_risk(p.text);
            }
        }
    }
    const double pos_rate = static_cast<double>(pos_hits) / static_cast<double>(pos_posts);
    const double neg_rate = static_cast<double>(neg_hits) / static_cast<double>(neg_posts);
    CHECK(pos_rate == doctest::Approx(0.6).epsilon(0.05 / 0.6));
    CHECK(neg_rate == doctest::Approx(0.05).epsilon(0.02 / 0.05));
}

TEST_CASE("vocabularies are disjoint and independent of the seed") {
    const auto risk = risk_vocabulary(12);
    const auto neutral = neutral_vocabulary(30);
    std::set<std::string> r(risk.begin(), risk.end()), n(neutral.begin(), neutral.end());
    CHECK(r.size() == 12);
    CHECK(n.size() == 30);
    for (const auto& w : r) CHECK(n.count(w) == 0);
    CHECK(risk_vocabulary(12) == risk);
}

TEST_CASE("degenerate specs are rejected and suspicious ones warned about") {
    SyntheticSpec spec;
    spec.posts_min = 20;
    spec.posts_max = 10;
    CHECK_THROWS_AS(spec.validate(), ValidationError);
    spec = SyntheticSpec{};
    spec.positive_ratio = 1.5;
    CHECK_THROWS_AS(generate_synthetic(spec), ValidationError);
    spec = SyntheticSpec{};
    spec.onset_max = 50;
    CHECK_FALSE(spec.validate().empty());
}

TEST_CASE("depression-shaped preset has the reference table shape") {
    const auto c = generate_synthetic(depression_shaped_spec(7));
    const auto s = corpus_stats(c);
    CHECK(s.users == 175);
    CHECK(s.positives == 94);
    CHECK(s.max_posts <= 100);
    CHECK(s.min_posts >= 11);
    CHECK(s.mean_posts == doctest::Approx(35.7).epsilon(0.15));
    const auto text = format_stats(c, s);
    CHECK(text.find("mean") != std::string::npos);
    CHECK(text.find("max") != std::string::npos);
}

TEST_CASE("synthetic spec JSON round-trips") {
    SyntheticSpec spec;
    spec.seed = 99;
    spec.onset_max = 12;
    const nlohmann::json j = spec;
    const auto back = j.get<SyntheticSpec>();
    CHECK(nlohmann::json(back) == j);
}

TEST_CASE("delay checkpoints step by M up to the rounded maximum history") {
    Corpus c;
    c.users.push_back(numbered_user(35));
    CHECK(delay_checkpoints(10, c) == std::vector<int>{10, 20, 30, 40});
    c.users[0] = numbered_user(100);
    auto cps = delay_checkpoints(10, c);
    REQUIRE(cps.size() == 10);
    CHECK(cps.front() == 10);
    CHECK(cps.back() == 100);
    c.users[0] = numbered_user(3);
    CHECK(delay_checkpoints(1, c) == std::vector<int>{1, 2, 3});
    CHECK(checkpoint_at_or_after(35, 10) == 40);
    CHECK(checkpoint_at_or_after(40, 10) == 40);
    CHECK(checkpoint_at_or_after(1, 10) == 10);
}

TEST_CASE("build_window covers the last M posts read") {
    const auto u100 = numbered_user(100);
    auto w = build_window(u100, 20, 10);
    CHECK(w.begin == 10);
    CHECK(w.end == 20);
    CHECK(w.text == "p10 p11 p12 p13 p14 p15 p16 p17 p18 p19");

    w = build_window(numbered_user(4), 10, 10);
    CHECK(w.begin == 0);
    CHECK(w.end == 4);
    CHECK(w.text == "p0 p1 p2 p3");

    w = build_window(numbered_user(35), 40, 10);
    CHECK(w.begin == 25);
    CHECK(w.end == 35);

    CHECK_THROWS_AS(build_window(u100, 0, 10), ContractViolation);
}

TEST_CASE("checkpoint windows cover the whole history without gaps") {
    const auto u = numbered_user(47);
    std::size_t covered = 0;
    for (int k = 10; k <= 50; k += 10) {
        const auto w = build_window(u, k, 10);
        CHECK(w.begin <= covered);
        CHECK(w.end - w.begin == 10);
        covered = w.end;
    }
    CHECK(covered == 47);
}

TEST_CASE("timed input encoding") {
    TimedWindow w{"u", 10, "hoy es un día triste", 0, 1};
    CHECK(encode_timed_input(w) == "[CLS] hoy es un día triste [TIME] 10 [SEP]");
    CHECK(encode_timed_input({"u", 1, "x", 0, 1}) == "[CLS] x [TIME] 1 [SEP]");
    for (int k : {1, 2, 9, 10, 99, 12345, 1000000}) {
        const auto [text, back] = decode_timed_input(encode_timed_input({"u", k, "a b", 0, 1}));
        CHECK(back == k);
        CHECK(text == "a b");
    }
}

TEST_CASE("marker sanitisation keeps the encoding injective") {
    CHECK(sanitize_markers("a [SEP] b") == "a  b");
    CHECK(sanitize_markers("[TI[SEP]ME]") == "");
    const auto enc = encode_timed_input({"u", 5, "evil [TIME] 7 [SEP] tail", 0, 1});
    const auto [text, k] = decode_timed_input(enc);
    CHECK(k == 5);
    CHECK(text.find("[TIME]") == std::string::npos);
}
