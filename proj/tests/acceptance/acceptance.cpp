// Runs every acceptance criterion and prints one PASS/FAIL line per criterion.
// Exit status is non-zero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <thread>

#include "erd/cli.hpp"
#include "erd/corpus.hpp"
#include "erd/erdserver.hpp"
#include "erd/metrics.hpp"
#include "erd/model.hpp"
#include "erd/trainer.hpp"

using namespace erd;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

namespace {

struct Verdict {
    bool pass = false;
    std::string detail;
};

double seconds_since(Clock::time_point t0) {
    return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
    char buf[512];
    std::snprintf(buf, sizeof buf, f, args...);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

int cli(const std::vector<std::string>& args) {
    std::ostringstream out, err;
    const int code = run_cli(args, out, err);
    if (code != 0) {
        std::cerr << "erd";
        for (const auto& a : args) std::cerr << ' ' << a;
        std::cerr << " -> exit " << code << '\n' << err.str();
    }
    return code;
}

// --- criterion 1 -------------------------------------------------------------------

double case_sum_erde(const std::vector<int>& gold, const std::vector<int>& pred,
                     const std::vector<int>& ks, double c_fp, double c_fn, double c_tp, int theta) {
    double total = 0.0;
    for (std::size_t i = 0; i < gold.size(); ++i) {
        if (pred[i] == 1 && gold[i] == 0) total += c_fp;
        else if (pred[i] == 0 && gold[i] == 1) total += c_fn;
        else if (pred[i] == 1 && gold[i] == 1) total += c_tp * (1.0 - 1.0 / (1.0 + std::exp(ks[i] - theta)));
    }
    return total / static_cast<double>(gold.size());
}

Verdict metric_oracle() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(1);
    double worst = 0.0;
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng() % 20;
        std::vector<int> gold(n), pred(n), ks(n);
        Corpus c;
        c.name = "oracle";
        std::vector<Decision> ds;
        for (std::size_t i = 0; i < n; ++i) {
            gold[i] = static_cast<int>(rng() % 2);
            pred[i] = static_cast<int>(rng() % 2);
            const int total = 1 + static_cast<int>(rng() % 100);
            ks[i] = 1 + static_cast<int>(rng() % total);
            c.users.push_back(make_user("u" + std::to_string(i), label_from_int(gold[i]),
                                        std::vector<std::string>(total, "x")));
            ds.push_back({"u" + std::to_string(i), label_from_int(pred[i]), ks[i]});
        }
        MetricsConfig cfg;
        cfg.theta = trial % 3 == 0 ? 5 : 30;
        if (trial % 2) cfg.c_fp = static_cast<double>(rng() % 1000) / 1000.0;
        const double c_fp = cfg.resolved_c_fp(c);
        const double expect = case_sum_erde(gold, pred, ks, c_fp, cfg.c_fn, cfg.c_tp, cfg.theta);
        worst = std::max(worst, std::abs(erde(ds, c, cfg) - expect));
    }
    bool lc_ok = latency_cost(30, 30) == 0.5 && latency_cost(5, 5) == 0.5;
    double sym = 0.0;
    for (int theta : {5, 30}) {
        for (int d = 0; d <= 60; ++d) {
            sym = std::max(sym, std::abs(latency_cost(theta - d, theta) + latency_cost(theta + d, theta) - 1.0));
        }
    }
    const double secs = seconds_since(t0);
    return {worst <= 1e-12 && lc_ok && sym <= 1e-12 && secs < 5.0,
            fmt("max |erde - oracle| = %.3g over 1000 sets, lc(theta)=0.5 %s, symmetry err %.3g, %.2fs",
                worst, lc_ok ? "exact" : "WRONG", sym, secs)};
}

// --- criterion 2 -------------------------------------------------------------------

// Transliteration of the reference pseudo-code: CE per sample, a delay flag per
// sample, then the flag's constant replaces CE where set.
double reference_temporal_loss(const std::vector<double>& probs, const std::vector<int>& preds_labels,
                               const std::vector<int>& preds_times, const std::vector<int>& real_labels,
                               const std::vector<int>& real_times, int theta) {
    std::vector<double> cls_loss;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = std::clamp(probs[i], kProbClamp, 1.0 - kProbClamp);
        cls_loss.push_back(real_labels[i] == 1 ? -std::log(p) : -std::log1p(-p));
    }
    std::vector<int> delay_loss;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const int pred = preds_labels[i], real = real_labels[i];
        if ((pred == 1 && pred == real) && (real_times[i] < preds_times[i] || theta < preds_times[i])) {
            delay_loss.push_back(1);
        } else {
            delay_loss.push_back(0);
        }
    }
    std::vector<double> total_loss;
    for (std::size_t i = 0; i < cls_loss.size(); ++i) {
        if (delay_loss[i] == 1) total_loss.push_back(delay_loss[i]);
        else total_loss.push_back(cls_loss[i]);
    }
    double sum = 0.0;
    for (double v : total_loss) sum += v;
    return sum / static_cast<double>(total_loss.size());
}

Verdict loss_fidelity() {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    int exact = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng() % 12;
        std::vector<double> probs(n);
        std::vector<int> pl(n), rl(n), pt(n), rt(n);
        std::vector<Label> pl_l(n), rl_l(n);
        for (std::size_t i = 0; i < n; ++i) {
            probs[i] = trial % 10 == 0 ? std::round(u(rng)) : u(rng);
            pl[i] = probs[i] > 0.5 ? 1 : 0;
            rl[i] = static_cast<int>(rng() % 2);
            rt[i] = 1 + static_cast<int>(rng() % 100);
            pt[i] = 10 * (1 + static_cast<int>(rng() % 10));
            pl_l[i] = label_from_int(pl[i]);
            rl_l[i] = label_from_int(rl[i]);
        }
        const double got = temporal_loss(probs, pl_l, pt, rl_l, rt, 30, LossMode::constant_paper).loss;
        const double want = reference_temporal_loss(probs, pl, pt, rl, rt, 30);
        exact += got == want;
        worst = std::max(worst, std::abs(got - want));
    }
    const std::vector<double> p{0.7, 0.9, 0.2};
    const std::vector<Label> pl{Label::positive, Label::positive, Label::negative};
    const std::vector<int> pt{35, 10, 50}, rt{80, 80, 50};
    const double mixed = temporal_loss(p, pl, pt, pl, rt, 30, LossMode::constant_paper).loss;
    return {exact == 200 && std::abs(mixed - 0.4428) <= 1e-4,
            fmt("%d/200 batches bit-identical to the transliterated reference (max diff %.3g); "
                "mixed batch %.6f",
                exact, worst, mixed)};
}

// --- criterion 3 -------------------------------------------------------------------

Verdict gradient_check() {
    const auto t0 = Clock::now();
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n01(0.0, 0.7);
    FeatureConfig f;
    f.dim = 48;
    const auto vocab = neutral_vocabulary(20);
    double worst_ce = 0.0, worst_tl = 0.0;
    for (int inst = 0; inst < 50; ++inst) {
        const Mode mode = inst % 2 ? Mode::sliding_window : Mode::temporal;
        auto params = ModelParams::zeros(f, mode);
        for (auto& w : params.weights) w = n01(rng);
        const std::size_t n = 2 + rng() % 6;
        std::vector<Sample> batch;
        std::vector<Label> pl(n), rl(n);
        std::vector<int> pt(n), rt(n);
        for (std::size_t i = 0; i < n; ++i) {
            std::string text;
            for (int w = 0; w < 5; ++w) text += vocab[rng() % vocab.size()] + ' ';
            const int k = 10 * (1 + static_cast<int>(rng() % 10));
            rl[i] = label_from_int(static_cast<int>(rng() % 2));
            batch.push_back({featurize(f, text, k, mode), rl[i]});
            pt[i] = k;
            rt[i] = 5 + static_cast<int>(rng() % 100);
            pl[i] = label_from_int(static_cast<int>(rng() % 2));
        }
        auto tl = [&](const ModelParams& prm) {
            std::vector<double> probs;
            for (const auto& s : batch) probs.push_back(predict_proba(prm, s.features).probability);
            return temporal_loss(probs, pl, pt, rl, rt, 30, LossMode::weighted_ce);
        };
        auto ce = [&](const ModelParams& prm) { return ce_loss_and_grad(prm, batch).loss; };

        const auto ce_grad = ce_loss_and_grad(params, batch).grad;
        const auto tl0 = tl(params);
        std::vector<double> tl_grad(params.size(), 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            accumulate_logit_gradient(tl_grad, params, batch[i].features, tl0.logit_grad[i]);
        }
        const double h = 1e-5;
        for (std::size_t j = 0; j < params.size(); ++j) {
            const double w = params.weights[j];
            params.weights[j] = w + h;
            const double ce_up = ce(params), tl_up = tl(params).loss;
            params.weights[j] = w - h;
            const double ce_dn = ce(params), tl_dn = tl(params).loss;
            params.weights[j] = w;
            auto rel = [](double fd, double an) {
                return std::abs(fd - an) / std::max({std::abs(fd), std::abs(an), 1e-6});
            };
            worst_ce = std::max(worst_ce, rel((ce_up - ce_dn) / (2 * h), ce_grad[j]));
            worst_tl = std::max(worst_tl, rel((tl_up - tl_dn) / (2 * h), tl_grad[j]));
        }
    }
    const double secs = seconds_since(t0);
    return {worst_ce < 1e-5 && worst_tl < 1e-5 && secs < 10.0,
            fmt("max relative error CE %.3g, weighted temporal loss %.3g over 50 instances, %.2fs",
                worst_ce, worst_tl, secs)};
}

// --- full pipeline shared by criteria 4, 6, 8, 9 ----------------------------------

struct PipelineRun {
    fs::path dir;
    bool ok = false;
    double seconds = 0.0;
};

PipelineRun run_pipeline(const fs::path& dir, const fs::path& scratch) {
    PipelineRun r{dir};
    fs::remove_all(dir);
    const auto t0 = Clock::now();
    const auto rd = dir.string();
    const std::vector<std::string> base{"--run-dir", rd, "--seed", "7"};
    auto with = [&](std::vector<std::string> extra) {
        auto a = base;
        a.insert(a.end(), extra.begin(), extra.end());
        return cli(a);
    };
    if (with({"generate", "--preset", "benchmark", "--split", "train"}) != 0) return r;
    if (with({"generate", "--preset", "benchmark", "--split", "test"}) != 0) return r;
    if (with({"train", "--mode", "temporal"}) != 0) return r;
    if (with({"train", "--mode", "sliding_window"}) != 0) return r;

    const auto port_file = scratch / (dir.filename().string() + ".port");
    fs::remove(port_file);
    int serve_code = -1;
    std::thread server([&] {
        serve_code = with({"serve", "--port", "0", "--port-file", port_file.string(), "--max-runs", "2"});
    });
    for (int i = 0; i < 500 && !fs::exists(port_file); ++i) {
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
    auto port = slurp(port_file);
    while (!port.empty() && (port.back() == '\n' || port.back() == '\r')) port.pop_back();
    const std::string endpoint = "http://127.0.0.1:" + port;
    int client_codes = 0;
    for (const char* model : {"temporal", "sliding_window"}) {
        const auto ckpt = (dir / "models" / model / "best.ckpt").string();
        client_codes |= with({"client", "--endpoint", endpoint, "--checkpoint", ckpt});
    }
    if (client_codes != 0) std::raise(SIGINT);  // serve stops on SIGINT
    server.join();
    if (serve_code != 0 || client_codes != 0) return r;

    for (const char* model : {"temporal", "sliding_window"}) {
        const auto ckpt = (dir / "models" / model / "best.ckpt").string();
        if (with({"evaluate", "--checkpoint", ckpt}) != 0) return r;
        if (with({"client", "--checkpoint", ckpt, "--window-mode", "checkpoint"}) != 0) return r;
    }
    if (with({"report"}) != 0) return r;
    r.ok = true;
    r.seconds = seconds_since(t0);
    return r;
}

MetricsReport read_report(const fs::path& p) {
    return nlohmann::json::parse(slurp(p)).get<MetricsReport>();
}

Verdict learning_efficacy(const PipelineRun& run) {
    if (!run.ok) return {false, "pipeline failed"};
    const auto r = read_report(run.dir / "client" / "temporal_per_round" / "report.json");
    const double erde30 = r.erde.at(30);
    return {r.f1 >= 0.80 && erde30 <= 0.25 && run.seconds < 120.0,
            fmt("temporal via HTTP mock-server: F1 %.4f (>= 0.80), ERDE30 %.4f (<= 0.25); "
                "whole pipeline %.1fs",
                r.f1, erde30, run.seconds)};
}

// --- criterion 5 -------------------------------------------------------------------

double seeded_erde30(std::uint64_t seed, Mode mode) {
    const auto train_all = generate_synthetic(benchmark_spec(seed, Split::train));
    auto test = generate_synthetic(benchmark_spec(seed, Split::test));
    TrainConfig cfg;
    cfg.seed = seed;
    cfg.mode = mode;
    const auto [train, valid] = stratified_split(train_all, cfg.valid_fraction, cfg.seed);
    const auto fitted = fit(train, valid, cfg);
    MockServer server;
    server.add_corpus(test);
    InProcessTransport transport(server);
    return client_run(transport, test.name, fitted.epoch_params[fitted.best_epoch], PolicyConfig{})
        .report.erde.at(30);
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const auto n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

Verdict ablation_direction() {
    std::vector<double> temporal, sliding;
    std::string per_seed;
    for (std::uint64_t seed = 7; seed < 12; ++seed) {
        temporal.push_back(seeded_erde30(seed, Mode::temporal));
        sliding.push_back(seeded_erde30(seed, Mode::sliding_window));
        per_seed += fmt(" %llu:%.3f/%.3f", static_cast<unsigned long long>(seed), temporal.back(),
                        sliding.back());
    }
    const double mt = median(temporal), ms = median(sliding);
    return {mt <= ms, fmt("median ERDE30 temporal %.4f <= sliding_window %.4f (seed:temporal/sliding%s)",
                          mt, ms, per_seed.c_str())};
}

// --- criterion 6 -------------------------------------------------------------------

Verdict offline_server_agreement(const PipelineRun& run) {
    if (!run.ok) return {false, "pipeline failed"};
    const auto test = load_corpus(run.dir / "corpus" / "test.jsonl");
    std::size_t mismatched = 0, compared = 0, late = 0, flagged = 0;
    bool reports_equal = true;
    for (const char* model : {"temporal", "sliding_window"}) {
        const auto params = load_checkpoint(run.dir / "models" / model / "best.ckpt").params;
        TrainConfig cfg;
        const PolicyConfig policy;
        cfg.decision_threshold = policy.threshold;
        cfg.min_delay = policy.min_delay;
        const auto offline = validate_epoch(params, test, cfg);

        MockServer server;
        server.add_corpus(test);
        InProcessTransport t(server);
        auto ckpt_policy = policy;
        ckpt_policy.window_mode = WindowMode::checkpoint;
        const auto ckpt = client_run(t, test.name, params, ckpt_policy);
        const auto fine = client_run(t, test.name, params, policy);
        reports_equal = reports_equal && ckpt.report == offline.report;

        std::map<std::string, Decision> by_fine;
        for (const auto& d : server.snapshot(fine.run.run_id).decisions) by_fine[d.user_id] = d;
        std::map<std::string, Decision> by_offline;
        for (const auto& d : offline.decisions) by_offline[d.user_id] = d;
        for (const auto& d : server.snapshot(ckpt.run.run_id).decisions) {
            ++compared;
            const auto& o = by_offline.at(d.user_id);
            mismatched += o.verdict != d.verdict || o.k != d.k;
            if (d.verdict != Label::positive) continue;
            ++flagged;
            const auto& f = by_fine.at(d.user_id);
            if (f.verdict != Label::positive || f.k > d.k) ++late;
        }
    }
    return {reports_equal && mismatched == 0 && late == 0,
            fmt("checkpoint client vs validate_epoch: reports %s, %zu/%zu decisions differ; "
                "per-round client later than checkpoint client for %zu of %zu flagged users",
                reports_equal ? "identical" : "DIFFER", mismatched, compared, late, flagged)};
}

// --- criterion 7 -------------------------------------------------------------------

Verdict policy_suite() {
    int failed = 0, total = 0;
    auto expect = [&](bool ok) {
        ++total;
        failed += !ok;
    };
    PolicyConfig p;
    p.min_delay = 10;
    expect(policy_decide(0.75, 12, p) == Action::alarm);
    expect(policy_decide(0.75, 10, p) == Action::alarm);
    expect(policy_decide(0.75, 9, p) == Action::proceed);
    expect(policy_decide(0.7, 12, p) == Action::proceed);
    expect(policy_decide(std::nextafter(0.7, 1.0), 12, p) == Action::alarm);
    p.min_delay = 5;
    expect(policy_decide(0.95, 3, p) == Action::proceed);
    expect(policy_decide(0.95, 5, p) == Action::alarm);
    expect(policy_decide(0.0, 100, p) == Action::proceed);
    expect(policy_decide(1.0, 1, PolicyConfig{0.7, 1}) == Action::alarm);

    // Exhaustion negatives are never blocked by minDelay; alarms wait for it.
    Corpus c;
    c.name = "policy";
    c.users.push_back(make_user("three", Label::positive, {"a", "b", "c"}));
    c.users.push_back(make_user("eight", Label::positive, std::vector<std::string>(8, "d")));
    c.users.push_back(make_user("one", Label::negative, {"e"}));
    MockServer server;
    server.add_corpus(c);
    InProcessTransport t(server);
    auto confident = ModelParams::zeros(FeatureConfig{}, Mode::temporal);
    confident.weights[confident.bias_index()] = 10.0;
    const auto res = client_run(t, "policy", confident, PolicyConfig{});
    std::map<std::string, Decision> d;
    for (const auto& x : server.snapshot(res.run.run_id).decisions) d[x.user_id] = x;
    expect(d.at("three").verdict == Label::negative && d.at("three").k == 3);
    expect(d.at("one").verdict == Label::negative && d.at("one").k == 1);
    expect(d.at("eight").verdict == Label::positive && d.at("eight").k == 5);

    auto silent = ModelParams::zeros(FeatureConfig{}, Mode::temporal);
    silent.weights[silent.bias_index()] = -10.0;
    const auto quiet = client_run(t, "policy", silent, PolicyConfig{});
    d.clear();
    for (const auto& x : server.snapshot(quiet.run.run_id).decisions) d[x.user_id] = x;
    expect(d.at("eight").verdict == Label::negative && d.at("eight").k == 8);
    return {failed == 0, fmt("%d/%d boundary cases as specified", total - failed, total)};
}

// --- criterion 8 -------------------------------------------------------------------

Verdict determinism(const PipelineRun& a, const PipelineRun& b) {
    if (!a.ok || !b.ok) return {false, "pipeline failed"};
    std::vector<std::string> files_a, files_b;
    for (const auto& e : fs::recursive_directory_iterator(a.dir)) {
        if (e.is_regular_file()) files_a.push_back(fs::relative(e.path(), a.dir).generic_string());
    }
    for (const auto& e : fs::recursive_directory_iterator(b.dir)) {
        if (e.is_regular_file()) files_b.push_back(fs::relative(e.path(), b.dir).generic_string());
    }
    std::sort(files_a.begin(), files_a.end());
    std::sort(files_b.begin(), files_b.end());
    if (files_a != files_b) return {false, "the two runs wrote different file sets"};
    std::vector<std::string> differing;
    std::size_t ckpts = 0, logs = 0, reports = 0, corpora = 0;
    for (const auto& rel : files_a) {
        auto x = slurp(a.dir / rel), y = slurp(b.dir / rel);
        if (rel == "manifest.json") {
            auto jx = nlohmann::json::parse(x), jy = nlohmann::json::parse(y);
            jx.erase("metadata");
            jy.erase("metadata");
            x = jx.dump();
            y = jy.dump();
        }
        if (x != y) differing.push_back(rel);
        if (rel.ends_with(".ckpt")) ++ckpts;
        if (rel.ends_with("decision_log.csv")) ++logs;
        if (rel.ends_with("report.json") || rel.ends_with("report.csv")) ++reports;
        if (rel.rfind("corpus/", 0) == 0) ++corpora;
    }
    std::string first = differing.empty() ? "" : " first: " + differing.front();
    return {differing.empty() && ckpts > 0 && logs > 0 && reports > 0 && corpora > 0,
            fmt("%zu files compared (%zu corpus, %zu checkpoints, %zu decision logs, %zu reports), "
                "%zu differ%s",
                files_a.size(), corpora, ckpts, logs, reports, differing.size(), first.c_str())};
}

// --- criterion 9 -------------------------------------------------------------------

Verdict probe(const PipelineRun& run) {
    if (!run.ok) return {false, "pipeline failed"};
    const auto risk = risk_vocabulary(12);
    const auto neutral = neutral_vocabulary(30);
    const std::string text = neutral[0] + ' ' + risk[0] + ' ' + neutral[1] + ' ' + risk[1];
    std::vector<int> times;
    for (int t = 10; t <= 100; t += 10) times.push_back(t);
    auto spread = [&](const char* model, double& lo, double& hi) {
        const auto params = load_checkpoint(run.dir / "models" / model / "best.ckpt").params;
        const auto pts = probe_time_sensitivity(params, text, times, 0.7);
        lo = 1.0;
        hi = 0.0;
        for (const auto& pt : pts) {
            lo = std::min(lo, pt.probability);
            hi = std::max(hi, pt.probability);
        }
    };
    double tlo, thi, slo, shi;
    spread("temporal", tlo, thi);
    spread("sliding_window", slo, shi);
    return {thi - tlo > 0.01 && shi == slo,
            fmt("temporal curve spans [%.4f, %.4f] (spread %.4f > 0.01); sliding_window spread %.3g",
                tlo, thi, thi - tlo, shi - slo)};
}

}  // namespace

int main(int argc, char** argv) {
    const fs::path work = argc > 1 ? fs::path(argv[1]) : fs::temp_directory_path() / "erd_acceptance";
    fs::create_directories(work);

    std::vector<std::pair<std::string, std::function<Verdict()>>> criteria;
    PipelineRun first, second;
    bool pipelines_done = false;
    auto pipelines = [&] {
        if (!pipelines_done) {
            first = run_pipeline(work / "run_a", work);
            second = run_pipeline(work / "run_b", work);
            pipelines_done = true;
        }
    };
    criteria.emplace_back("metric oracle equivalence", metric_oracle);
    criteria.emplace_back("loss fidelity", loss_fidelity);
    criteria.emplace_back("gradient check", gradient_check);
    criteria.emplace_back("learning efficacy", [&] {
        pipelines();
        return learning_efficacy(first);
    });
    criteria.emplace_back("ablation direction", ablation_direction);
    criteria.emplace_back("offline/server agreement", [&] {
        pipelines();
        return offline_server_agreement(first);
    });
    criteria.emplace_back("decision policy", policy_suite);
    criteria.emplace_back("determinism", [&] {
        pipelines();
        return determinism(first, second);
    });
    criteria.emplace_back("time-sensitivity probe", [&] {
        pipelines();
        return probe(first);
    });

    int failures = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        Verdict v;
        try {
            v = criteria[i].second();
        } catch (const std::exception& e) {
            v = {false, std::string("exception: ") + e.what()};
        }
        failures += !v.pass;
        std::cout << "criterion " << i + 1 << " [" << (v.pass ? "PASS" : "FAIL") << "] "
                  << criteria[i].first << ": " << v.detail << std::endl;
    }
    return failures == 0 ? 0 : 1;
}
