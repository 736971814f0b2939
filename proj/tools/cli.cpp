#include "erd/cli.hpp"

#include <atomic>
#include <chrono>
#include <csignal>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "erd/errors.hpp"
#include "erd/http.hpp"
#include "erd/report.hpp"

namespace erd {

namespace fs = std::filesystem;
using nlohmann::json;

void to_json(json& j, const PipelineConfig& c) {
    j = json{{"paths",
              {{"run_dir", c.paths.run_dir},
               {"train_corpus", c.paths.train_corpus},
               {"test_corpus", c.paths.test_corpus},
               {"checkpoint", c.paths.checkpoint}}},
             {"train", c.train},
             {"policy", c.policy},
             {"metrics", c.metrics},
             {"synthetic", c.synthetic}};
    j["train"].erase("metrics");  // the top-level block is authoritative
}

void from_json(const json& j, PipelineConfig& c) {
    const PipelineConfig d;
    if (j.contains("paths")) {
        const auto& p = j.at("paths");
        c.paths.run_dir = p.value("run_dir", d.paths.run_dir);
        c.paths.train_corpus = p.value("train_corpus", d.paths.train_corpus);
        c.paths.test_corpus = p.value("test_corpus", d.paths.test_corpus);
        c.paths.checkpoint = p.value("checkpoint", d.paths.checkpoint);
    }
    c.train = j.value("train", d.train);
    c.policy = j.value("policy", d.policy);
    c.metrics = j.value("metrics", d.metrics);
    c.synthetic = j.value("synthetic", d.synthetic);
    c.train.metrics = c.metrics;
}

PipelineConfig load_pipeline_config(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open config '" + path.string() + "'");
    json j;
    try {
        j = json::parse(in);
    } catch (const json::parse_error& e) {
        throw ParseError(0, "config '" + path.string() + "': " + e.what());
    }
    return j.get<PipelineConfig>();
}

namespace {

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return buf.str();
}

std::string utc_now() {
    const auto t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

std::string hex64(std::uint64_t v) {
    char buf[24];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
    return buf;
}

// Writes artifacts under the run directory and keeps manifest.json in step.
class RunDir {
public:
    RunDir(fs::path root, std::string command, std::uint64_t seed)
        : root_(std::move(root)), command_(std::move(command)), seed_(seed) {}

    const fs::path& root() const { return root_; }
    fs::path path(const fs::path& rel) const { return root_ / rel; }

    fs::path write(const fs::path& rel, const std::string& content) {
        const auto full = root_ / rel;
        fs::create_directories(full.parent_path());
        std::ofstream out(full, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot write '" + full.string() + "'");
        out << content;
        if (!out) throw IoError("short write to '" + full.string() + "'");
        record(rel, content);
        return full;
    }

    // For files written by library helpers.
    void adopt(const fs::path& full) {
        record(fs::relative(full, root_), read_file(full));
    }

    void save_manifest() {
        const auto manifest_path = root_ / "manifest.json";
        json manifest = {{"artifacts", json::object()}, {"metadata", json::object()}};
        if (fs::exists(manifest_path)) {
            try {
                manifest = json::parse(read_file(manifest_path));
            } catch (const json::exception&) {
                // A damaged manifest is rebuilt from this command's artifacts.
            }
        }
        for (auto& [rel, entry] : entries_) manifest["artifacts"][rel] = entry;
        manifest["metadata"]["updated_at"] = utc_now();
        manifest["metadata"]["last_command"] = command_;
        fs::create_directories(root_);
        std::ofstream out(manifest_path, std::ios::binary | std::ios::trunc);
        out << manifest.dump(2) << '\n';
    }

private:
    void record(const fs::path& rel, const std::string& content) {
        entries_[rel.generic_string()] = {{"bytes", content.size()},
                                          {"fnv1a64", hex64(feature_hash(content, 0))},
                                          {"command", command_},
                                          {"seed", seed_}};
    }

    fs::path root_;
    std::string command_;
    std::uint64_t seed_;
    std::map<std::string, json> entries_;
};

struct Globals {
    std::string config;
    std::optional<std::uint64_t> seed;
    bool verbose = false;
    std::string run_dir;
};

PipelineConfig resolve_config(const Globals& g) {
    PipelineConfig c = g.config.empty() ? PipelineConfig{} : load_pipeline_config(g.config);
    if (!g.run_dir.empty()) c.paths.run_dir = g.run_dir;
    if (g.seed) {
        c.train.seed = *g.seed;
        c.synthetic.seed = *g.seed;
    }
    return c;
}

fs::path default_corpus(const PipelineConfig& c, const std::string& explicit_path, const std::string& configured,
                        const char* split) {
    if (!explicit_path.empty()) return explicit_path;
    if (!configured.empty()) return configured;
    return fs::path(c.paths.run_dir) / "corpus" / (std::string(split) + ".jsonl");
}

fs::path default_checkpoint(const PipelineConfig& c, const std::string& explicit_path) {
    if (!explicit_path.empty()) return explicit_path;
    if (!c.paths.checkpoint.empty()) return c.paths.checkpoint;
    return fs::path(c.paths.run_dir) / "models" / to_string(c.train.mode) / "best.ckpt";
}

// models/<name>/best.ckpt -> <name>; otherwise the file stem.
std::string model_name_for(const fs::path& checkpoint) {
    if (checkpoint.filename() == "best.ckpt" && checkpoint.has_parent_path()) {
        return checkpoint.parent_path().filename().string();
    }
    return checkpoint.stem().string();
}

std::string decisions_csv(std::span<const Decision> decisions) {
    std::string out = "user_id,decision,k\n";
    for (const auto& d : decisions) {
        out += d.user_id + ',' + std::to_string(to_int(d.verdict)) + ',' + std::to_string(d.k) + '\n';
    }
    return out;
}

std::string epoch_line(const EpochLog& log) {
    char buf[200];
    std::snprintf(buf, sizeof buf, "epoch %d  train_loss %.4f  valid_loss %.4f  acc %.3f  ERDE %.4f",
                  log.epoch, log.train.loss, log.valid.loss, log.valid_accuracy, log.valid_erde);
    return buf;
}

// A sentence built from the generator's risk and neutral pools.
std::string default_probe_text() {
    const auto risk = risk_vocabulary(12);
    const auto neutral = neutral_vocabulary(30);
    return neutral[0] + ' ' + risk[0] + ' ' + neutral[1] + ' ' + risk[1] + ' ' + neutral[2] + ' ' + risk[2];
}

// --- commands ------------------------------------------------------------------------------

struct GenerateArgs {
    std::string preset = "config";
    std::string split = "train";
    std::optional<std::size_t> users;
    std::string out;
};

int cmd_generate(const Globals& g, const GenerateArgs& a, std::ostream& out, std::ostream& err) {
    auto cfg = resolve_config(g);
    const auto split = split_from_string(a.split);
    SyntheticSpec spec;
    if (a.preset == "benchmark") {
        spec = benchmark_spec(cfg.synthetic.seed, split);
    } else if (a.preset == "depression") {
        spec = depression_shaped_spec(cfg.synthetic.seed);
        spec.split = split;
    } else if (a.preset == "config") {
        spec = cfg.synthetic;
        spec.split = split;
        spec.name = a.split;
    } else {
        throw ValidationError("unknown preset '" + a.preset + "' (config, benchmark, depression)");
    }
    if (a.users) spec.n_users = *a.users;
    for (const auto& w : spec.validate()) err << "warning: " << w << '\n';

    const auto corpus = generate_synthetic(spec);
    RunDir run(cfg.paths.run_dir, "generate", spec.seed);
    if (a.out.empty()) {
        const auto rel = fs::path("corpus") / (a.split + ".jsonl");
        run.write(rel, serialize_corpus(corpus));
        out << "wrote " << run.path(rel).string() << '\n';
    } else {
        save_corpus(corpus, a.out);
        out << "wrote " << a.out << '\n';
    }
    run.write(fs::path("corpus") / (a.split + ".spec.json"), json(spec).dump(2) + '\n');
    out << format_stats(corpus, corpus_stats(corpus));
    run.save_manifest();
    return kExitOk;
}

struct TrainArgs {
    std::string train;
    std::string valid;
    std::string mode;
    std::string loss_mode;
    std::optional<int> epochs;
    std::optional<double> lr;
    std::string name;
};

int cmd_train(const Globals& g, const TrainArgs& a, std::ostream& out, std::ostream&) {
    auto cfg = resolve_config(g);
    auto tc = cfg.train;
    if (!a.mode.empty()) tc.mode = mode_from_string(a.mode);
    if (!a.loss_mode.empty()) tc.loss.mode = loss_mode_from_string(a.loss_mode);
    if (a.epochs) tc.epochs = *a.epochs;
    if (a.lr) tc.optimizer.learning_rate = *a.lr;
    tc.validate();

    const auto train_path = default_corpus(cfg, a.train, cfg.paths.train_corpus, "train");
    Corpus train = load_corpus(train_path);
    Corpus valid;
    if (!a.valid.empty()) {
        valid = load_corpus(a.valid);
    } else {
        std::tie(train, valid) = stratified_split(train, tc.valid_fraction, tc.seed);
    }

    const std::string name = a.name.empty() ? to_string(tc.mode) : a.name;
    const fs::path model_dir = fs::path("models") / name;
    RunDir run(cfg.paths.run_dir, "train", tc.seed);
    run.write(model_dir / "config.json", json(tc).dump(2) + '\n');

    std::string epochs_jsonl;
    char ckpt_name[32];
    const auto result = fit(train, valid, tc, [&](const EpochLog& log, const ModelParams& params,
                                                  const OptimizerState& opt) {
        std::snprintf(ckpt_name, sizeof ckpt_name, "epoch_%02d.ckpt", log.epoch);
        run.write(model_dir / "checkpoints" / ckpt_name, serialize_checkpoint(params, &opt));
        epochs_jsonl += json(log).dump() + '\n';
        if (g.verbose) out << epoch_line(log) << '\n';
    });
    run.write(model_dir / "epochs.jsonl", epochs_jsonl);

    const auto& best_log = result.logs[result.best_epoch];
    run.write(model_dir / "best.ckpt", serialize_checkpoint(result.epoch_params[result.best_epoch], nullptr));
    const json marker = {{"best_epoch", result.best_epoch},
                         {"checkpoint", "best.ckpt"},
                         {"mode", to_string(tc.mode)},
                         {"seed", tc.seed},
                         {"score", tc.w_acc * best_log.valid_accuracy + tc.w_erde * (1.0 - best_log.valid_erde)},
                         {"valid_accuracy", best_log.valid_accuracy},
                         {"valid_erde", best_log.valid_erde}};
    run.write(model_dir / "best.json", marker.dump(2) + '\n');
    out << "best epoch " << result.best_epoch << " (" << epoch_line(best_log) << ")\n";
    out << "wrote " << run.path(model_dir).string() << '\n';
    run.save_manifest();
    return kExitOk;
}

struct EvaluateArgs {
    std::string checkpoint;
    std::string corpus;
    std::string name;
};

int cmd_evaluate(const Globals& g, const EvaluateArgs& a, std::ostream& out, std::ostream&) {
    auto cfg = resolve_config(g);
    const auto ckpt_path = default_checkpoint(cfg, a.checkpoint);
    const auto params = load_checkpoint(ckpt_path).params;
    const auto corpus = load_corpus(default_corpus(cfg, a.corpus, cfg.paths.test_corpus, "test"));

    // Offline replay with the deployment policy, so it matches the checkpoint client.
    auto tc = cfg.train;
    tc.mode = params.mode;
    tc.window_size = params.features.window_size;
    tc.features = params.features;
    tc.decision_threshold = cfg.policy.threshold;
    tc.min_delay = cfg.policy.min_delay;
    tc.metrics = cfg.metrics;
    const auto v = validate_epoch(params, corpus, tc);

    const std::string name = a.name.empty() ? model_name_for(ckpt_path) : a.name;
    RunDir run(cfg.paths.run_dir, "evaluate", params.seed);
    const fs::path dir = fs::path("eval") / name;
    run.write(dir / "report.json", json(v.report).dump(2) + '\n');
    run.write(dir / "report.csv", report_csv(v.report));
    run.write(dir / "decisions.csv", decisions_csv(v.decisions));
    out << report_csv(v.report);
    run.save_manifest();
    return kExitOk;
}

std::atomic<bool> g_stop_requested{false};

void on_signal(int) { g_stop_requested.store(true); }

struct ServeArgs {
    std::vector<std::string> corpora;
    std::string host = "127.0.0.1";
    int port = 8080;
    std::string port_file;
    int max_runs = 0;
};

int cmd_serve(const Globals& g, const ServeArgs& a, std::ostream& out, std::ostream&) {
    auto cfg = resolve_config(g);
    MockServer server(cfg.metrics);
    if (a.corpora.empty()) {
        server.add_corpus(load_corpus(default_corpus(cfg, "", cfg.paths.test_corpus, "test")));
    }
    for (const auto& path : a.corpora) server.add_corpus(load_corpus(path));

    HttpServer http(server);
    const int port = http.bind(a.host, a.port);
    std::atomic<int> served{0};
    http.on_results([&](const std::string&) { served.fetch_add(1); });
    http.start();
    if (!a.port_file.empty()) {
        const auto tmp = a.port_file + ".tmp";
        std::ofstream(tmp) << port << '\n';
        fs::rename(tmp, a.port_file);
    }
    out << "listening on http://" << a.host << ':' << port << " corpora:";
    for (const auto& name : server.corpora()) out << ' ' << name;
    out << std::endl;

    g_stop_requested.store(false);
    auto previous_int = std::signal(SIGINT, on_signal);
    auto previous_term = std::signal(SIGTERM, on_signal);
    while (!g_stop_requested.load() && (a.max_runs <= 0 || served.load() < a.max_runs)) {
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
    }
    std::signal(SIGINT, previous_int);
    std::signal(SIGTERM, previous_term);
    http.stop();
    if (g.verbose) out << "served " << served.load() << " run(s)\n";
    return kExitOk;
}

struct ClientArgs {
    std::string endpoint;
    std::string corpus;
    std::string corpus_name;
    std::string checkpoint;
    std::optional<double> threshold;
    std::optional<int> min_delay;
    std::string window_mode;
    std::string name;
};

int cmd_client(const Globals& g, const ClientArgs& a, std::ostream& out, std::ostream&) {
    auto cfg = resolve_config(g);
    auto policy = cfg.policy;
    if (a.threshold) policy.threshold = *a.threshold;
    if (a.min_delay) policy.min_delay = *a.min_delay;
    if (!a.window_mode.empty()) policy.window_mode = window_mode_from_string(a.window_mode);
    policy.validate();

    const auto ckpt_path = default_checkpoint(cfg, a.checkpoint);
    const auto params = load_checkpoint(ckpt_path).params;

    ClientResult result;
    if (!a.endpoint.empty()) {
        if (!a.corpus.empty()) throw ValidationError("--endpoint and --corpus are mutually exclusive");
        HttpTransport transport(a.endpoint);
        result = client_run(transport, a.corpus_name.empty() ? "test" : a.corpus_name, params, policy);
    } else {
        auto corpus = load_corpus(default_corpus(cfg, a.corpus, cfg.paths.test_corpus, "test"));
        const auto corpus_name = corpus.name;
        MockServer server(cfg.metrics);
        server.add_corpus(std::move(corpus));
        InProcessTransport transport(server);
        result = client_run(transport, corpus_name, params, policy);
    }

    const std::string name = a.name.empty()
                                 ? model_name_for(ckpt_path) + "_" + to_string(policy.window_mode)
                                 : a.name;
    RunDir run(cfg.paths.run_dir, "client", params.seed);
    const fs::path dir = fs::path("client") / name;
    run.write(dir / "decision_log.csv", decision_log_csv(result.log));
    run.write(dir / "report.json", json(result.report).dump(2) + '\n');
    run.write(dir / "report.csv", report_csv(result.report));
    run.write(dir / "policy.json", json(policy).dump(2) + '\n');
    out << report_csv(result.report);
    run.save_manifest();
    return kExitOk;
}

struct ReportArgs {
    std::vector<std::string> models;
    std::string probe_text;
};

std::optional<MetricsReport> read_report(const fs::path& path) {
    if (!fs::exists(path)) return std::nullopt;
    return json::parse(read_file(path)).get<MetricsReport>();
}

int cmd_report(const Globals& g, const ReportArgs& a, std::ostream& out, std::ostream& err) {
    auto cfg = resolve_config(g);
    const fs::path root = cfg.paths.run_dir;
    std::vector<std::string> models = a.models;
    if (models.empty() && fs::is_directory(root / "models")) {
        for (const auto& entry : fs::directory_iterator(root / "models")) {
            if (entry.is_directory()) models.push_back(entry.path().filename().string());
        }
        std::sort(models.begin(), models.end());
    }
    if (models.empty()) throw ValidationError("no trained models under '" + (root / "models").string() + "'");

    RunDir run(root, "report", cfg.train.seed);
    const std::string text = a.probe_text.empty() ? default_probe_text() : a.probe_text;
    const auto times = default_probe_times();
    std::vector<ComparisonRow> rows;
    for (const auto& model : models) {
        const auto model_dir = root / "models" / model;
        std::vector<EpochLog> logs;
        const auto jsonl = model_dir / "epochs.jsonl";
        if (fs::exists(jsonl)) {
            std::istringstream lines(read_file(jsonl));
            std::string line;
            while (std::getline(lines, line)) {
                if (!line.empty()) logs.push_back(json::parse(line).get<EpochLog>());
            }
        }
        if (logs.empty()) throw ValidationError("no epoch logs in '" + jsonl.string() + "'");

        for (const auto& path : export_timeline(logs, root / "report" / model, cfg.train.loss.theta)) {
            run.adopt(path);
        }

        const auto params = load_checkpoint(model_dir / "best.ckpt").params;
        const auto points = probe_time_sensitivity(params, text, times, cfg.policy.threshold);
        run.write(fs::path("report") / model / "probe.csv", probe_csv(points));
        run.write(fs::path("report") / model / "probe.svg",
                  probe_svg(points, cfg.policy.threshold, model + ": \"" + text + "\""));

        if (auto r = read_report(root / "eval" / model / "report.json")) rows.push_back({model, "offline", *r});
        if (auto r = read_report(root / "client" / (model + "_checkpoint") / "report.json")) {
            rows.push_back({model, "server", *r});
        }
        if (auto r = read_report(root / "client" / (model + "_per_round") / "report.json")) {
            rows.push_back({model, "server_per_round", *r});
        }
    }
    if (rows.empty()) {
        err << "note: no evaluate/client reports found; comparison table is empty\n";
    }
    run.write(fs::path("report") / "comparison.csv", comparison_csv(rows));
    out << comparison_csv(rows);
    run.save_manifest();
    return kExitOk;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Temporal fine-tuning for early risk detection", "erd"};
    app.require_subcommand(1);
    Globals g;
    app.add_option("--config", g.config, "JSON pipeline config")->check(CLI::ExistingFile);
    app.add_option("--seed", g.seed, "Seed for every random choice (overrides the config)");
    app.add_option("--run-dir", g.run_dir, "Output directory (default from config, else ./run)");
    app.add_flag("-v,--verbose", g.verbose, "Progress output");

    GenerateArgs gen;
    auto* generate = app.add_subcommand("generate", "Write a synthetic corpus and print its statistics");
    generate->add_option("--preset", gen.preset, "config | benchmark | depression")->capture_default_str();
    generate->add_option("--split", gen.split, "train | trial | test")->capture_default_str();
    generate->add_option("--users", gen.users, "Override the number of users");
    generate->add_option("--out", gen.out, "Write the corpus here instead of <run-dir>/corpus/<split>.jsonl");

    TrainArgs tr;
    auto* train = app.add_subcommand("train", "Fit a model with the delay-scheme training loop");
    train->add_option("--train", tr.train, "Training corpus (JSONL)");
    train->add_option("--valid", tr.valid, "Validation corpus; default is a stratified split of --train");
    train->add_option("--mode", tr.mode, "temporal | sliding_window");
    train->add_option("--loss-mode", tr.loss_mode, "constant_paper | weighted_ce");
    train->add_option("--epochs", tr.epochs);
    train->add_option("--lr", tr.lr, "AdamW learning rate");
    train->add_option("--name", tr.name, "Model directory name (default: the mode)");

    EvaluateArgs ev;
    auto* evaluate = app.add_subcommand("evaluate", "Offline checkpoint-scheme evaluation of a checkpoint");
    evaluate->add_option("--checkpoint", ev.checkpoint);
    evaluate->add_option("--corpus", ev.corpus);
    evaluate->add_option("--name", ev.name, "Report directory name (default: the model name)");

    ServeArgs sv;
    auto* serve = app.add_subcommand("serve", "Run the mock evaluation server over HTTP");
    serve->add_option("--corpus", sv.corpora, "Corpus files to serve (repeatable)");
    serve->add_option("--host", sv.host)->capture_default_str();
    serve->add_option("--port", sv.port, "0 picks a free port")->capture_default_str();
    serve->add_option("--port-file", sv.port_file, "Write the bound port to this file");
    serve->add_option("--max-runs", sv.max_runs, "Exit after this many runs were collected (0: never)");

    ClientArgs cl;
    auto* client = app.add_subcommand("client", "Drive a checkpoint through a mock-server run");
    client->add_option("--endpoint", cl.endpoint, "http://host:port; without it an in-process server is used");
    client->add_option("--corpus", cl.corpus, "Corpus for the in-process server");
    client->add_option("--corpus-name", cl.corpus_name, "Corpus name on a remote server (default: test)");
    client->add_option("--checkpoint", cl.checkpoint);
    client->add_option("--threshold", cl.threshold);
    client->add_option("--min-delay,--minDelay", cl.min_delay);
    client->add_option("--window-mode", cl.window_mode, "per_round | checkpoint");
    client->add_option("--name", cl.name, "Output directory name under client/");

    ReportArgs rp;
    auto* report = app.add_subcommand("report", "Timelines, comparison table and time-sensitivity probe");
    report->add_option("--model", rp.models, "Models to include (default: all under models/)");
    report->add_option("--probe-text", rp.probe_text, "Sentence for the time-sensitivity probe");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        std::ostringstream o, e2;
        const int code = app.exit(e, o, e2);
        out << o.str();
        err << e2.str();
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (*generate) return cmd_generate(g, gen, out, err);
        if (*train) return cmd_train(g, tr, out, err);
        if (*evaluate) return cmd_evaluate(g, ev, out, err);
        if (*serve) return cmd_serve(g, sv, out, err);
        if (*client) return cmd_client(g, cl, out, err);
        if (*report) return cmd_report(g, rp, out, err);
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return kExitNumerical;
    } catch (const ProtocolError& e) {
        err << "protocol error (" << to_string(e.kind()) << "): " << e.what() << '\n';
        return kExitProtocol;
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    } catch (const json::exception& e) {
        err << "error: malformed JSON: " << e.what() << '\n';
        return kExitUsage;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return kExitUsage;
    }
    return kExitUsage;
}

}  // namespace erd
