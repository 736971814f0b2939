#pragma once
// The `erd` command line. Subcommands: generate, train, evaluate, serve,
// client, report. Every artifact lands under --run-dir, which also holds
// manifest.json (artifact sizes and checksums; wall-clock time only under
// "metadata").

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "erd/corpus.hpp"
#include "erd/erdserver.hpp"
#include "erd/metrics.hpp"
#include "erd/trainer.hpp"
#include "json.hpp"

namespace erd {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitProtocol = 4;

struct PipelinePaths {
    std::string run_dir = "run";
    std::string train_corpus;  // empty: <run_dir>/corpus/train.jsonl
    std::string test_corpus;   // empty: <run_dir>/corpus/test.jsonl
    std::string checkpoint;    // empty: <run_dir>/models/<mode>/best.ckpt

    bool operator==(const PipelinePaths&) const = default;
};

struct PipelineConfig {
    PipelinePaths paths;
    TrainConfig train;
    PolicyConfig policy;
    MetricsConfig metrics;
    SyntheticSpec synthetic;
};

void to_json(nlohmann::json& j, const PipelineConfig& c);
void from_json(const nlohmann::json& j, PipelineConfig& c);

// Reads a JSON pipeline config; missing sections keep their defaults.
PipelineConfig load_pipeline_config(const std::filesystem::path& path);

// args excludes the program name. Returns the process exit code.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace erd
