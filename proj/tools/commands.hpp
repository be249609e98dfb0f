#pragma once

#include <filesystem>
#include <iosfwd>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"
#include "helm/agent/builder.hpp"
#include "helm/envs/env.hpp"
#include "helm/ppo/ppo.hpp"

namespace helm::cli {

enum ExitCode : int { exit_ok = 0, exit_config = 2, exit_runtime = 3 };

/// Malformed input file; the message names the file and line.
class InputError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

envs::EnvSpec env_spec(const Config& config);
ppo::PpoConfig ppo_config(const Config& config);
agent::StackConfig stack_config(const Config& config);

/// Curve directory name: agent kind for the baselines; for helm the memory
/// kind, with the pretrained memory named plain "helm".
std::string method_name(const Config& config);

/// Ablation variants in their canonical order.
const std::vector<std::string>& ablation_variants();
/// Applies one variant's agent and memory kinds to a copy of `base`.
Config variant_config(const Config& base, const std::string& variant);

struct PretrainResult {
    std::filesystem::path checkpoint;
    double initial_perplexity = 0;
    double final_perplexity = 0;
};

/// Trains the memory transformer on the configured corpus; writes
/// out/pretrain/{model.ckpt,perplexity.csv,config.txt}.
PretrainResult cmd_pretrain(const Config& config, std::ostream& log);

/// Memory model for the helm kind: loaded from memory.checkpoint, pretrained
/// in-process when that is empty, nullptr when no model is needed.
std::shared_ptr<const memnet::TransformerLM> memory_model(const Config& config, std::ostream& log);

struct TrainOptions {
    int seeds = 1;
    int jobs = 1;
};

/// One curve per seed at out/curves/<env>/<method>/seed_<i>.csv, checkpoints
/// under out/checkpoints/<env>/<method>/seed_<i>/.
void cmd_train(const Config& config, const TrainOptions& options, std::ostream& log,
               std::shared_ptr<const memnet::TransformerLM> model = nullptr);

/// Trains every variant over shared seeds, then writes out/summary.csv and
/// out/pairwise.csv. Throws ConfigError for an unknown variant.
void cmd_ablate(const Config& config, const TrainOptions& options, const std::vector<std::string>& variants,
                std::ostream& log);

/// Writes distance matrices, token annotations, attention maps and the JL
/// report under out/analysis/.
void cmd_analyze(const Config& config, std::ostream& log);

struct CurveRow {
    long step = 0;
    long episode = 0;
    double ret = 0;
    int length = 0;
    std::uint64_t seed = 0;
};

/// Throws InputError naming the line of the first malformed row.
std::vector<CurveRow> read_curve(const std::filesystem::path& path);
void write_curve(const std::filesystem::path& path, const std::vector<ppo::EpisodeRecord>& episodes,
                 std::uint64_t seed);

struct SummaryRow {
    std::string method;
    std::string env;
    double iqm = 0;
    double ci_lo = 0;
    double ci_hi = 0;
    std::size_t n_seeds = 0;
};

struct PairRow {
    std::string method_a;
    std::string method_b;
    double p_value = 0;
};

struct StatsTables {
    std::vector<SummaryRow> summary;
    std::vector<PairRow> pairwise;
};

/// Scores each curve file by its mean return over the last 100 episodes and
/// aggregates per (method, env), taken from the parent and grandparent
/// directory names. Inputs may be files or directories (searched
/// recursively for *.csv). p_value tests "method_a greater than method_b"
/// within an env; method names carry an "env/" prefix when several envs are
/// present.
StatsTables compute_stats(const std::vector<std::filesystem::path>& inputs, std::uint64_t seed);
void write_stats(const StatsTables& tables, const std::filesystem::path& dir);

/// Plays rollout.episodes episodes with the checkpointed (or a fresh) agent;
/// with render, prints an ASCII frame per step.
void cmd_rollout(const Config& config, bool render, std::ostream& out);

}  // namespace helm::cli
