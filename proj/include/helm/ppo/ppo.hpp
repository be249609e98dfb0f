#pragma once

// Clipped-surrogate PPO over vectorized gridworld rollouts.

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "helm/agent/agent.hpp"
#include "helm/envs/env.hpp"
#include "helm/ndiff/optim.hpp"

namespace helm::ppo {

using agent::Matrix;

struct PpoConfig {
    double lr = 1e-4;
    double weight_decay = 1e-2;
    int rollout = 64;
    double entropy_coef = 1e-2;
    double value_coef = 0.5;
    double gamma = 0.99;
    double lambda = 0.95;
    double clip = 0.2;
    int epochs = 3;
    int minibatches = 8;
    double max_grad_norm = 0.5;
    int num_envs = 16;
    long total_steps = 0;

    /// Throws std::invalid_argument naming the first bad field.
    void validate() const;
    /// Defaults for an environment kind: the key task uses lr 1e-4, rollout
    /// 128, entropy 5e-2 and lambda 0.99; the mazes rollout 64, entropy 1e-2
    /// and lambda 0.95. The T-maze uses lr 5e-4 (calibrated).
    static PpoConfig defaults_for(const std::string& env_kind);
};

struct Advantages {
    std::vector<double> advantages;
    std::vector<double> returns;
};

/// delta_t = r_t + gamma (1 - done_t) V_{t+1} - V_t,
/// A_t = delta_t + gamma lambda (1 - done_t) A_{t+1}, with V_T = bootstrap.
/// done_t marks that the episode ended with step t.
Advantages gae(std::span<const double> rewards, std::span<const double> values, std::span<const char> dones,
               double bootstrap, double gamma, double lambda);

/// Steps x envs records, index t * envs + e.
struct RolloutBuffer {
    int steps = 0;
    int envs = 0;
    std::vector<agent::Observation> observations;
    std::vector<int> actions;
    std::vector<double> rewards;
    std::vector<char> dones;
    std::vector<double> log_probs;
    std::vector<double> values;
    /// Recurrent kind: a new episode starts at (t, e), so the GRU state was
    /// reset before that step.
    std::vector<char> starts;
    /// Recurrent kind: GRU state entering step 0, envs x m.
    Matrix initial_hidden;
    std::vector<double> bootstrap;  // per env
    std::vector<double> advantages;
    std::vector<double> returns;

    std::size_t size() const { return actions.size(); }
    void reset(int steps, int envs);
    /// Fills advantages and returns column by column.
    void compute_advantages(double gamma, double lambda);
};

struct LossTerms {
    nd::Var total;
    nd::Var policy;
    nd::Var value;
    nd::Var entropy;
    nd::Var ratio;
};

/// policy = -mean(min(r A, clip(r, 1 - eps, 1 + eps) A)) with
/// r = exp(logp_new - logp_old); value = mean((V - R)^2);
/// total = policy + c_v value - c_ent entropy.
LossTerms ppo_loss(nd::Tape& tape, const agent::ActorCritic::Heads& heads, std::span<const int> actions,
                   std::span<const double> old_log_probs, std::span<const double> advantages,
                   std::span<const double> returns, const PpoConfig& config);

/// Mean 0, standard deviation 1 (population); constant inputs map to 0.
std::vector<double> normalize(std::span<const double> values);

struct UpdateStats {
    double policy_loss = 0;
    double value_loss = 0;
    double entropy = 0;
    double approx_kl = 0;
    double clip_fraction = 0;
    double grad_norm = 0;
    /// max |ratio - 1| in the first minibatch of the first epoch.
    double first_ratio_deviation = 0;
};

/// Epochs x minibatches of AdamW steps on the clipped objective. Throws
/// std::runtime_error with diagnostics if a loss turns non-finite.
UpdateStats ppo_update(agent::Agent& agent, const RolloutBuffer& buffer, const PpoConfig& config,
                       nd::OptimizerState& optimizer, Rng& rng);

struct EpisodeRecord {
    long step = 0;  // environment steps taken when the episode ended
    long episode = 0;
    double ret = 0;
    int length = 0;
    std::uint64_t seed = 0;
};

struct RunRecord {
    std::uint64_t seed = 0;
    std::string method;
    std::vector<EpisodeRecord> episodes;
    std::vector<UpdateStats> updates;
    std::string frozen_digest_before;
    std::string frozen_digest_after;
    long steps = 0;
};

struct TrainHooks {
    /// Called after every update with the update count and steps so far.
    std::function<void(const agent::Agent&, int update, long steps)> after_update;
};

/// Collects one rollout into `buffer`. Exposed for tests; train() owns the
/// persistent per-env state in normal use.
class RolloutCollector {
public:
    RolloutCollector(agent::Agent& agent, const envs::Env& prototype, int num_envs, std::uint64_t seed);

    void collect(RolloutBuffer& buffer, int steps);
    long steps_taken() const { return steps_; }
    const std::vector<EpisodeRecord>& episodes() const { return episodes_; }

private:
    void start_episode(int e);

    agent::Agent& agent_;
    std::uint64_t seed_;
    std::vector<std::unique_ptr<envs::Env>> envs_;
    std::vector<agent::AgentState> states_;
    std::vector<agent::Observation> current_;
    std::vector<char> fresh_;
    std::vector<double> returns_;
    std::vector<int> lengths_;
    std::vector<std::uint64_t> episode_seeds_;
    Matrix hidden_;
    Rng action_rng_;
    long steps_ = 0;
    long episode_counter_ = 0;
    std::vector<EpisodeRecord> episodes_;
};

/// Algorithm loop: collect, estimate advantages, update, until the step
/// budget is spent. Deterministic in (agent weights, env, config, seed).
RunRecord train(agent::Agent& agent, const envs::Env& prototype, const PpoConfig& config, std::uint64_t seed,
                const TrainHooks& hooks = {});

}  // namespace helm::ppo
