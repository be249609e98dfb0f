#include "helm/ppo/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace helm::ppo {

void PpoConfig::validate() const
{
    auto fail = [](const std::string& m) { throw std::invalid_argument("ppo: " + m); };
    if (!(lr > 0.0)) fail("lr must be > 0");
    if (!(weight_decay >= 0.0)) fail("weight_decay must be >= 0");
    if (rollout < 1) fail("rollout must be >= 1");
    if (!(entropy_coef >= 0.0)) fail("entropy_coef must be >= 0");
    if (!(value_coef >= 0.0)) fail("value_coef must be >= 0");
    if (!(gamma > 0.0 && gamma <= 1.0)) fail("gamma must be in (0, 1]");
    if (!(lambda >= 0.0 && lambda <= 1.0)) fail("lambda must be in [0, 1]");
    if (!(clip > 0.0)) fail("clip must be > 0");
    if (epochs < 1) fail("epochs must be >= 1");
    if (minibatches < 1) fail("minibatches must be >= 1");
    if (!(max_grad_norm > 0.0)) fail("max_grad_norm must be > 0");
    if (num_envs < 1) fail("num_envs must be >= 1");
    if (total_steps < 0) fail("total_steps must be >= 0");
}

PpoConfig PpoConfig::defaults_for(const std::string& env_kind)
{
    PpoConfig c;
    if (env_kind == "key-corridor") {
        c.rollout = 128;
        c.entropy_coef = 5e-2;
        c.lambda = 0.99;
    } else if (env_kind == "tmaze") {
        c.lr = 5e-4;
    }
    return c;
}

Advantages gae(std::span<const double> rewards, std::span<const double> values, std::span<const char> dones,
               double bootstrap, double gamma, double lambda)
{
    const std::size_t n = rewards.size();
    if (values.size() != n || dones.size() != n)
        throw std::invalid_argument("gae: rewards, values and dones must have equal length");
    Advantages out;
    out.advantages.assign(n, 0.0);
    out.returns.assign(n, 0.0);
    double next_value = bootstrap;
    double next_adv = 0.0;
    for (std::size_t i = n; i-- > 0;) {
        const double live = dones[i] ? 0.0 : 1.0;
        const double delta = rewards[i] + gamma * live * next_value - values[i];
        next_adv = delta + gamma * lambda * live * next_adv;
        out.advantages[i] = next_adv;
        out.returns[i] = next_adv + values[i];
        next_value = values[i];
    }
    return out;
}

void RolloutBuffer::reset(int steps_, int envs_)
{
    steps = steps_;
    envs = envs_;
    const auto n = static_cast<std::size_t>(steps_) * static_cast<std::size_t>(envs_);
    observations.assign(n, {});
    actions.assign(n, 0);
    rewards.assign(n, 0.0);
    dones.assign(n, 0);
    log_probs.assign(n, 0.0);
    values.assign(n, 0.0);
    starts.assign(n, 0);
    bootstrap.assign(static_cast<std::size_t>(envs_), 0.0);
    advantages.clear();
    returns.clear();
}

void RolloutBuffer::compute_advantages(double gamma, double lambda)
{
    advantages.assign(size(), 0.0);
    returns.assign(size(), 0.0);
    std::vector<double> r(static_cast<std::size_t>(steps)), v(r.size());
    std::vector<char> d(r.size());
    for (int e = 0; e < envs; ++e) {
        for (int t = 0; t < steps; ++t) {
            const auto i = static_cast<std::size_t>(t * envs + e);
            r[static_cast<std::size_t>(t)] = rewards[i];
            v[static_cast<std::size_t>(t)] = values[i];
            d[static_cast<std::size_t>(t)] = dones[i];
        }
        const Advantages a = gae(r, v, d, bootstrap[static_cast<std::size_t>(e)], gamma, lambda);
        for (int t = 0; t < steps; ++t) {
            const auto i = static_cast<std::size_t>(t * envs + e);
            advantages[i] = a.advantages[static_cast<std::size_t>(t)];
            returns[i] = a.returns[static_cast<std::size_t>(t)];
        }
    }
}

namespace {

Matrix column(std::span<const double> v)
{
    Matrix m(static_cast<Eigen::Index>(v.size()), 1);
    for (std::size_t i = 0; i < v.size(); ++i) m(static_cast<Eigen::Index>(i), 0) = v[i];
    return m;
}

}  // namespace

LossTerms ppo_loss(nd::Tape& tape, const agent::ActorCritic::Heads& heads, std::span<const int> actions,
                   std::span<const double> old_log_probs, std::span<const double> advantages,
                   std::span<const double> returns, const PpoConfig& config)
{
    const auto rows = static_cast<std::size_t>(heads.log_probs.rows());
    if (actions.size() != rows || old_log_probs.size() != rows || advantages.size() != rows || returns.size() != rows)
        throw std::invalid_argument("ppo_loss: batch columns have mismatched lengths");
    LossTerms l;
    nd::Var logp = nd::pick(heads.log_probs, actions);
    l.ratio = nd::exp(nd::sub(logp, tape.constant(column(old_log_probs))));
    nd::Var adv = tape.constant(column(advantages));
    nd::Var unclipped = nd::mul(l.ratio, adv);
    nd::Var clipped = nd::mul(nd::clamp(l.ratio, 1.0 - config.clip, 1.0 + config.clip), adv);
    l.policy = nd::scale(nd::mean(nd::minimum(unclipped, clipped)), -1.0);
    l.value = nd::mean(nd::square(nd::sub(heads.value, tape.constant(column(returns)))));
    nd::Var plogp = nd::mul(nd::exp(heads.log_probs), heads.log_probs);
    l.entropy = nd::scale(nd::mean(nd::row_sum(plogp)), -1.0);
    l.total = nd::sub(nd::add(l.policy, nd::scale(l.value, config.value_coef)), nd::scale(l.entropy, config.entropy_coef));
    return l;
}

std::vector<double> normalize(std::span<const double> values)
{
    std::vector<double> out(values.begin(), values.end());
    if (out.empty()) return out;
    const double mean = std::accumulate(out.begin(), out.end(), 0.0) / static_cast<double>(out.size());
    double var = 0.0;
    for (double v : out) var += (v - mean) * (v - mean);
    var /= static_cast<double>(out.size());
    const double sd = std::sqrt(var);
    for (double& v : out) v = sd > 1e-12 ? (v - mean) / (sd + 1e-8) : 0.0;
    return out;
}

namespace {

template <typename T>
std::vector<T> gather(const std::vector<T>& src, const std::vector<std::size_t>& idx)
{
    std::vector<T> out;
    out.reserve(idx.size());
    for (auto i : idx) out.push_back(src[i]);
    return out;
}

void shuffle(std::vector<std::size_t>& v, Rng& rng)
{
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[rng.below(i)]);
}

// Recurrent heads over whole env sequences, in time-major row order.
agent::ActorCritic::Heads recurrent_heads(agent::Agent& ag, nd::Tape& tape, const RolloutBuffer& buf,
                                          const std::vector<int>& env_ids, std::vector<std::size_t>& order)
{
    auto& net = ag.net();
    const int m = ag.config().feature_dim;
    const auto b = static_cast<Eigen::Index>(env_ids.size());
    Matrix h0(b, m);
    for (Eigen::Index i = 0; i < b; ++i) h0.row(i) = buf.initial_hidden.row(env_ids[static_cast<std::size_t>(i)]);
    nd::Var h = tape.constant(h0);
    std::vector<nd::Var> logps, values;
    order.clear();
    for (int t = 0; t < buf.steps; ++t) {
        Matrix raw(b, ag.config().obs_size);
        Matrix keep = Matrix::Ones(b, m);
        bool any_reset = false;
        for (Eigen::Index i = 0; i < b; ++i) {
            const auto idx = static_cast<std::size_t>(t * buf.envs + env_ids[static_cast<std::size_t>(i)]);
            raw.row(i) = buf.observations[idx].raw;
            if (t > 0 && buf.starts[idx]) {
                keep.row(i).setZero();
                any_reset = true;
            }
            order.push_back(idx);
        }
        if (any_reset) h = nd::mul(h, tape.constant(keep));
        h = net.gru(tape, net.encode(tape, tape.constant(raw)), h);
        const auto heads = net.heads(tape, h);
        logps.push_back(heads.log_probs);
        values.push_back(heads.value);
    }
    return {nd::concat_rows(logps), nd::concat_rows(values)};
}

}  // namespace

UpdateStats ppo_update(agent::Agent& ag, const RolloutBuffer& buf, const PpoConfig& config,
                       nd::OptimizerState& optimizer, Rng& rng)
{
    if (buf.advantages.size() != buf.size()) throw std::logic_error("ppo_update: advantages not computed");
    UpdateStats stats;
    nd::ParameterSet& params = ag.net().params();
    const bool recurrent = ag.kind() == agent::AgentKind::recurrent;
    int batches_done = 0;

    std::vector<std::size_t> samples(buf.size());
    std::iota(samples.begin(), samples.end(), std::size_t{0});
    std::vector<int> env_order(static_cast<std::size_t>(buf.envs));
    std::iota(env_order.begin(), env_order.end(), 0);

    for (int epoch = 0; epoch < config.epochs; ++epoch) {
        std::vector<std::vector<std::size_t>> batches;
        std::vector<std::vector<int>> env_batches;
        if (recurrent) {
            std::vector<std::size_t> perm(env_order.size());
            std::iota(perm.begin(), perm.end(), std::size_t{0});
            shuffle(perm, rng);
            const int count = std::min(config.minibatches, buf.envs);
            env_batches.resize(static_cast<std::size_t>(count));
            for (std::size_t i = 0; i < perm.size(); ++i)
                env_batches[i % static_cast<std::size_t>(count)].push_back(static_cast<int>(perm[i]));
        } else {
            shuffle(samples, rng);
            const std::size_t count = std::min<std::size_t>(static_cast<std::size_t>(config.minibatches), samples.size());
            for (std::size_t k = 0; k < count; ++k) {
                const std::size_t lo = k * samples.size() / count, hi = (k + 1) * samples.size() / count;
                batches.emplace_back(samples.begin() + static_cast<long>(lo), samples.begin() + static_cast<long>(hi));
            }
        }
        const std::size_t nbatches = recurrent ? env_batches.size() : batches.size();
        for (std::size_t k = 0; k < nbatches; ++k) {
            nd::Tape tape;
            agent::ActorCritic::Heads heads;
            std::vector<std::size_t> idx;
            if (recurrent) {
                heads = recurrent_heads(ag, tape, buf, env_batches[k], idx);
            } else {
                idx = batches[k];
                std::vector<const agent::Observation*> obs;
                obs.reserve(idx.size());
                for (auto i : idx) obs.push_back(&buf.observations[i]);
                heads = ag.evaluate(tape, obs, nullptr);
            }
            const auto actions = gather(buf.actions, idx);
            const auto old_logp = gather(buf.log_probs, idx);
            const auto adv = normalize(gather(buf.advantages, idx));
            const auto ret = gather(buf.returns, idx);
            const LossTerms loss = ppo_loss(tape, heads, actions, old_logp, adv, ret, config);

            const Matrix& ratio = loss.ratio.value();
            if (!std::isfinite(loss.total.scalar())) {
                std::ostringstream os;
                os << "ppo_update: non-finite loss at epoch " << epoch << " minibatch " << k
                   << " (policy " << loss.policy.scalar() << ", value " << loss.value.scalar() << ", entropy "
                   << loss.entropy.scalar() << ", max ratio " << ratio.maxCoeff() << ")";
                throw std::runtime_error(os.str());
            }
            if (epoch == 0 && k == 0) stats.first_ratio_deviation = (ratio.array() - 1.0).abs().maxCoeff();

            params.zero_grad();
            tape.backward(loss.total);
            stats.grad_norm += nd::clip_grad_norm(params, config.max_grad_norm);
            nd::adamw_step(params, optimizer);

            const Eigen::ArrayXd log_ratio = ratio.array().log();
            stats.policy_loss += loss.policy.scalar();
            stats.value_loss += loss.value.scalar();
            stats.entropy += loss.entropy.scalar();
            stats.approx_kl += ((ratio.array() - 1.0) - log_ratio).mean();
            stats.clip_fraction += ((ratio.array() - 1.0).abs() > config.clip).cast<double>().mean();
            ++batches_done;
        }
    }
    const double n = std::max(1, batches_done);
    stats.policy_loss /= n;
    stats.value_loss /= n;
    stats.entropy /= n;
    stats.approx_kl /= n;
    stats.clip_fraction /= n;
    stats.grad_norm /= n;
    return stats;
}

RolloutCollector::RolloutCollector(agent::Agent& ag, const envs::Env& prototype, int num_envs, std::uint64_t seed)
    : agent_(ag), seed_(seed), action_rng_(split_seed(seed, "actions"))
{
    if (num_envs < 1) throw std::invalid_argument("rollout: need at least one environment");
    if (prototype.obs_size() != ag.config().obs_size || prototype.num_actions() != ag.config().num_actions)
        throw std::invalid_argument("rollout: agent and environment disagree on observation or action sizes");
    const auto n = static_cast<std::size_t>(num_envs);
    for (std::size_t e = 0; e < n; ++e) envs_.push_back(prototype.clone());
    states_.resize(n);
    current_.resize(n);
    fresh_.assign(n, 1);
    returns_.assign(n, 0.0);
    lengths_.assign(n, 0);
    episode_seeds_.assign(n, 0);
    if (ag.kind() == agent::AgentKind::recurrent) hidden_ = Matrix::Zero(num_envs, ag.config().feature_dim);
    for (int e = 0; e < num_envs; ++e) start_episode(e);
}

void RolloutCollector::start_episode(int e)
{
    const auto i = static_cast<std::size_t>(e);
    const auto counter = static_cast<std::uint64_t>(episode_counter_++);
    episode_seeds_[i] = split_seed(seed_, "episode", counter);
    const envs::Grid obs = envs_[i]->reset(episode_seeds_[i]);
    states_[i] = agent_.initial_state(split_seed(seed_, "noise", counter));
    current_[i] = agent_.observe(obs, states_[i]);
    returns_[i] = 0.0;
    lengths_[i] = 0;
    fresh_[i] = 1;
    if (hidden_.size() > 0) hidden_.row(e).setZero();
}

void RolloutCollector::collect(RolloutBuffer& buf, int steps)
{
    const int n = static_cast<int>(envs_.size());
    buf.reset(steps, n);
    const bool recurrent = agent_.kind() == agent::AgentKind::recurrent;
    if (recurrent) buf.initial_hidden = hidden_;
    std::vector<const agent::Observation*> batch(static_cast<std::size_t>(n));

    for (int t = 0; t < steps; ++t) {
        for (int e = 0; e < n; ++e) batch[static_cast<std::size_t>(e)] = &current_[static_cast<std::size_t>(e)];
        nd::Tape tape;
        const auto heads = agent_.evaluate(tape, batch, recurrent ? &hidden_ : nullptr);
        const Matrix& logp = heads.log_probs.value();
        const Matrix& value = heads.value.value();
        for (int e = 0; e < n; ++e) {
            const auto i = static_cast<std::size_t>(t * n + e);
            const auto ue = static_cast<std::size_t>(e);
            const agent::RowVector probs = logp.row(e).array().exp();
            const int a = agent::sample_categorical(probs, action_rng_);
            buf.observations[i] = std::move(current_[ue]);
            buf.actions[i] = a;
            buf.log_probs[i] = logp(e, a);
            buf.values[i] = value(e, 0);
            buf.starts[i] = fresh_[ue];
            fresh_[ue] = 0;

            const envs::EnvStep s = envs_[ue]->step(a);
            ++steps_;
            buf.rewards[i] = s.reward;
            buf.dones[i] = s.done ? 1 : 0;
            returns_[ue] += s.reward;
            ++lengths_[ue];
            if (s.done) {
                episodes_.push_back({steps_, static_cast<long>(episodes_.size()), returns_[ue], lengths_[ue],
                                     episode_seeds_[ue]});
                start_episode(e);
            } else {
                current_[ue] = agent_.observe(s.observation, states_[ue]);
            }
        }
    }

    for (int e = 0; e < n; ++e) batch[static_cast<std::size_t>(e)] = &current_[static_cast<std::size_t>(e)];
    nd::Tape tape;
    Matrix peek = hidden_;
    const auto heads = agent_.evaluate(tape, batch, recurrent ? &peek : nullptr);
    for (int e = 0; e < n; ++e) buf.bootstrap[static_cast<std::size_t>(e)] = heads.value.value()(e, 0);
}

RunRecord train(agent::Agent& ag, const envs::Env& prototype, const PpoConfig& config, std::uint64_t seed,
                const TrainHooks& hooks)
{
    config.validate();
    RunRecord record;
    record.seed = seed;
    record.method = std::string(agent::to_string(ag.kind()));
    record.frozen_digest_before = ag.frozen_digest();

    if (config.total_steps > 0) {
        nd::AdamWConfig opt_cfg;
        opt_cfg.lr = config.lr;
        opt_cfg.weight_decay = config.weight_decay;
        nd::OptimizerState optimizer = nd::make_optimizer_state(ag.net().params(), opt_cfg);
        Rng minibatch_rng(split_seed(seed, "minibatch"));
        RolloutCollector collector(ag, prototype, config.num_envs, seed);
        RolloutBuffer buffer;
        int update = 0;
        while (collector.steps_taken() < config.total_steps) {
            collector.collect(buffer, config.rollout);
            buffer.compute_advantages(config.gamma, config.lambda);
            record.updates.push_back(ppo_update(ag, buffer, config, optimizer, minibatch_rng));
            ++update;
            if (hooks.after_update) hooks.after_update(ag, update, collector.steps_taken());
        }
        record.episodes = collector.episodes();
        record.steps = collector.steps_taken();
    }
    record.frozen_digest_after = ag.frozen_digest();
    if (record.frozen_digest_after != record.frozen_digest_before)
        throw std::logic_error("train: frozen components changed during training");
    return record;
}

}  // namespace helm::ppo
