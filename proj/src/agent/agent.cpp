#include "helm/agent/agent.hpp"

#include <stdexcept>

#include "helm/rng.hpp"

namespace helm::agent {

std::string_view to_string(AgentKind kind)
{
    switch (kind) {
    case AgentKind::helm: return "helm";
    case AgentKind::markov: return "markov";
    case AgentKind::recurrent: return "trained-recurrent";
    }
    return "?";
}

AgentKind parse_agent_kind(std::string_view name)
{
    if (name == "helm") return AgentKind::helm;
    if (name == "markov") return AgentKind::markov;
    if (name == "trained-recurrent" || name == "recurrent") return AgentKind::recurrent;
    throw std::invalid_argument("unknown agent kind: " + std::string(name));
}

void AgentConfig::validate() const
{
    if (obs_size < 1) throw std::invalid_argument("agent: obs_size must be >= 1");
    if (num_actions < 1) throw std::invalid_argument("agent: num_actions must be >= 1");
    if (feature_dim < 1) throw std::invalid_argument("agent: feature_dim must be >= 1");
    if (encoder_hidden < 1 || head_hidden < 1) throw std::invalid_argument("agent: hidden widths must be >= 1");
}

ActorCritic::Dense ActorCritic::dense(const std::string& name, int fan_in, int fan_out, Rng& rng)
{
    Dense d;
    d.w = params_.add(name + ".w", nd::init_dense(rng, fan_in, fan_out));
    d.b = params_.add(name + ".b", nd::init_bias(rng, fan_in, fan_out));
    return d;
}

ActorCritic::ActorCritic(const AgentConfig& config, std::uint64_t seed) : config_(config)
{
    config_.validate();
    Rng rng(seed);
    const int m = config_.feature_dim;
    enc1_ = dense("encoder.l1", config_.obs_size, config_.encoder_hidden, rng);
    enc2_ = dense("encoder.l2", config_.encoder_hidden, m, rng);
    if (config_.kind == AgentKind::recurrent) {
        gru_xz_ = dense("gru.xz", m, m, rng);
        gru_xr_ = dense("gru.xr", m, m, rng);
        gru_xn_ = dense("gru.xn", m, m, rng);
        gru_hz_ = dense("gru.hz", m, m, rng);
        gru_hr_ = dense("gru.hr", m, m, rng);
        gru_hn_ = dense("gru.hn", m, m, rng);
    }
    actor1_ = dense("actor.l1", config_.state_dim(), config_.head_hidden, rng);
    actor2_ = dense("actor.l2", config_.head_hidden, config_.num_actions, rng);
    // Near-uniform initial policy, so early rollouts explore instead of
    // committing to whichever action the random draw favours.
    params_[actor2_.w].value *= 0.01;
    params_[actor2_.b].value.setZero();
    critic1_ = dense("critic.l1", config_.state_dim(), config_.head_hidden, rng);
    critic2_ = dense("critic.l2", config_.head_hidden, 1, rng);
}

nd::Var ActorCritic::apply(nd::Tape& tape, const Dense& d, nd::Var x)
{
    return nd::add(nd::matmul(x, tape.param(params_[d.w])), tape.param(params_[d.b]));
}

nd::Var ActorCritic::encode(nd::Tape& tape, nd::Var obs)
{
    if (obs.cols() != config_.obs_size)
        throw std::invalid_argument("encoder: observation width " + std::to_string(obs.cols()) + ", expected " +
                                    std::to_string(config_.obs_size));
    return nd::relu(apply(tape, enc2_, nd::relu(apply(tape, enc1_, obs))));
}

nd::Var ActorCritic::gru(nd::Tape& tape, nd::Var input, nd::Var state)
{
    if (config_.kind != AgentKind::recurrent) throw std::logic_error("gru: agent has no recurrent cell");
    nd::Var z = nd::sigmoid(nd::add(apply(tape, gru_xz_, input), apply(tape, gru_hz_, state)));
    nd::Var r = nd::sigmoid(nd::add(apply(tape, gru_xr_, input), apply(tape, gru_hr_, state)));
    nd::Var n = nd::tanh(nd::add(apply(tape, gru_xn_, input), nd::mul(r, apply(tape, gru_hn_, state))));
    nd::Var keep = nd::add_scalar(nd::scale(z, -1.0), 1.0);
    return nd::add(nd::mul(keep, n), nd::mul(z, state));
}

ActorCritic::Heads ActorCritic::heads(nd::Tape& tape, nd::Var state)
{
    if (state.cols() != config_.state_dim())
        throw std::invalid_argument("heads: state width " + std::to_string(state.cols()) + ", expected " +
                                    std::to_string(config_.state_dim()));
    Heads h;
    h.log_probs = nd::log_softmax_rows(apply(tape, actor2_, nd::relu(apply(tape, actor1_, state))));
    h.value = apply(tape, critic2_, nd::relu(apply(tape, critic1_, state)));
    return h;
}

std::vector<nd::NamedArray> ActorCritic::to_arrays(const std::string& prefix) const
{
    auto arrays = nd::to_arrays(params_, prefix);
    arrays.push_back(nd::scalar_array(prefix + "config.kind", static_cast<double>(config_.kind)));
    arrays.push_back(nd::scalar_array(prefix + "config.obs_size", config_.obs_size));
    arrays.push_back(nd::scalar_array(prefix + "config.num_actions", config_.num_actions));
    arrays.push_back(nd::scalar_array(prefix + "config.feature_dim", config_.feature_dim));
    arrays.push_back(nd::scalar_array(prefix + "config.encoder_hidden", config_.encoder_hidden));
    arrays.push_back(nd::scalar_array(prefix + "config.head_hidden", config_.head_hidden));
    return arrays;
}

void ActorCritic::load(const std::vector<nd::NamedArray>& arrays, const std::string& prefix)
{
    const std::size_t n = nd::load_arrays(params_, arrays, prefix);
    if (n != params_.size())
        throw std::runtime_error("checkpoint: expected " + std::to_string(params_.size()) + " agent arrays, found " +
                                 std::to_string(n));
}

Agent::Agent(const AgentConfig& config, std::uint64_t seed, std::shared_ptr<const fhopfield::FrozenHopfield> fh,
             std::shared_ptr<const memnet::Memory> memory)
    : net_(config, seed), fh_(std::move(fh)), memory_(std::move(memory))
{
    if (config.kind != AgentKind::helm) {
        fh_.reset();
        memory_.reset();
        return;
    }
    if (!fh_ || !memory_) throw std::invalid_argument("helm agent needs a FrozenHopfield mapping and a memory");
    if (fh_->obs_dim() != config.obs_size)
        throw std::invalid_argument("helm agent: projection expects " + std::to_string(fh_->obs_dim()) +
                                    " inputs, observations have " + std::to_string(config.obs_size));
    if (fh_->embed_dim() != memory_->dim())
        throw std::invalid_argument("helm agent: token space width " + std::to_string(fh_->embed_dim()) +
                                    " does not match memory width " + std::to_string(memory_->dim()));
    if (memory_->dim() != config.feature_dim)
        throw std::invalid_argument("helm agent: feature_dim must equal the memory width");
}

AgentState Agent::initial_state(std::uint64_t seed) const
{
    AgentState s;
    if (memory_) s.memory = memory_->initial_state(seed);
    if (kind() == AgentKind::recurrent) s.hidden = RowVector::Zero(config().feature_dim);
    return s;
}

Observation Agent::observe(const envs::Grid& obs, AgentState& state) const
{
    if (obs.size() != config().obs_size)
        throw std::invalid_argument("agent: observation has " + std::to_string(obs.size()) + " cells, expected " +
                                    std::to_string(config().obs_size));
    Observation o;
    o.raw.resize(obs.size());
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < obs.rows(); ++r)
        for (Eigen::Index c = 0; c < obs.cols(); ++c) o.raw(k++) = obs(r, c);
    if (kind() == AgentKind::helm) {
        const Eigen::VectorXd x = fh_->embed(envs::flatten(obs));
        o.memory = memory_->step(state.memory, x.transpose());
    }
    return o;
}

ActorCritic::Heads Agent::evaluate(nd::Tape& tape, const std::vector<const Observation*>& batch, Matrix* recurrent)
{
    const auto rows = static_cast<Eigen::Index>(batch.size());
    if (rows == 0) throw std::invalid_argument("agent: empty batch");
    Matrix raw(rows, config().obs_size);
    for (Eigen::Index i = 0; i < rows; ++i) raw.row(i) = batch[static_cast<std::size_t>(i)]->raw;
    nd::Var enc = net_.encode(tape, tape.constant(std::move(raw)));

    switch (kind()) {
    case AgentKind::markov: return net_.heads(tape, enc);
    case AgentKind::helm: {
        Matrix mem(rows, config().feature_dim);
        for (Eigen::Index i = 0; i < rows; ++i) mem.row(i) = batch[static_cast<std::size_t>(i)]->memory;
        const nd::Var parts[] = {tape.constant(std::move(mem)), enc};
        return net_.heads(tape, nd::concat_cols(parts));
    }
    case AgentKind::recurrent: {
        if (!recurrent || recurrent->rows() != rows || recurrent->cols() != config().feature_dim)
            throw std::invalid_argument("agent: recurrent kind needs a B x m hidden-state matrix");
        nd::Var h = net_.gru(tape, enc, tape.constant(*recurrent));
        *recurrent = h.value();
        return net_.heads(tape, h);
    }
    }
    throw std::logic_error("agent: unknown kind");
}

AgentOutput Agent::act(const envs::Grid& obs, AgentState& state, Rng& rng, bool greedy)
{
    const Observation o = observe(obs, state);
    nd::Tape tape;
    Matrix hidden;
    if (kind() == AgentKind::recurrent) hidden = state.hidden;
    const auto heads = evaluate(tape, {&o}, kind() == AgentKind::recurrent ? &hidden : nullptr);
    if (kind() == AgentKind::recurrent) state.hidden = hidden.row(0);

    AgentOutput out;
    const RowVector logp = heads.log_probs.value().row(0);
    out.probabilities = logp.array().exp();
    out.action = greedy ? argmax(logp) : sample_categorical(out.probabilities, rng);
    out.log_prob = logp(out.action);
    out.value = heads.value.value()(0, 0);
    out.memory = o.memory;
    return out;
}

std::string Agent::frozen_digest() const
{
    if (!fh_) return nd::sha256_hex(nullptr, 0);
    std::string all;
    const auto& p = fh_->projection().matrix;
    const auto& e = fh_->store().patterns();
    all += nd::sha256_hex(p.data(), static_cast<std::size_t>(p.size()) * sizeof(double));
    all += nd::sha256_hex(e.data(), static_cast<std::size_t>(e.size()) * sizeof(double));
    all += memory_->digest();
    return nd::sha256_hex(all.data(), all.size());
}

int sample_categorical(const Eigen::Ref<const RowVector>& probabilities, Rng& rng)
{
    double u = rng.uniform();
    const auto n = static_cast<int>(probabilities.size());
    for (int i = 0; i < n; ++i) {
        u -= probabilities(i);
        if (u < 0.0) return i;
    }
    // Rounding left u slightly positive; take the last action with mass.
    for (int i = n - 1; i >= 0; --i)
        if (probabilities(i) > 0.0) return i;
    return n - 1;
}

int argmax(const Eigen::Ref<const RowVector>& values)
{
    int best = 0;
    for (int i = 1; i < values.size(); ++i)
        if (values(i) > values(best)) best = i;
    return best;
}

}  // namespace helm::agent
