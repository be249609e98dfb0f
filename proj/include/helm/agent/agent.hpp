#pragma once

// Actor-critic agents.
//
//   helm:       x_t = FrozenHopfield(o_t), h_t = memory.step(x_t),
//               s_t = [h_t; enc(o_t)]
//   markov:     s_t = enc(o_t)
//   recurrent:  s_t = GRU(enc(o_t), s_{t-1}), trained through the rollout
//
// enc is a two-layer relu MLP on the raw cell codes; actor and critic each
// have one relu hidden layer. Only enc, the GRU and the heads are in the
// trainable parameter set. The FrozenHopfield mapping and the memory are
// held by const pointer and never see a tape.

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "helm/envs/env.hpp"
#include "helm/fhopfield/frozen_hopfield.hpp"
#include "helm/memnet/memory.hpp"
#include "helm/ndiff/checkpoint.hpp"
#include "helm/ndiff/params.hpp"
#include "helm/ndiff/tape.hpp"

namespace helm::agent {

using nd::Matrix;
using nd::RowVector;

enum class AgentKind { helm, markov, recurrent };

std::string_view to_string(AgentKind kind);
/// Accepts "helm", "markov", "trained-recurrent" (alias "recurrent").
AgentKind parse_agent_kind(std::string_view name);

struct AgentConfig {
    AgentKind kind = AgentKind::helm;
    int obs_size = 9;
    int num_actions = 4;
    /// m: memory output width, encoder output width and GRU width.
    int feature_dim = 32;
    int encoder_hidden = 128;
    int head_hidden = 128;

    /// Width of s_t.
    int state_dim() const { return kind == AgentKind::helm ? 2 * feature_dim : feature_dim; }
    void validate() const;
};

/// Trainable part: encoder, optional GRU cell, actor and critic heads.
class ActorCritic {
public:
    ActorCritic(const AgentConfig& config, std::uint64_t seed);

    const AgentConfig& config() const { return config_; }
    nd::ParameterSet& params() { return params_; }
    const nd::ParameterSet& params() const { return params_; }

    /// Raw observations (B x obs_size) -> B x feature_dim.
    nd::Var encode(nd::Tape& tape, nd::Var obs);
    /// One GRU step: input and previous state are B x feature_dim.
    nd::Var gru(nd::Tape& tape, nd::Var input, nd::Var state);

    struct Heads {
        nd::Var log_probs;  // B x actions
        nd::Var value;      // B x 1
    };
    Heads heads(nd::Tape& tape, nd::Var state);

    std::vector<nd::NamedArray> to_arrays(const std::string& prefix = "agent.") const;
    void load(const std::vector<nd::NamedArray>& arrays, const std::string& prefix = "agent.");

private:
    struct Dense {
        std::size_t w, b;
    };
    Dense dense(const std::string& name, int fan_in, int fan_out, Rng& rng);
    nd::Var apply(nd::Tape& tape, const Dense& d, nd::Var x);

    AgentConfig config_;
    nd::ParameterSet params_;
    Dense enc1_{}, enc2_{}, actor1_{}, actor2_{}, critic1_{}, critic2_{};
    Dense gru_xz_{}, gru_xr_{}, gru_xn_{}, gru_hz_{}, gru_hr_{}, gru_hn_{};
};

/// Per-environment recurrent context.
struct AgentState {
    memnet::MemoryState memory;
    RowVector hidden;  // recurrent kind only
};

/// Everything the rollout keeps about one observation.
struct Observation {
    RowVector raw;     // cell codes
    RowVector memory;  // h_t for helm, empty otherwise
};

struct AgentOutput {
    int action = 0;
    double log_prob = 0.0;
    double value = 0.0;
    RowVector probabilities;
    RowVector memory;  // h_t
};

class Agent {
public:
    /// fh and memory are required for AgentKind::helm and ignored otherwise.
    Agent(const AgentConfig& config, std::uint64_t seed, std::shared_ptr<const fhopfield::FrozenHopfield> fh = nullptr,
          std::shared_ptr<const memnet::Memory> memory = nullptr);

    const AgentConfig& config() const { return net_.config(); }
    AgentKind kind() const { return net_.config().kind; }
    ActorCritic& net() { return net_; }
    const ActorCritic& net() const { return net_; }
    const fhopfield::FrozenHopfield* frozen_hopfield() const { return fh_.get(); }
    const memnet::Memory* memory() const { return memory_.get(); }

    /// Fresh episode context; seed feeds the noise memory only.
    AgentState initial_state(std::uint64_t seed) const;

    /// Runs the frozen path for a new observation, advancing the memory.
    Observation observe(const envs::Grid& obs, AgentState& state) const;

    /// Policy and value for a batch of observations. `recurrent` holds the
    /// previous GRU states (B x m) for the recurrent kind and is replaced by
    /// the new ones.
    ActorCritic::Heads evaluate(nd::Tape& tape, const std::vector<const Observation*>& batch, Matrix* recurrent);

    /// Single-environment convenience: observe, evaluate, sample (or take the
    /// argmax when greedy).
    AgentOutput act(const envs::Grid& obs, AgentState& state, Rng& rng, bool greedy = false);

    /// Hash over P, E and the memory weights.
    std::string frozen_digest() const;

private:
    ActorCritic net_;
    std::shared_ptr<const fhopfield::FrozenHopfield> fh_;
    std::shared_ptr<const memnet::Memory> memory_;
};

/// Samples from a probability row by inversion.
int sample_categorical(const Eigen::Ref<const RowVector>& probabilities, Rng& rng);
int argmax(const Eigen::Ref<const RowVector>& values);

}  // namespace helm::agent
