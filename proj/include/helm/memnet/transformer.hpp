#pragma once

// Tiny causal transformer with a streaming memory register.
//
// Blocks are pre-layer-norm: h += Attn(LN(h)); h += FFN(LN(h)); the summary
// is LN_f(h). Attention logits get a per-head bias indexed by the relative
// offset (query position - key position) in [0, L). The output head is tied
// to the input embedding table, logits = LN_f(h) E^T.
//
// Streaming inference keeps, for every layer, the activations that entered
// that layer at the last L - 1 steps (plus their keys and values). A step
// attends over register + current step, then appends and evicts the oldest
// entry, so for sequences no longer than L the stepwise outputs equal a full
// causal forward pass.

#include <Eigen/Dense>

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "helm/ndiff/checkpoint.hpp"
#include "helm/ndiff/params.hpp"
#include "helm/ndiff/tape.hpp"

namespace helm::memnet {

using nd::Matrix;
using nd::RowVector;

struct MemoryModelConfig {
    int vocab = 256;
    int dim = 32;
    int layers = 2;
    int heads = 2;
    int ff = 64;
    /// Register length L, counting the current step.
    int memory_len = 32;

    int head_dim() const { return dim / heads; }
    /// Throws std::invalid_argument describing the first violated constraint.
    void validate() const;
};

struct LayerRegister {
    std::vector<RowVector> activations;
    std::vector<RowVector> keys;
    std::vector<RowVector> values;
};

/// Per-episode memory state. Never share between environment instances.
struct MemoryState {
    std::vector<LayerRegister> layers;
    long steps = 0;
    /// Only used by the noise memory.
    std::uint64_t noise_seed = 0;
};

/// Attention weights of one step: [layer][head] -> weights over the
/// positions register..current (oldest first).
using StepAttention = std::vector<std::vector<Eigen::VectorXd>>;

/// [layer][head] -> T x T lower-triangular weights.
using AttentionMaps = std::vector<std::vector<Matrix>>;

class TransformerLM {
public:
    TransformerLM(const MemoryModelConfig& config, std::uint64_t seed);

    const MemoryModelConfig& config() const { return config_; }
    nd::ParameterSet& params() { return params_; }
    const nd::ParameterSet& params() const { return params_; }
    const Matrix& embeddings() const { return params_[embed_].value; }

    /// Differentiable forward over `batch` stacked sequences of length
    /// seq_len <= L; inputs is (batch * seq_len) x dim. Returns the final
    /// layer-normed hidden states with the same shape.
    nd::Var forward(nd::Tape& tape, nd::Var inputs, int batch, int seq_len);
    /// Tied output projection onto the vocabulary.
    nd::Var logits(nd::Tape& tape, nd::Var hidden);
    /// Gathers token embeddings on the tape.
    nd::Var embed_tokens(nd::Tape& tape, std::span<const int> tokens);

    MemoryState initial_state() const;
    /// One streaming step; x has length dim. Returns the summary h_t.
    RowVector step(MemoryState& state, const Eigen::Ref<const RowVector>& x, StepAttention* trace = nullptr) const;

    /// Full causal pass over T <= L inputs (T x dim) via streaming steps.
    Matrix encode(const Matrix& inputs, AttentionMaps* maps = nullptr) const;

    std::string digest() const { return params_.digest(); }

    std::vector<nd::NamedArray> to_arrays(const std::string& prefix = "memory.") const;
    void load(const std::vector<nd::NamedArray>& arrays, const std::string& prefix = "memory.");
    static MemoryModelConfig config_from_arrays(const std::vector<nd::NamedArray>& arrays,
                                                const std::string& prefix = "memory.");

private:
    struct LayerIndex {
        std::size_t ln1_gain, ln1_bias, wq, wk, wv, wo, rel_bias, ln2_gain, ln2_bias, w1, b1, w2, b2;
    };

    RowVector layer_norm(const RowVector& x, std::size_t gain, std::size_t bias) const;

    MemoryModelConfig config_;
    nd::ParameterSet params_;
    std::size_t embed_ = 0;
    std::vector<LayerIndex> layers_;
    std::size_t lnf_gain_ = 0, lnf_bias_ = 0;
};

/// Attention maps for an episode of token-space inputs (T <= L).
AttentionMaps attention_maps(const TransformerLM& model, const Matrix& episode);

}  // namespace helm::memnet
