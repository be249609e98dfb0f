#pragma once

#include <cstdint>
#include <vector>

#include "helm/memnet/transformer.hpp"
#include "helm/ndiff/optim.hpp"
#include "helm/rng.hpp"

namespace helm::memnet {

using TokenStream = std::vector<int>;

/// tokens[i] = i mod period.
TokenStream cyclic_corpus(int period, std::size_t length);

/// Order-1 Markov chain over `vocab` tokens.
struct MarkovChain {
    Matrix transition;  // row-stochastic, vocab x vocab

    int vocab() const { return static_cast<int>(transition.rows()); }
    Eigen::VectorXd stationary() const;
    /// sum_i pi_i H(T_i) in nats.
    double entropy_rate() const;
    TokenStream sample(std::size_t length, Rng& rng) const;
};

/// Every row puts random weight on `support` distinct successors.
MarkovChain random_markov_chain(int vocab, int support, std::uint64_t seed);

/// Markov text with periodic motifs spliced in: with probability
/// motif_rate a motif of 4-8 tokens is repeated 2-4 times.
TokenStream synthetic_corpus(int vocab, std::size_t length, std::uint64_t seed, double motif_rate = 0.05);

struct PretrainConfig {
    int steps = 2000;
    int batch = 8;
    int seq_len = 32;
    nd::AdamWConfig optimizer{3e-3, 0.9, 0.999, 1e-8, 1e-2};
    double max_grad_norm = 1.0;
    std::uint64_t seed = 0;
    /// Evaluate held-out loss every this many steps (0 disables).
    int eval_every = 0;
};

struct PretrainReport {
    double initial_loss = 0;
    double final_loss = 0;
    /// (step, held-out mean cross-entropy)
    std::vector<std::pair<int, double>> history;
};

/// Mean next-token cross-entropy (nats) over non-overlapping windows.
double heldout_cross_entropy(TransformerLM& model, const TokenStream& tokens, int seq_len);

/// Causal language-model training on random windows of `train`; `heldout`
/// feeds the loss history. Throws std::out_of_range if any token is outside
/// the model vocabulary.
PretrainReport pretrain_clm(TransformerLM& model, const TokenStream& train, const TokenStream& heldout,
                            const PretrainConfig& config);

}  // namespace helm::memnet
