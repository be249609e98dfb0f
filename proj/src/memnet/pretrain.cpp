#include "helm/memnet/pretrain.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace helm::memnet {

TokenStream cyclic_corpus(int period, std::size_t length)
{
    if (period < 1) throw std::invalid_argument("cyclic_corpus: period must be >= 1");
    TokenStream t(length);
    for (std::size_t i = 0; i < length; ++i) t[i] = static_cast<int>(i % static_cast<std::size_t>(period));
    return t;
}

Eigen::VectorXd MarkovChain::stationary() const
{
    const Eigen::Index k = transition.rows();
    Eigen::RowVectorXd pi = Eigen::RowVectorXd::Constant(k, 1.0 / static_cast<double>(k));
    for (int it = 0; it < 10000; ++it) {
        Eigen::RowVectorXd next = pi * transition;
        next /= next.sum();
        const double diff = (next - pi).cwiseAbs().sum();
        pi = next;
        if (diff < 1e-15) break;
    }
    return pi.transpose();
}

double MarkovChain::entropy_rate() const
{
    const Eigen::VectorXd pi = stationary();
    double h = 0.0;
    for (Eigen::Index i = 0; i < transition.rows(); ++i)
        for (Eigen::Index j = 0; j < transition.cols(); ++j) {
            const double p = transition(i, j);
            if (p > 0.0) h -= pi(i) * p * std::log(p);
        }
    return h;
}

TokenStream MarkovChain::sample(std::size_t length, Rng& rng) const
{
    TokenStream t;
    t.reserve(length);
    int cur = static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab())));
    for (std::size_t i = 0; i < length; ++i) {
        t.push_back(cur);
        double u = rng.uniform();
        int next = vocab() - 1;
        for (int j = 0; j < vocab(); ++j) {
            u -= transition(cur, j);
            if (u < 0.0) {
                next = j;
                break;
            }
        }
        cur = next;
    }
    return t;
}

MarkovChain random_markov_chain(int vocab, int support, std::uint64_t seed)
{
    if (vocab < 1 || support < 1 || support > vocab)
        throw std::invalid_argument("random_markov_chain: need 1 <= support <= vocab");
    Rng rng(seed);
    MarkovChain c;
    c.transition = Matrix::Zero(vocab, vocab);
    std::vector<int> perm(static_cast<std::size_t>(vocab));
    for (int i = 0; i < vocab; ++i) {
        for (int j = 0; j < vocab; ++j) perm[static_cast<std::size_t>(j)] = j;
        for (int j = vocab - 1; j > 0; --j)
            std::swap(perm[static_cast<std::size_t>(j)], perm[rng.below(static_cast<std::uint64_t>(j) + 1)]);
        double total = 0.0;
        for (int s = 0; s < support; ++s) {
            const double w = 0.2 + rng.uniform();
            c.transition(i, perm[static_cast<std::size_t>(s)]) = w;
            total += w;
        }
        c.transition.row(i) /= total;
    }
    return c;
}

TokenStream synthetic_corpus(int vocab, std::size_t length, std::uint64_t seed, double motif_rate)
{
    const MarkovChain chain = random_markov_chain(vocab, std::min(vocab, 8), split_seed(seed, "chain"));
    Rng rng(split_seed(seed, "text"));
    const TokenStream base = chain.sample(length, rng);
    TokenStream out;
    out.reserve(length);
    std::size_t i = 0;
    while (out.size() < length) {
        if (rng.uniform() < motif_rate) {
            const int len = static_cast<int>(rng.range(4, 8));
            const int reps = static_cast<int>(rng.range(2, 4));
            std::vector<int> motif;
            for (int k = 0; k < len; ++k) motif.push_back(static_cast<int>(rng.below(static_cast<std::uint64_t>(vocab))));
            for (int r = 0; r < reps && out.size() < length; ++r)
                for (int k = 0; k < len && out.size() < length; ++k) out.push_back(motif[static_cast<std::size_t>(k)]);
        } else {
            out.push_back(base[i++ % base.size()]);
        }
    }
    return out;
}

namespace {

void check_vocab(const TokenStream& tokens, int vocab)
{
    for (int t : tokens)
        if (t < 0 || t >= vocab)
            throw std::out_of_range("corpus token " + std::to_string(t) + " outside vocabulary of size " +
                                    std::to_string(vocab));
}

double window_loss(TransformerLM& model, nd::Tape& tape, const std::vector<int>& inputs,
                   const std::vector<int>& targets, int batch, int seq_len, nd::Var* loss_out)
{
    nd::Var x = model.embed_tokens(tape, inputs);
    nd::Var h = model.forward(tape, x, batch, seq_len);
    nd::Var loss = nd::cross_entropy(model.logits(tape, h), targets);
    if (loss_out) *loss_out = loss;
    return loss.scalar();
}

}  // namespace

double heldout_cross_entropy(TransformerLM& model, const TokenStream& tokens, int seq_len)
{
    check_vocab(tokens, model.config().vocab);
    if (tokens.size() < static_cast<std::size_t>(seq_len) + 1)
        throw std::invalid_argument("heldout_cross_entropy: corpus shorter than one window");
    const std::size_t windows = (tokens.size() - 1) / static_cast<std::size_t>(seq_len);
    double total = 0.0;
    for (std::size_t w = 0; w < windows; ++w) {
        const std::size_t start = w * static_cast<std::size_t>(seq_len);
        std::vector<int> in(tokens.begin() + static_cast<long>(start), tokens.begin() + static_cast<long>(start) + seq_len);
        std::vector<int> tg(tokens.begin() + static_cast<long>(start) + 1,
                            tokens.begin() + static_cast<long>(start) + seq_len + 1);
        nd::Tape tape;
        total += window_loss(model, tape, in, tg, 1, seq_len, nullptr);
    }
    return total / static_cast<double>(windows);
}

PretrainReport pretrain_clm(TransformerLM& model, const TokenStream& train, const TokenStream& heldout,
                            const PretrainConfig& config)
{
    check_vocab(train, model.config().vocab);
    check_vocab(heldout, model.config().vocab);
    if (config.seq_len < 1 || config.seq_len > model.config().memory_len)
        throw std::invalid_argument("pretrain_clm: seq_len must be in [1, memory_len]");
    if (train.size() < static_cast<std::size_t>(config.seq_len) + 1)
        throw std::invalid_argument("pretrain_clm: training corpus shorter than one window");

    PretrainReport report;
    const bool evaluate = !heldout.empty();
    if (evaluate) {
        report.initial_loss = heldout_cross_entropy(model, heldout, config.seq_len);
        report.history.emplace_back(0, report.initial_loss);
    }

    Rng rng(config.seed);
    nd::ParameterSet& params = model.params();
    nd::OptimizerState opt = nd::make_optimizer_state(params, config.optimizer);
    const std::size_t max_start = train.size() - static_cast<std::size_t>(config.seq_len) - 1;

    for (int step = 1; step <= config.steps; ++step) {
        std::vector<int> in, tg;
        in.reserve(static_cast<std::size_t>(config.batch * config.seq_len));
        tg.reserve(in.capacity());
        for (int b = 0; b < config.batch; ++b) {
            const std::size_t s = rng.below(max_start + 1);
            for (int t = 0; t < config.seq_len; ++t) {
                in.push_back(train[s + static_cast<std::size_t>(t)]);
                tg.push_back(train[s + static_cast<std::size_t>(t) + 1]);
            }
        }
        params.zero_grad();
        nd::Tape tape;
        nd::Var loss;
        window_loss(model, tape, in, tg, config.batch, config.seq_len, &loss);
        tape.backward(loss);
        nd::clip_grad_norm(params, config.max_grad_norm);
        nd::adamw_step(params, opt);
        if (evaluate && config.eval_every > 0 && step % config.eval_every == 0 && step != config.steps)
            report.history.emplace_back(step, heldout_cross_entropy(model, heldout, config.seq_len));
    }
    if (evaluate) {
        report.final_loss = heldout_cross_entropy(model, heldout, config.seq_len);
        if (config.steps > 0) report.history.emplace_back(config.steps, report.final_loss);
    }
    return report;
}

}  // namespace helm::memnet
