#include "helm/memnet/transformer.hpp"

#include <cmath>
#include <stdexcept>

#include "helm/rng.hpp"

namespace helm::memnet {

namespace {
constexpr double ln_eps = 1e-5;
}

void MemoryModelConfig::validate() const
{
    if (vocab < 1) throw std::invalid_argument("memory model: vocab must be >= 1");
    if (dim < 1) throw std::invalid_argument("memory model: dim must be >= 1");
    if (layers < 1) throw std::invalid_argument("memory model: layers must be >= 1");
    if (heads < 1 || dim % heads != 0) throw std::invalid_argument("memory model: dim must be divisible by heads");
    if (ff < 1) throw std::invalid_argument("memory model: ff must be >= 1");
    if (memory_len < 1) throw std::invalid_argument("memory model: memory_len must be >= 1");
}

TransformerLM::TransformerLM(const MemoryModelConfig& config, std::uint64_t seed) : config_(config)
{
    config_.validate();
    Rng rng(seed);
    const int m = config_.dim;
    embed_ = params_.add("embed", nd::init_embedding(rng, config_.vocab, m));
    for (int l = 0; l < config_.layers; ++l) {
        const std::string p = "layer" + std::to_string(l) + ".";
        LayerIndex li{};
        li.ln1_gain = params_.add(p + "ln1.gain", Matrix::Ones(1, m));
        li.ln1_bias = params_.add(p + "ln1.bias", Matrix::Zero(1, m));
        li.wq = params_.add(p + "attn.wq", nd::init_dense(rng, m, m));
        li.wk = params_.add(p + "attn.wk", nd::init_dense(rng, m, m));
        li.wv = params_.add(p + "attn.wv", nd::init_dense(rng, m, m));
        li.wo = params_.add(p + "attn.wo", nd::init_dense(rng, m, m));
        li.rel_bias = params_.add(p + "attn.rel_bias", Matrix::Zero(config_.heads, config_.memory_len));
        li.ln2_gain = params_.add(p + "ln2.gain", Matrix::Ones(1, m));
        li.ln2_bias = params_.add(p + "ln2.bias", Matrix::Zero(1, m));
        li.w1 = params_.add(p + "ff.w1", nd::init_dense(rng, m, config_.ff));
        li.b1 = params_.add(p + "ff.b1", nd::init_bias(rng, m, config_.ff));
        li.w2 = params_.add(p + "ff.w2", nd::init_dense(rng, config_.ff, m));
        li.b2 = params_.add(p + "ff.b2", nd::init_bias(rng, config_.ff, m));
        layers_.push_back(li);
    }
    lnf_gain_ = params_.add("lnf.gain", Matrix::Ones(1, m));
    lnf_bias_ = params_.add("lnf.bias", Matrix::Zero(1, m));
}

nd::Var TransformerLM::embed_tokens(nd::Tape& tape, std::span<const int> tokens)
{
    for (int t : tokens)
        if (t < 0 || t >= config_.vocab)
            throw std::out_of_range("token " + std::to_string(t) + " outside vocabulary of size " +
                                    std::to_string(config_.vocab));
    return nd::gather_rows(tape.param(params_[embed_]), tokens);
}

nd::Var TransformerLM::forward(nd::Tape& tape, nd::Var inputs, int batch, int seq_len)
{
    if (seq_len < 1 || seq_len > config_.memory_len)
        throw std::invalid_argument("forward: sequence length " + std::to_string(seq_len) + " outside [1, " +
                                    std::to_string(config_.memory_len) + "]");
    if (inputs.rows() != static_cast<Eigen::Index>(batch) * seq_len || inputs.cols() != config_.dim)
        throw std::invalid_argument("forward: inputs " + nd::shape_str(inputs.value()) + " do not match batch " +
                                    std::to_string(batch) + " x length " + std::to_string(seq_len) + " x dim " +
                                    std::to_string(config_.dim));
    using namespace nd;
    auto P = [&](std::size_t i) { return tape.param(params_[i]); };
    const int dh = config_.head_dim();
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

    Var h = inputs;
    for (const LayerIndex& li : layers_) {
        Var a = add(mul(layer_norm_rows(h, ln_eps), P(li.ln1_gain)), P(li.ln1_bias));
        Var q = matmul(a, P(li.wq));
        Var k = matmul(a, P(li.wk));
        Var v = matmul(a, P(li.wv));
        Var rel = P(li.rel_bias);
        std::vector<Var> head_bias;
        for (int hd = 0; hd < config_.heads; ++hd) head_bias.push_back(relative_bias(slice_rows(rel, hd, 1), seq_len));

        std::vector<Var> seqs;
        for (int b = 0; b < batch; ++b) {
            Var qb = slice_rows(q, b * seq_len, seq_len);
            Var kb = slice_rows(k, b * seq_len, seq_len);
            Var vb = slice_rows(v, b * seq_len, seq_len);
            std::vector<Var> heads;
            for (int hd = 0; hd < config_.heads; ++hd) {
                Var qh = slice_cols(qb, hd * dh, dh);
                Var kh = slice_cols(kb, hd * dh, dh);
                Var vh = slice_cols(vb, hd * dh, dh);
                Var scores = add(scale(matmul(qh, transpose(kh)), inv_sqrt), head_bias[hd]);
                heads.push_back(matmul(causal_softmax(scores), vh));
            }
            seqs.push_back(heads.size() == 1 ? heads[0] : concat_cols(heads));
        }
        Var attn = seqs.size() == 1 ? seqs[0] : concat_rows(seqs);
        h = add(h, matmul(attn, P(li.wo)));

        Var a2 = add(mul(layer_norm_rows(h, ln_eps), P(li.ln2_gain)), P(li.ln2_bias));
        Var f = add(matmul(relu(add(matmul(a2, P(li.w1)), P(li.b1))), P(li.w2)), P(li.b2));
        h = add(h, f);
    }
    return add(mul(layer_norm_rows(h, ln_eps), P(lnf_gain_)), P(lnf_bias_));
}

nd::Var TransformerLM::logits(nd::Tape& tape, nd::Var hidden)
{
    return nd::matmul(hidden, nd::transpose(tape.param(params_[embed_])));
}

MemoryState TransformerLM::initial_state() const
{
    MemoryState s;
    s.layers.resize(static_cast<std::size_t>(config_.layers));
    return s;
}

RowVector TransformerLM::layer_norm(const RowVector& x, std::size_t gain, std::size_t bias) const
{
    const double mu = x.mean();
    const double var = (x.array() - mu).square().mean();
    RowVector y = (x.array() - mu) / std::sqrt(var + ln_eps);
    return y.cwiseProduct(params_[gain].value.row(0)) + params_[bias].value.row(0);
}

RowVector TransformerLM::step(MemoryState& state, const Eigen::Ref<const RowVector>& x, StepAttention* trace) const
{
    if (x.size() != config_.dim)
        throw std::invalid_argument("memory step: input has dimension " + std::to_string(x.size()) + ", expected " +
                                    std::to_string(config_.dim));
    if (state.layers.size() != layers_.size()) throw std::invalid_argument("memory step: state from another model");

    const int dh = config_.head_dim();
    const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
    const std::size_t keep = static_cast<std::size_t>(config_.memory_len - 1);
    if (trace) trace->assign(layers_.size(), {});

    RowVector h = x;
    for (std::size_t l = 0; l < layers_.size(); ++l) {
        const LayerIndex& li = layers_[l];
        LayerRegister& reg = state.layers[l];
        const RowVector a = layer_norm(h, li.ln1_gain, li.ln1_bias);
        const RowVector q = a * params_[li.wq].value;
        const RowVector k = a * params_[li.wk].value;
        const RowVector v = a * params_[li.wv].value;
        const Matrix& rel = params_[li.rel_bias].value;
        const std::size_t past = reg.keys.size();

        RowVector attn(config_.dim);
        for (int hd = 0; hd < config_.heads; ++hd) {
            Eigen::VectorXd scores(static_cast<Eigen::Index>(past + 1));
            for (std::size_t j = 0; j <= past; ++j) {
                const RowVector& kj = j < past ? reg.keys[j] : k;
                scores(static_cast<Eigen::Index>(j)) =
                    q.segment(hd * dh, dh).dot(kj.segment(hd * dh, dh)) * inv_sqrt +
                    rel(hd, static_cast<Eigen::Index>(past - j));
            }
            Eigen::VectorXd w = (scores.array() - scores.maxCoeff()).exp();
            w /= w.sum();
            RowVector out = RowVector::Zero(dh);
            for (std::size_t j = 0; j <= past; ++j) {
                const RowVector& vj = j < past ? reg.values[j] : v;
                out += w(static_cast<Eigen::Index>(j)) * vj.segment(hd * dh, dh);
            }
            attn.segment(hd * dh, dh) = out;
            if (trace) (*trace)[l].push_back(std::move(w));
        }

        reg.activations.push_back(h);
        reg.keys.push_back(k);
        reg.values.push_back(v);
        while (reg.keys.size() > keep) {
            reg.activations.erase(reg.activations.begin());
            reg.keys.erase(reg.keys.begin());
            reg.values.erase(reg.values.begin());
        }

        h += attn * params_[li.wo].value;
        const RowVector a2 = layer_norm(h, li.ln2_gain, li.ln2_bias);
        RowVector f = (a2 * params_[li.w1].value + params_[li.b1].value).cwiseMax(0.0);
        h += f * params_[li.w2].value + params_[li.b2].value;
    }
    ++state.steps;
    return layer_norm(h, lnf_gain_, lnf_bias_);
}

Matrix TransformerLM::encode(const Matrix& inputs, AttentionMaps* maps) const
{
    const Eigen::Index T = inputs.rows();
    if (T > config_.memory_len)
        throw std::invalid_argument("encode: " + std::to_string(T) + " steps exceed register length " +
                                    std::to_string(config_.memory_len));
    MemoryState state = initial_state();
    Matrix out(T, config_.dim);
    if (maps) {
        maps->assign(layers_.size(), std::vector<Matrix>(static_cast<std::size_t>(config_.heads), Matrix::Zero(T, T)));
    }
    StepAttention trace;
    for (Eigen::Index t = 0; t < T; ++t) {
        out.row(t) = step(state, inputs.row(t), maps ? &trace : nullptr);
        if (!maps) continue;
        for (std::size_t l = 0; l < trace.size(); ++l)
            for (std::size_t hd = 0; hd < trace[l].size(); ++hd)
                (*maps)[l][hd].row(t).head(t + 1) = trace[l][hd].transpose();
    }
    return out;
}

std::vector<nd::NamedArray> TransformerLM::to_arrays(const std::string& prefix) const
{
    std::vector<nd::NamedArray> out = nd::to_arrays(params_, prefix);
    out.push_back(nd::scalar_array(prefix + "config.vocab", config_.vocab));
    out.push_back(nd::scalar_array(prefix + "config.dim", config_.dim));
    out.push_back(nd::scalar_array(prefix + "config.layers", config_.layers));
    out.push_back(nd::scalar_array(prefix + "config.heads", config_.heads));
    out.push_back(nd::scalar_array(prefix + "config.ff", config_.ff));
    out.push_back(nd::scalar_array(prefix + "config.memory_len", config_.memory_len));
    return out;
}

MemoryModelConfig TransformerLM::config_from_arrays(const std::vector<nd::NamedArray>& arrays, const std::string& prefix)
{
    auto get = [&](const char* key) {
        const nd::NamedArray* a = nd::find_array(arrays, prefix + "config." + key);
        if (!a || a->values.size() != 1) throw std::runtime_error("checkpoint: missing " + prefix + "config." + key);
        return static_cast<int>(a->values[0]);
    };
    MemoryModelConfig c;
    c.vocab = get("vocab");
    c.dim = get("dim");
    c.layers = get("layers");
    c.heads = get("heads");
    c.ff = get("ff");
    c.memory_len = get("memory_len");
    return c;
}

void TransformerLM::load(const std::vector<nd::NamedArray>& arrays, const std::string& prefix)
{
    const std::size_t n = nd::load_arrays(params_, arrays, prefix);
    if (n != params_.size())
        throw std::runtime_error("checkpoint: expected " + std::to_string(params_.size()) + " memory arrays, found " +
                                 std::to_string(n));
}

AttentionMaps attention_maps(const TransformerLM& model, const Matrix& episode)
{
    AttentionMaps maps;
    model.encode(episode, &maps);
    return maps;
}

}  // namespace helm::memnet
