#include "helm/memnet/memory.hpp"

#include <cmath>
#include <stdexcept>

#include "helm/ndiff/params.hpp"
#include "helm/rng.hpp"

namespace helm::memnet {

std::string_view to_string(MemoryKind kind)
{
    switch (kind) {
    case MemoryKind::pretrained: return "pretrained";
    case MemoryKind::frozen_random: return "frozen-random";
    case MemoryKind::noise: return "noise";
    case MemoryKind::positional: return "positional";
    }
    return "?";
}

MemoryKind parse_memory_kind(std::string_view name)
{
    if (name == "pretrained") return MemoryKind::pretrained;
    if (name == "frozen-random") return MemoryKind::frozen_random;
    if (name == "noise") return MemoryKind::noise;
    if (name == "positional") return MemoryKind::positional;
    throw std::invalid_argument("unknown memory kind: " + std::string(name));
}

RowVector sinusoidal_embedding(long step, int dim)
{
    RowVector out(dim);
    const double t = static_cast<double>(step);
    for (int i = 0; i < dim; i += 2) {
        const double freq = std::pow(10000.0, -static_cast<double>(i) / dim);
        out(i) = std::sin(t * freq);
        if (i + 1 < dim) out(i + 1) = std::cos(t * freq);
    }
    return out;
}

namespace {

class TransformerMemory final : public Memory {
public:
    TransformerMemory(MemoryKind kind, std::shared_ptr<const TransformerLM> model)
        : kind_(kind), model_(std::move(model))
    {
    }

    MemoryKind kind() const override { return kind_; }
    int dim() const override { return model_->config().dim; }
    MemoryState initial_state(std::uint64_t) const override { return model_->initial_state(); }
    RowVector step(MemoryState& state, const Eigen::Ref<const RowVector>& x) const override
    {
        return model_->step(state, x);
    }
    std::string digest() const override { return model_->digest(); }
    const TransformerLM* transformer() const override { return model_.get(); }

private:
    MemoryKind kind_;
    std::shared_ptr<const TransformerLM> model_;
};

class NoiseMemory final : public Memory {
public:
    explicit NoiseMemory(int dim) : dim_(dim) {}

    MemoryKind kind() const override { return MemoryKind::noise; }
    int dim() const override { return dim_; }
    MemoryState initial_state(std::uint64_t seed) const override
    {
        MemoryState s;
        s.noise_seed = seed;
        return s;
    }
    RowVector step(MemoryState& state, const Eigen::Ref<const RowVector>& x) const override
    {
        if (x.size() != dim_) throw std::invalid_argument("noise memory: input dimension mismatch");
        Rng rng(split_seed(state.noise_seed, "noise", static_cast<std::uint64_t>(state.steps)));
        RowVector h(dim_);
        for (int i = 0; i < dim_; ++i) h(i) = rng.normal();
        ++state.steps;
        return h;
    }
    std::string digest() const override { return nd::sha256_hex(nullptr, 0); }

private:
    int dim_;
};

class PositionalMemory final : public Memory {
public:
    explicit PositionalMemory(int dim) : dim_(dim) {}

    MemoryKind kind() const override { return MemoryKind::positional; }
    int dim() const override { return dim_; }
    MemoryState initial_state(std::uint64_t) const override { return {}; }
    RowVector step(MemoryState& state, const Eigen::Ref<const RowVector>& x) const override
    {
        if (x.size() != dim_) throw std::invalid_argument("positional memory: input dimension mismatch");
        return sinusoidal_embedding(state.steps++, dim_);
    }
    std::string digest() const override { return nd::sha256_hex(nullptr, 0); }

private:
    int dim_;
};

}  // namespace

std::shared_ptr<const Memory> make_memory(MemoryKind kind, const MemoryModelConfig& config, std::uint64_t seed,
                                          std::shared_ptr<const TransformerLM> pretrained)
{
    config.validate();
    switch (kind) {
    case MemoryKind::pretrained:
        if (!pretrained) throw std::invalid_argument("make_memory: pretrained memory needs a trained model");
        return std::make_shared<TransformerMemory>(kind, std::move(pretrained));
    case MemoryKind::frozen_random:
        if (pretrained) return std::make_shared<TransformerMemory>(kind, std::move(pretrained));
        return std::make_shared<TransformerMemory>(kind, std::make_shared<const TransformerLM>(config, seed));
    case MemoryKind::noise: return std::make_shared<NoiseMemory>(config.dim);
    case MemoryKind::positional: return std::make_shared<PositionalMemory>(config.dim);
    }
    throw std::invalid_argument("make_memory: unknown kind");
}

}  // namespace helm::memnet
