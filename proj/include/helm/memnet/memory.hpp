#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "helm/memnet/transformer.hpp"

namespace helm::memnet {

enum class MemoryKind { pretrained, frozen_random, noise, positional };

std::string_view to_string(MemoryKind kind);
/// Accepts "pretrained", "frozen-random", "noise", "positional".
MemoryKind parse_memory_kind(std::string_view name);

/// History-compression module with frozen behaviour: step() never learns.
class Memory {
public:
    virtual ~Memory() = default;

    virtual MemoryKind kind() const = 0;
    virtual int dim() const = 0;
    /// Fresh per-episode state; `seed` only matters for the noise memory.
    virtual MemoryState initial_state(std::uint64_t seed) const = 0;
    virtual RowVector step(MemoryState& state, const Eigen::Ref<const RowVector>& x) const = 0;
    /// Hash over every weight the memory owns (empty set for stateless kinds).
    virtual std::string digest() const = 0;
    /// Underlying transformer for the transformer kinds, otherwise nullptr.
    virtual const TransformerLM* transformer() const { return nullptr; }
};

/// Sinusoidal embedding of a step index: (sin, cos) pairs at frequencies
/// 10000^(-2i/dim).
RowVector sinusoidal_embedding(long step, int dim);

/// Builds a memory variant. `pretrained` must be supplied for
/// MemoryKind::pretrained; frozen_random uses it when given (a reloaded
/// random draw) and otherwise draws a fresh transformer from `seed`. The
/// stateless kinds ignore it.
std::shared_ptr<const Memory> make_memory(MemoryKind kind, const MemoryModelConfig& config, std::uint64_t seed,
                                          std::shared_ptr<const TransformerLM> pretrained = nullptr);

}  // namespace helm::memnet
