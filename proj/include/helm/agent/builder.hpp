#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>

#include "helm/agent/agent.hpp"

namespace helm::agent {

/// Everything needed to assemble an agent and its frozen path.
struct StackConfig {
    AgentConfig agent;
    memnet::MemoryKind memory = memnet::MemoryKind::pretrained;
    memnet::MemoryModelConfig model;
    double beta = 100.0;
    fhopfield::ProjectionScaling scaling = fhopfield::ProjectionScaling::distance_preserving;
};

/// Builds the agent. For the helm kind the token table comes from the memory
/// transformer (the pretrained one, or the random draw for frozen-random);
/// the stateless memories use a random transformer's table so the frozen
/// mapping is still exercised. feature_dim is forced to the model width.
std::unique_ptr<Agent> build_agent(StackConfig config, std::uint64_t seed,
                                   std::shared_ptr<const memnet::TransformerLM> pretrained = nullptr);

/// Whole agent, frozen path included, in the shared checkpoint format:
/// agent.* (trainable weights and config), fh.embeddings, fh.projection,
/// fh.beta, memory.kind, memory.dim and, for transformer memories, memory.*.
std::vector<nd::NamedArray> agent_to_arrays(const Agent& agent);
std::unique_ptr<Agent> agent_from_arrays(const std::vector<nd::NamedArray>& arrays);

void save_agent(const std::filesystem::path& path, const Agent& agent);
std::unique_ptr<Agent> load_agent(const std::filesystem::path& path);

}  // namespace helm::agent
