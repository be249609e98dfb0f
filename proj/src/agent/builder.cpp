#include "helm/agent/builder.hpp"

#include <stdexcept>

namespace helm::agent {

std::unique_ptr<Agent> build_agent(StackConfig config, std::uint64_t seed,
                                   std::shared_ptr<const memnet::TransformerLM> pretrained)
{
    const std::uint64_t net_seed = split_seed(seed, "agent");
    if (config.agent.kind != AgentKind::helm) return std::make_unique<Agent>(config.agent, net_seed);

    if (pretrained) config.model = pretrained->config();
    config.model.validate();
    config.agent.feature_dim = config.model.dim;
    if (config.memory == memnet::MemoryKind::pretrained && !pretrained)
        throw std::invalid_argument("pretrained memory requested without a checkpoint");

    auto memory = memnet::make_memory(config.memory, config.model, split_seed(seed, "memory"), pretrained);
    Matrix table;
    if (const auto* lm = memory->transformer()) {
        table = lm->embeddings();
    } else {
        const memnet::TransformerLM stand_in(config.model, split_seed(seed, "memory"));
        table = stand_in.embeddings();
    }
    auto projection = fhopfield::sample_projection(config.agent.obs_size, config.model.dim,
                                                   split_seed(seed, "projection"), config.scaling);
    auto fh = std::make_shared<const fhopfield::FrozenHopfield>(std::move(table), std::move(projection), config.beta);
    return std::make_unique<Agent>(config.agent, net_seed, std::move(fh), std::move(memory));
}

namespace {

double scalar(const std::vector<nd::NamedArray>& arrays, const std::string& name)
{
    const nd::NamedArray* a = nd::find_array(arrays, name);
    if (!a || a->values.size() != 1) throw std::runtime_error("checkpoint: missing " + name);
    return a->values[0];
}

Matrix matrix(const std::vector<nd::NamedArray>& arrays, const std::string& name)
{
    const nd::NamedArray* a = nd::find_array(arrays, name);
    if (!a) throw std::runtime_error("checkpoint: missing " + name);
    return nd::to_matrix(*a);
}

}  // namespace

std::vector<nd::NamedArray> agent_to_arrays(const Agent& agent)
{
    auto arrays = agent.net().to_arrays("agent.");
    if (agent.kind() != AgentKind::helm) return arrays;
    const auto* fh = agent.frozen_hopfield();
    const auto* memory = agent.memory();
    arrays.push_back(nd::to_named_array("fh.embeddings", fh->store().patterns()));
    arrays.push_back(nd::to_named_array("fh.projection", fh->projection().matrix));
    arrays.push_back(nd::scalar_array("fh.beta", fh->beta()));
    arrays.push_back(nd::scalar_array("memory.kind", static_cast<double>(memory->kind())));
    arrays.push_back(nd::scalar_array("memory.dim", memory->dim()));
    if (const auto* lm = memory->transformer()) {
        auto model = lm->to_arrays("memory.");
        arrays.insert(arrays.end(), model.begin(), model.end());
    }
    return arrays;
}

std::unique_ptr<Agent> agent_from_arrays(const std::vector<nd::NamedArray>& arrays)
{
    AgentConfig c;
    c.kind = static_cast<AgentKind>(static_cast<int>(scalar(arrays, "agent.config.kind")));
    c.obs_size = static_cast<int>(scalar(arrays, "agent.config.obs_size"));
    c.num_actions = static_cast<int>(scalar(arrays, "agent.config.num_actions"));
    c.feature_dim = static_cast<int>(scalar(arrays, "agent.config.feature_dim"));
    c.encoder_hidden = static_cast<int>(scalar(arrays, "agent.config.encoder_hidden"));
    c.head_hidden = static_cast<int>(scalar(arrays, "agent.config.head_hidden"));

    std::unique_ptr<Agent> agent;
    if (c.kind != AgentKind::helm) {
        agent = std::make_unique<Agent>(c, 0);
    } else {
        const auto kind = static_cast<memnet::MemoryKind>(static_cast<int>(scalar(arrays, "memory.kind")));
        std::shared_ptr<const memnet::TransformerLM> model;
        memnet::MemoryModelConfig mc;
        mc.dim = static_cast<int>(scalar(arrays, "memory.dim"));
        if (kind == memnet::MemoryKind::pretrained || kind == memnet::MemoryKind::frozen_random) {
            mc = memnet::TransformerLM::config_from_arrays(arrays, "memory.");
            auto lm = std::make_shared<memnet::TransformerLM>(mc, 0);
            lm->load(arrays, "memory.");
            model = std::move(lm);
        } else {
            mc.heads = 1;
            mc.ff = 1;
            mc.vocab = 1;
        }
        auto memory = memnet::make_memory(kind, mc, 0, model);
        fhopfield::ProjectionMatrix p;
        p.matrix = matrix(arrays, "fh.projection");
        auto fh = std::make_shared<const fhopfield::FrozenHopfield>(matrix(arrays, "fh.embeddings"), std::move(p),
                                                                    scalar(arrays, "fh.beta"));
        agent = std::make_unique<Agent>(c, 0, std::move(fh), std::move(memory));
    }
    agent->net().load(arrays, "agent.");
    return agent;
}

void save_agent(const std::filesystem::path& path, const Agent& agent)
{
    nd::write_checkpoint(path, agent_to_arrays(agent));
}

std::unique_ptr<Agent> load_agent(const std::filesystem::path& path)
{
    return agent_from_arrays(nd::read_checkpoint(path));
}

}  // namespace helm::agent
