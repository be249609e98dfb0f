#include <CLI11.hpp>

#include <iostream>
#include <sstream>

#include "commands.hpp"

using namespace helm::cli;

namespace {

std::vector<std::string> split_list(const std::string& s)
{
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ','))
        if (!item.empty()) out.push_back(item);
    return out;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"helm: frozen-memory agents for partially observable gridworlds"};
    app.require_subcommand(1);

    std::string config_file;
    std::vector<std::string> overrides;
    const auto add_config = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_file, "flat key = value config file");
        cmd->add_option("--set", overrides, "override one key (key=value); repeatable");
    };
    TrainOptions train_options;
    const auto add_seeds = [&](CLI::App* cmd) {
        cmd->add_option("--seeds", train_options.seeds, "number of seeds")->check(CLI::PositiveNumber);
        cmd->add_option("--jobs", train_options.jobs, "seeds trained in parallel")->check(CLI::PositiveNumber);
    };

    auto* pretrain = app.add_subcommand("pretrain", "causal-LM pretraining of the memory transformer");
    add_config(pretrain);
    auto* train = app.add_subcommand("train", "PPO training, one learning curve per seed");
    add_config(train);
    add_seeds(train);
    auto* ablate = app.add_subcommand("ablate", "train every memory variant over shared seeds");
    add_config(ablate);
    add_seeds(ablate);
    std::string variants = "helm,frozen-random,noise,positional,markov,trained-recurrent";
    ablate->add_option("--variants", variants, "comma-separated variants");
    auto* analyze = app.add_subcommand("analyze", "distance matrices, tokens, attention maps, JL report");
    add_config(analyze);
    auto* stats = app.add_subcommand("stats", "IQM, bootstrap CIs and rank-sum tests over curve files");
    std::vector<std::string> inputs;
    std::string stats_out = ".";
    std::uint64_t stats_seed = 0;
    stats->add_option("inputs", inputs, "curve files or directories")->required();
    stats->add_option("--out", stats_out, "directory for summary.csv and pairwise.csv");
    stats->add_option("--seed", stats_seed, "bootstrap seed");
    auto* rollout = app.add_subcommand("rollout", "play episodes with a checkpointed agent");
    add_config(rollout);
    bool render = false;
    rollout->add_flag("--render", render, "print ASCII frames");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? exit_ok : exit_config;
    }

    try {
        Config config;
        if (!config_file.empty()) config.load_file(config_file);
        for (const auto& o : overrides) config.assign(o);
        if (*stats) {
            std::vector<std::filesystem::path> paths(inputs.begin(), inputs.end());
            const auto tables = compute_stats(paths, stats_seed);
            write_stats(tables, stats_out);
            for (const auto& r : tables.summary)
                std::cout << r.method << ',' << r.env << ": IQM " << r.iqm << " [" << r.ci_lo << ", " << r.ci_hi
                          << "] n=" << r.n_seeds << '\n';
            return exit_ok;
        }
        config.resolve();
        if (*pretrain) cmd_pretrain(config, std::cout);
        if (*train) cmd_train(config, train_options, std::cout);
        if (*ablate) cmd_ablate(config, train_options, split_list(variants), std::cout);
        if (*analyze) cmd_analyze(config, std::cout);
        if (*rollout) cmd_rollout(config, render, std::cout);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return exit_config;
    } catch (const InputError& e) {
        std::cerr << "input error: " << e.what() << '\n';
        return exit_config;
    } catch (const std::invalid_argument& e) {
        std::cerr << "invalid argument: " << e.what() << '\n';
        return exit_config;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_runtime;
    }
    return exit_ok;
}
