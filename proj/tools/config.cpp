#include "config.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "helm/ppo/ppo.hpp"

namespace helm::cli {

namespace {

std::string trim(const std::string& s)
{
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::string format(double v)
{
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

const std::map<std::string, std::string>& defaults()
{
    static const std::map<std::string, std::string> d = {
        {"seed", "0"},
        {"out", "runs"},
        {"budget", "300000"},
        {"checkpoint_every", "50"},

        {"env.kind", "tmaze"},
        {"env.tmaze_length", "8"},
        {"env.tmaze_max_steps", "0"},
        {"env.maze_min", "5"},
        {"env.maze_max", "25"},
        {"env.corridor_min", "7"},
        {"env.corridor_max", "9"},

        {"agent.kind", "helm"},
        {"agent.feature_dim", "32"},
        {"agent.encoder_hidden", "128"},
        {"agent.head_hidden", "128"},

        {"memory.kind", "pretrained"},
        {"memory.checkpoint", ""},
        {"model.vocab", "256"},
        {"model.dim", "32"},
        {"model.layers", "2"},
        {"model.heads", "2"},
        {"model.ff", "64"},
        {"model.memory_len", "32"},

        {"fh.beta", "100"},
        {"fh.scaling", "distance-preserving"},

        {"ppo.lr", ""},
        {"ppo.weight_decay", ""},
        {"ppo.rollout", ""},
        {"ppo.entropy_coef", ""},
        {"ppo.value_coef", ""},
        {"ppo.gamma", ""},
        {"ppo.lambda", ""},
        {"ppo.clip", ""},
        {"ppo.epochs", ""},
        {"ppo.minibatches", ""},
        {"ppo.max_grad_norm", ""},
        {"ppo.num_envs", ""},

        {"pretrain.steps", "2000"},
        {"pretrain.batch", "8"},
        {"pretrain.seq_len", "32"},
        {"pretrain.lr", "3e-3"},
        {"pretrain.weight_decay", "1e-2"},
        {"pretrain.max_grad_norm", "1"},
        {"pretrain.eval_every", "200"},
        {"corpus.kind", "synthetic"},
        {"corpus.length", "200000"},
        {"corpus.heldout", "2000"},
        {"corpus.period", "7"},
        {"corpus.support", "4"},
        {"corpus.vocab", "0"},

        {"analyze.samples", "64"},
        {"analyze.betas", "1,10,100"},
        {"analyze.eps", "0.5"},
        {"analyze.episode_len", "16"},
        {"analyze.checkpoint", ""},

        {"rollout.checkpoint", ""},
        {"rollout.episodes", "1"},
        {"rollout.greedy", "false"},
    };
    return d;
}

const std::vector<std::string>& ppo_keys()
{
    static const std::vector<std::string> k = {"ppo.lr",      "ppo.weight_decay", "ppo.rollout",     "ppo.entropy_coef",
                                               "ppo.value_coef", "ppo.gamma",     "ppo.lambda",      "ppo.clip",
                                               "ppo.epochs",  "ppo.minibatches",  "ppo.max_grad_norm", "ppo.num_envs"};
    return k;
}

}  // namespace

Config::Config() : values_(defaults()) {}

void Config::load_file(const std::filesystem::path& path)
{
    std::ifstream f(path);
    if (!f) throw ConfigError("cannot read config file " + path.string());
    std::string line;
    int number = 0;
    while (std::getline(f, line)) {
        ++number;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        try {
            assign(t);
        } catch (const ConfigError& e) {
            throw ConfigError(path.string() + ":" + std::to_string(number) + ": " + e.what());
        }
    }
}

void Config::assign(const std::string& assignment)
{
    const auto eq = assignment.find('=');
    if (eq == std::string::npos) throw ConfigError("expected key=value, got '" + assignment + "'");
    set(trim(assignment.substr(0, eq)), trim(assignment.substr(eq + 1)));
}

void Config::set(const std::string& key, const std::string& value)
{
    if (!known(key)) throw ConfigError("unknown config key '" + key + "'");
    values_[key] = value;
    explicit_[key] = true;
}

const std::string& Config::str(const std::string& key) const
{
    const auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("unknown config key '" + key + "'");
    return it->second;
}

double Config::number(const std::string& key) const
{
    const std::string& s = str(key);
    double v = 0.0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
        throw ConfigError(key + ": expected a number, got '" + s + "'");
    return v;
}

long Config::integer(const std::string& key) const
{
    const std::string& s = str(key);
    long v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
        throw ConfigError(key + ": expected an integer, got '" + s + "'");
    return v;
}

std::uint64_t Config::seed() const
{
    const std::string& s = str("seed");
    std::uint64_t v = 0;
    const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size() || s.empty())
        throw ConfigError("seed: expected a non-negative integer, got '" + s + "'");
    return v;
}

bool Config::flag(const std::string& key) const
{
    const std::string& s = str(key);
    if (s == "true" || s == "1" || s == "yes") return true;
    if (s == "false" || s == "0" || s == "no") return false;
    throw ConfigError(key + ": expected true or false, got '" + s + "'");
}

std::vector<double> Config::numbers(const std::string& key) const
{
    std::vector<double> out;
    std::stringstream ss(str(key));
    std::string item;
    while (std::getline(ss, item, ',')) {
        const std::string t = trim(item);
        double v = 0.0;
        const auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
        if (ec != std::errc() || p != t.data() + t.size() || t.empty())
            throw ConfigError(key + ": expected comma-separated numbers, got '" + str(key) + "'");
        out.push_back(v);
    }
    return out;
}

void Config::resolve()
{
    const std::string env = str("env.kind");
    if (env != "tmaze" && env != "random-maze" && env != "key-corridor" && env != "unit")
        throw ConfigError("env.kind: unknown environment '" + env + "'");
    const ppo::PpoConfig d = ppo::PpoConfig::defaults_for(env);
    const std::map<std::string, double> fallback = {
        {"ppo.lr", d.lr},           {"ppo.weight_decay", d.weight_decay}, {"ppo.rollout", d.rollout},
        {"ppo.entropy_coef", d.entropy_coef}, {"ppo.value_coef", d.value_coef}, {"ppo.gamma", d.gamma},
        {"ppo.lambda", d.lambda},   {"ppo.clip", d.clip},                 {"ppo.epochs", d.epochs},
        {"ppo.minibatches", d.minibatches}, {"ppo.max_grad_norm", d.max_grad_norm}, {"ppo.num_envs", d.num_envs}};
    for (const auto& k : ppo_keys())
        if (values_[k].empty()) values_[k] = format(fallback.at(k));

    // Type and range checks, so bad values fail before any work starts.
    seed();
    for (const char* k : {"budget", "checkpoint_every", "env.tmaze_length", "env.tmaze_max_steps", "env.maze_min",
                          "env.maze_max", "env.corridor_min", "env.corridor_max", "agent.feature_dim",
                          "agent.encoder_hidden", "agent.head_hidden", "model.vocab", "model.dim", "model.layers",
                          "model.heads", "model.ff", "model.memory_len", "ppo.rollout", "ppo.epochs",
                          "ppo.minibatches", "ppo.num_envs", "pretrain.steps", "pretrain.batch", "pretrain.seq_len",
                          "pretrain.eval_every", "corpus.length", "corpus.heldout", "corpus.period",
                          "corpus.support", "corpus.vocab", "analyze.samples", "analyze.episode_len",
                          "rollout.episodes"})
        if (integer(k) < 0) throw ConfigError(std::string(k) + ": must be >= 0");
    for (const char* k : {"fh.beta", "ppo.lr", "ppo.weight_decay", "ppo.entropy_coef", "ppo.value_coef", "ppo.gamma",
                          "ppo.lambda", "ppo.clip", "ppo.max_grad_norm", "pretrain.lr", "pretrain.weight_decay",
                          "pretrain.max_grad_norm", "analyze.eps"})
        number(k);
    numbers("analyze.betas");
    flag("rollout.greedy");

    if (integer("model.vocab") < 1) throw ConfigError("model.vocab: must be >= 1");
    const long vocab = integer("corpus.vocab");
    if (vocab > integer("model.vocab"))
        throw ConfigError("corpus.vocab: " + std::to_string(vocab) + " exceeds model.vocab " +
                          str("model.vocab"));
    if (!(number("fh.beta") > 0.0)) throw ConfigError("fh.beta: must be > 0");
    const std::string scaling = str("fh.scaling");
    if (scaling != "distance-preserving" && scaling != "variance-n-over-m")
        throw ConfigError("fh.scaling: expected distance-preserving or variance-n-over-m");
    const std::string kind = str("agent.kind");
    if (kind != "helm" && kind != "markov" && kind != "trained-recurrent" && kind != "recurrent")
        throw ConfigError("agent.kind: unknown agent '" + kind + "'");
    const std::string mem = str("memory.kind");
    if (mem != "pretrained" && mem != "frozen-random" && mem != "noise" && mem != "positional")
        throw ConfigError("memory.kind: unknown memory '" + mem + "'");
    const std::string corpus = str("corpus.kind");
    if (corpus != "synthetic" && corpus != "cyclic" && corpus != "markov")
        throw ConfigError("corpus.kind: expected synthetic, cyclic or markov");
    if (corpus == "cyclic" && (integer("corpus.period") < 1 || integer("corpus.period") > integer("model.vocab")))
        throw ConfigError("corpus.period: must be in [1, model.vocab]");
    if (integer("model.heads") < 1 || integer("model.dim") % integer("model.heads") != 0)
        throw ConfigError("model.dim must be divisible by model.heads");
    if (integer("pretrain.seq_len") < 1 || integer("pretrain.seq_len") > integer("model.memory_len"))
        throw ConfigError("pretrain.seq_len: must be in [1, model.memory_len]");
}

std::string Config::text() const
{
    std::ostringstream os;
    for (const auto& [k, v] : values_) os << k << " = " << v << '\n';
    return os.str();
}

void Config::write(const std::filesystem::path& path) const
{
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << text();
}

}  // namespace helm::cli
