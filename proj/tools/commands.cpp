#include "commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>

#include "helm/memnet/memory.hpp"
#include "helm/memnet/pretrain.hpp"
#include "helm/ndiff/checkpoint.hpp"
#include "helm/stats/stats.hpp"

namespace helm::cli {

namespace fs = std::filesystem;

namespace {

std::ofstream open_out(const fs::path& path)
{
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f.precision(17);
    return f;
}

memnet::MemoryModelConfig model_config(const Config& c)
{
    memnet::MemoryModelConfig m;
    m.vocab = static_cast<int>(c.integer("model.vocab"));
    m.dim = static_cast<int>(c.integer("model.dim"));
    m.layers = static_cast<int>(c.integer("model.layers"));
    m.heads = static_cast<int>(c.integer("model.heads"));
    m.ff = static_cast<int>(c.integer("model.ff"));
    m.memory_len = static_cast<int>(c.integer("model.memory_len"));
    return m;
}

std::shared_ptr<const memnet::TransformerLM> load_model(const fs::path& path)
{
    const auto arrays = nd::read_checkpoint(path);
    auto model = std::make_shared<memnet::TransformerLM>(memnet::TransformerLM::config_from_arrays(arrays), 0);
    model->load(arrays);
    return model;
}

std::string format_beta(double beta)
{
    std::ostringstream os;
    os << beta;
    return os.str();
}

}  // namespace

envs::EnvSpec env_spec(const Config& c)
{
    envs::EnvSpec s;
    s.kind = c.str("env.kind");
    s.tmaze_length = static_cast<int>(c.integer("env.tmaze_length"));
    s.tmaze_max_steps = static_cast<int>(c.integer("env.tmaze_max_steps"));
    s.maze_min_size = static_cast<int>(c.integer("env.maze_min"));
    s.maze_max_size = static_cast<int>(c.integer("env.maze_max"));
    s.corridor_min_length = static_cast<int>(c.integer("env.corridor_min"));
    s.corridor_max_length = static_cast<int>(c.integer("env.corridor_max"));
    return s;
}

ppo::PpoConfig ppo_config(const Config& c)
{
    ppo::PpoConfig p;
    p.lr = c.number("ppo.lr");
    p.weight_decay = c.number("ppo.weight_decay");
    p.rollout = static_cast<int>(c.integer("ppo.rollout"));
    p.entropy_coef = c.number("ppo.entropy_coef");
    p.value_coef = c.number("ppo.value_coef");
    p.gamma = c.number("ppo.gamma");
    p.lambda = c.number("ppo.lambda");
    p.clip = c.number("ppo.clip");
    p.epochs = static_cast<int>(c.integer("ppo.epochs"));
    p.minibatches = static_cast<int>(c.integer("ppo.minibatches"));
    p.max_grad_norm = c.number("ppo.max_grad_norm");
    p.num_envs = static_cast<int>(c.integer("ppo.num_envs"));
    p.total_steps = c.integer("budget");
    return p;
}

agent::StackConfig stack_config(const Config& c)
{
    agent::StackConfig s;
    s.agent.kind = agent::parse_agent_kind(c.str("agent.kind"));
    s.agent.feature_dim = static_cast<int>(c.integer("agent.feature_dim"));
    s.agent.encoder_hidden = static_cast<int>(c.integer("agent.encoder_hidden"));
    s.agent.head_hidden = static_cast<int>(c.integer("agent.head_hidden"));
    const auto env = envs::make_env(env_spec(c));
    s.agent.obs_size = env->obs_size();
    s.agent.num_actions = env->num_actions();
    s.memory = memnet::parse_memory_kind(c.str("memory.kind"));
    s.model = model_config(c);
    s.beta = c.number("fh.beta");
    s.scaling = c.str("fh.scaling") == "variance-n-over-m" ? fhopfield::ProjectionScaling::variance_n_over_m
                                                           : fhopfield::ProjectionScaling::distance_preserving;
    return s;
}

std::string method_name(const Config& c)
{
    const auto kind = agent::parse_agent_kind(c.str("agent.kind"));
    if (kind != agent::AgentKind::helm) return std::string(agent::to_string(kind));
    const auto memory = memnet::parse_memory_kind(c.str("memory.kind"));
    if (memory == memnet::MemoryKind::pretrained) return "helm";
    return std::string(memnet::to_string(memory));
}

const std::vector<std::string>& ablation_variants()
{
    static const std::vector<std::string> v = {"helm",   "frozen-random", "noise", "positional",
                                               "markov", "trained-recurrent"};
    return v;
}

Config variant_config(const Config& base, const std::string& variant)
{
    Config c = base;
    if (variant == "markov" || variant == "trained-recurrent") {
        c.set("agent.kind", variant);
    } else if (variant == "helm" || variant == "frozen-random" || variant == "noise" || variant == "positional") {
        c.set("agent.kind", "helm");
        c.set("memory.kind", variant == "helm" ? "pretrained" : variant);
    } else {
        throw ConfigError("unknown ablation variant '" + variant + "'");
    }
    return c;
}

PretrainResult cmd_pretrain(const Config& c, std::ostream& log)
{
    const fs::path dir = fs::path(c.str("out")) / "pretrain";
    c.write(dir / "config.txt");

    const auto mc = model_config(c);
    const long vocab = c.integer("corpus.vocab") > 0 ? c.integer("corpus.vocab") : mc.vocab;
    const auto length = static_cast<std::size_t>(c.integer("corpus.length"));
    const auto heldout = static_cast<std::size_t>(c.integer("corpus.heldout"));
    const std::uint64_t seed = split_seed(c.seed(), "corpus");
    const std::string kind = c.str("corpus.kind");

    memnet::TokenStream all;
    if (kind == "cyclic") {
        all = memnet::cyclic_corpus(static_cast<int>(c.integer("corpus.period")), length + heldout);
    } else if (kind == "markov") {
        const auto chain = memnet::random_markov_chain(static_cast<int>(vocab),
                                                       static_cast<int>(c.integer("corpus.support")), seed);
        Rng rng(split_seed(seed, "sample"));
        all = chain.sample(length + heldout, rng);
        log << "chain entropy rate " << chain.entropy_rate() << " nats (perplexity "
            << std::exp(chain.entropy_rate()) << ")\n";
    } else {
        all = memnet::synthetic_corpus(static_cast<int>(vocab), length + heldout, seed);
    }
    const memnet::TokenStream train(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(length));
    const memnet::TokenStream held(all.begin() + static_cast<std::ptrdiff_t>(length), all.end());

    memnet::PretrainConfig pc;
    pc.steps = static_cast<int>(c.integer("pretrain.steps"));
    pc.batch = static_cast<int>(c.integer("pretrain.batch"));
    pc.seq_len = static_cast<int>(c.integer("pretrain.seq_len"));
    pc.optimizer.lr = c.number("pretrain.lr");
    pc.optimizer.weight_decay = c.number("pretrain.weight_decay");
    pc.max_grad_norm = c.number("pretrain.max_grad_norm");
    pc.eval_every = static_cast<int>(c.integer("pretrain.eval_every"));
    pc.seed = split_seed(c.seed(), "pretrain");

    memnet::TransformerLM model(mc, split_seed(c.seed(), "memory"));
    const auto report = memnet::pretrain_clm(model, train, held, pc);

    auto csv = open_out(dir / "perplexity.csv");
    csv << "step,heldout_loss,perplexity\n";
    for (const auto& [step, loss] : report.history) csv << step << ',' << loss << ',' << std::exp(loss) << '\n';

    PretrainResult result;
    result.checkpoint = dir / "model.ckpt";
    result.initial_perplexity = std::exp(report.initial_loss);
    result.final_perplexity = std::exp(report.final_loss);
    nd::write_checkpoint(result.checkpoint, model.to_arrays());
    log << "held-out perplexity " << result.initial_perplexity << " -> " << result.final_perplexity << "\n"
        << "wrote " << result.checkpoint.string() << "\n";
    return result;
}

std::shared_ptr<const memnet::TransformerLM> memory_model(const Config& c, std::ostream& log)
{
    if (agent::parse_agent_kind(c.str("agent.kind")) != agent::AgentKind::helm) return nullptr;
    const auto kind = memnet::parse_memory_kind(c.str("memory.kind"));
    const std::string ckpt = c.str("memory.checkpoint");
    if (!ckpt.empty()) {
        if (kind != memnet::MemoryKind::pretrained && kind != memnet::MemoryKind::frozen_random) return nullptr;
        return load_model(ckpt);
    }
    if (kind != memnet::MemoryKind::pretrained) return nullptr;
    log << "no memory.checkpoint given; pretraining the memory model\n";
    return load_model(cmd_pretrain(c, log).checkpoint);
}

std::vector<CurveRow> read_curve(const fs::path& path)
{
    std::ifstream f(path);
    if (!f) throw InputError("cannot read " + path.string());
    std::string line;
    int number = 0;
    const auto fail = [&](const std::string& what) {
        throw InputError(path.string() + ":" + std::to_string(number) + ": " + what);
    };
    if (!std::getline(f, line)) {
        number = 1;
        fail("missing header");
    }
    number = 1;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != "step,episode,return,length,seed") fail("expected header step,episode,return,length,seed");

    std::vector<CurveRow> rows;
    while (std::getline(f, line)) {
        ++number;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (fields.size() != 5) fail("expected 5 fields, got " + std::to_string(fields.size()));
        CurveRow r;
        const auto parse = [&](const std::string& s, auto& out) {
            const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
            if (s.empty() || ec != std::errc() || p != s.data() + s.size()) fail("bad value '" + s + "'");
        };
        parse(fields[0], r.step);
        parse(fields[1], r.episode);
        parse(fields[2], r.ret);
        parse(fields[3], r.length);
        parse(fields[4], r.seed);
        if (!std::isfinite(r.ret)) fail("non-finite return");
        rows.push_back(r);
    }
    return rows;
}

void write_curve(const fs::path& path, const std::vector<ppo::EpisodeRecord>& episodes, std::uint64_t seed)
{
    auto f = open_out(path);
    f << "step,episode,return,length,seed\n";
    for (const auto& e : episodes)
        f << e.step << ',' << e.episode << ',' << e.ret << ',' << e.length << ',' << seed << '\n';
}

void cmd_train(const Config& c, const TrainOptions& options, std::ostream& log,
               std::shared_ptr<const memnet::TransformerLM> model)
{
    if (options.seeds < 1) throw ConfigError("--seeds must be >= 1");
    if (options.jobs < 1) throw ConfigError("--jobs must be >= 1");
    const auto spec = env_spec(c);
    const auto prototype = envs::make_env(spec);
    const auto stack = stack_config(c);
    const auto ppo_cfg = ppo_config(c);
    ppo_cfg.validate();
    if (!model) model = memory_model(c, log);

    const fs::path out(c.str("out"));
    const std::string method = method_name(c);
    const fs::path curves = out / "curves" / spec.kind / method;
    const fs::path checkpoints = out / "checkpoints" / spec.kind / method;
    c.write(out / "config.txt");
    c.write(curves / "config.txt");
    const long every = c.integer("checkpoint_every");

    std::mutex log_mutex;
    const auto run = [&](int i) {
        const std::uint64_t seed = split_seed(c.seed(), "run", static_cast<std::uint64_t>(i));
        auto ag = agent::build_agent(stack, seed, model);
        const fs::path ckdir = checkpoints / ("seed_" + std::to_string(i));
        fs::create_directories(ckdir);
        agent::save_agent(ckdir / "initial.ckpt", *ag);
        ppo::TrainHooks hooks;
        if (every > 0)
            hooks.after_update = [&](const agent::Agent& a, int update, long) {
                if (update % every == 0)
                    agent::save_agent(ckdir / ("update_" + std::to_string(update) + ".ckpt"), a);
            };
        const auto record = ppo::train(*ag, *prototype, ppo_cfg, seed, hooks);
        if (ppo_cfg.total_steps > 0) agent::save_agent(ckdir / "final.ckpt", *ag);
        write_curve(curves / ("seed_" + std::to_string(i) + ".csv"), record.episodes, seed);

        std::vector<double> returns;
        for (const auto& e : record.episodes) returns.push_back(e.ret);
        std::lock_guard lock(log_mutex);
        log << method << " seed " << i << ": " << record.steps << " steps, " << record.episodes.size()
            << " episodes";
        if (!returns.empty()) log << ", last-100 mean return " << stats::tail_mean(returns);
        log << '\n';
    };

    if (options.jobs == 1) {
        for (int i = 0; i < options.seeds; ++i) run(i);
        return;
    }
    // Seeds are independent; each worker owns its agent, envs and RNGs.
    std::vector<std::thread> workers;
    std::mutex next_mutex;
    int next = 0;
    std::exception_ptr error;
    for (int w = 0; w < std::min(options.jobs, options.seeds); ++w)
        workers.emplace_back([&] {
            for (;;) {
                int i;
                {
                    std::lock_guard lock(next_mutex);
                    if (next >= options.seeds || error) return;
                    i = next++;
                }
                try {
                    run(i);
                } catch (...) {
                    std::lock_guard lock(next_mutex);
                    if (!error) error = std::current_exception();
                }
            }
        });
    for (auto& t : workers) t.join();
    if (error) std::rethrow_exception(error);
}

void cmd_ablate(const Config& c, const TrainOptions& options, const std::vector<std::string>& variants,
                std::ostream& log)
{
    if (variants.empty()) throw ConfigError("no ablation variants given");
    std::vector<Config> configs;
    for (const auto& v : variants) configs.push_back(variant_config(c, v));
    c.write(fs::path(c.str("out")) / "config.txt");

    // One memory model shared by every variant that needs it.
    std::shared_ptr<const memnet::TransformerLM> pretrained;
    for (const auto& vc : configs) {
        if (memnet::parse_memory_kind(vc.str("memory.kind")) != memnet::MemoryKind::pretrained ||
            agent::parse_agent_kind(vc.str("agent.kind")) != agent::AgentKind::helm)
            continue;
        pretrained = memory_model(vc, log);
        break;
    }
    for (std::size_t k = 0; k < configs.size(); ++k) {
        log << "variant " << variants[k] << '\n';
        const bool uses = memnet::parse_memory_kind(configs[k].str("memory.kind")) == memnet::MemoryKind::pretrained;
        cmd_train(configs[k], options, log, uses ? pretrained : nullptr);
    }
    const fs::path out(c.str("out"));
    const auto tables = compute_stats({out / "curves" / c.str("env.kind")}, split_seed(c.seed(), "stats"));
    write_stats(tables, out);
    for (const auto& r : tables.summary)
        log << r.method << ": IQM " << r.iqm << " [" << r.ci_lo << ", " << r.ci_hi << "] over " << r.n_seeds
            << " seeds\n";
}

StatsTables compute_stats(const std::vector<fs::path>& inputs, std::uint64_t seed)
{
    std::vector<fs::path> files;
    for (const auto& in : inputs) {
        if (fs::is_directory(in)) {
            for (const auto& e : fs::recursive_directory_iterator(in))
                if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
        } else if (fs::is_regular_file(in)) {
            files.push_back(in);
        } else {
            throw InputError("no such file or directory: " + in.string());
        }
    }
    std::sort(files.begin(), files.end());
    if (files.empty()) throw InputError("no curve files found");

    // (env, method) -> per-seed scores
    std::map<std::pair<std::string, std::string>, std::vector<double>> scores;
    for (const auto& f : files) {
        const auto rows = read_curve(f);
        if (rows.empty()) throw InputError(f.string() + ": no episodes");
        std::vector<double> returns;
        for (const auto& r : rows) returns.push_back(r.ret);
        const fs::path abs = fs::absolute(f);
        const std::string method = abs.parent_path().filename().string();
        const std::string env = abs.parent_path().parent_path().filename().string();
        scores[{env, method}].push_back(stats::tail_mean(returns));
    }

    StatsTables t;
    std::set<std::string> envs;
    for (const auto& [key, s] : scores) {
        envs.insert(key.first);
        const auto ci = stats::bootstrap_ci(s, 2000, 0.95, seed);
        t.summary.push_back({key.second, key.first, stats::iqm(s), ci.lo, ci.hi, s.size()});
    }
    for (const auto& [a, sa] : scores)
        for (const auto& [b, sb] : scores) {
            if (a.first != b.first || a.second == b.second) continue;
            const std::string prefix = envs.size() > 1 ? a.first + "/" : "";
            t.pairwise.push_back({prefix + a.second, prefix + b.second, stats::wilcoxon_rank_sum_greater(sa, sb)});
        }
    return t;
}

void write_stats(const StatsTables& t, const fs::path& dir)
{
    auto s = open_out(dir / "summary.csv");
    s << "method,env,iqm,ci_lo,ci_hi,n_seeds\n";
    for (const auto& r : t.summary)
        s << r.method << ',' << r.env << ',' << r.iqm << ',' << r.ci_lo << ',' << r.ci_hi << ',' << r.n_seeds << '\n';
    auto p = open_out(dir / "pairwise.csv");
    p << "method_a,method_b,p_value\n";
    for (const auto& r : t.pairwise) p << r.method_a << ',' << r.method_b << ',' << r.p_value << '\n';
}

namespace {

std::unique_ptr<agent::Agent> agent_for(const Config& c, const std::string& checkpoint_key, std::ostream& log)
{
    const std::string ckpt = c.str(checkpoint_key);
    if (!ckpt.empty()) return agent::load_agent(ckpt);
    return agent::build_agent(stack_config(c), split_seed(c.seed(), "run", 0), memory_model(c, log));
}

void write_matrix_csv(const fs::path& path, const Eigen::MatrixXd& m)
{
    auto f = open_out(path);
    f << "id";
    for (Eigen::Index j = 0; j < m.cols(); ++j) f << ',' << j;
    f << '\n';
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        f << i;
        for (Eigen::Index j = 0; j < m.cols(); ++j) f << ',' << m(i, j);
        f << '\n';
    }
}

// Plain (ASCII) graymap, weight 1 -> 255.
void write_pgm(const fs::path& path, const Eigen::MatrixXd& m)
{
    auto f = open_out(path);
    f << "P2\n" << m.cols() << ' ' << m.rows() << "\n255\n";
    for (Eigen::Index i = 0; i < m.rows(); ++i) {
        for (Eigen::Index j = 0; j < m.cols(); ++j)
            f << (j ? " " : "") << static_cast<int>(std::lround(255.0 * std::clamp(m(i, j), 0.0, 1.0)));
        f << '\n';
    }
}

}  // namespace

void cmd_analyze(const Config& c, std::ostream& log)
{
    Config hc = c;
    if (hc.str("analyze.checkpoint").empty() && hc.str("agent.kind") != "helm") {
        log << "analysis needs the frozen path; using agent.kind = helm\n";
        hc.set("agent.kind", "helm");
    }
    auto ag = agent_for(hc, "analyze.checkpoint", log);
    const auto* fh = ag->frozen_hopfield();
    if (!fh) throw ConfigError("analyze.checkpoint holds an agent without the frozen path");
    const bool policy = !hc.str("analyze.checkpoint").empty();

    const fs::path dir = fs::path(c.str("out")) / "analysis";
    hc.write(dir / "config.txt");

    // Observations from the loaded policy, or uniformly random actions.
    auto env = envs::make_env(env_spec(c));
    const auto samples = static_cast<std::size_t>(c.integer("analyze.samples"));
    const auto episode_len = static_cast<std::size_t>(c.integer("analyze.episode_len"));
    Rng rng(split_seed(c.seed(), "analyze"));
    std::vector<Eigen::VectorXd> observations, first_episode;
    for (long episode = 0; observations.size() < std::max<std::size_t>(samples, 2); ++episode) {
        envs::Grid obs = env->reset(split_seed(c.seed(), "episode", static_cast<std::uint64_t>(episode)));
        auto state = ag->initial_state(split_seed(c.seed(), "noise", static_cast<std::uint64_t>(episode)));
        for (;;) {
            observations.push_back(envs::flatten(obs));
            if (episode == 0 && first_episode.size() < episode_len) first_episode.push_back(observations.back());
            const int action = policy ? ag->act(obs, state, rng).action
                                      : static_cast<int>(rng.below(static_cast<std::uint64_t>(env->num_actions())));
            const auto step = env->step(action);
            if (step.done || observations.size() >= samples) break;
            obs = step.observation;
        }
    }
    observations.resize(std::max<std::size_t>(samples, 2));
    Eigen::MatrixXd obs_rows(static_cast<Eigen::Index>(observations.size()), fh->obs_dim());
    for (std::size_t i = 0; i < observations.size(); ++i)
        obs_rows.row(static_cast<Eigen::Index>(i)) = observations[i].transpose();

    const auto betas = c.numbers("analyze.betas");
    const auto dm = fhopfield::distance_matrices(obs_rows, *fh, betas);
    write_matrix_csv(dir / "distances_observation.csv", dm.observation);
    for (const auto& [beta, m] : dm.embedded) write_matrix_csv(dir / ("distances_beta_" + format_beta(beta) + ".csv"), m);

    {
        auto f = open_out(dir / "tokens.csv");
        f << "step,token_index\n";
        for (std::size_t t = 0; t < first_episode.size(); ++t) f << t << ',' << fh->nearest_token(first_episode[t]) << '\n';
    }

    // All ordered pairs of distinct samples through the projection.
    std::vector<Eigen::Index> a, b;
    for (Eigen::Index i = 0; i < obs_rows.rows(); ++i)
        for (Eigen::Index j = i + 1; j < obs_rows.rows(); ++j) {
            a.push_back(i);
            b.push_back(j);
        }
    Eigen::MatrixXd first(static_cast<Eigen::Index>(a.size()), obs_rows.cols()), second(first.rows(), first.cols());
    for (std::size_t k = 0; k < a.size(); ++k) {
        first.row(static_cast<Eigen::Index>(k)) = obs_rows.row(a[k]);
        second.row(static_cast<Eigen::Index>(k)) = obs_rows.row(b[k]);
    }
    const auto jl = fhopfield::distortion_stats(fh->projection(), first, second, c.number("analyze.eps"));
    {
        auto f = open_out(dir / "jl_report.csv");
        f << "eps,embed_dim,delta,pairs,skipped,violations,violation_fraction,mean_ratio,min_ratio,max_ratio\n"
          << jl.eps << ',' << jl.embed_dim << ',' << jl.delta << ',' << jl.pairs << ',' << jl.skipped << ','
          << jl.violations << ',' << jl.violation_fraction << ',' << jl.mean_ratio << ',' << jl.min_ratio << ','
          << jl.max_ratio << '\n';
    }

    const auto* model = ag->memory() ? ag->memory()->transformer() : nullptr;
    if (model && !first_episode.empty()) {
        const auto len = std::min<std::size_t>(first_episode.size(), static_cast<std::size_t>(model->config().memory_len));
        Eigen::MatrixXd inputs(static_cast<Eigen::Index>(len), model->config().dim);
        for (std::size_t t = 0; t < len; ++t) inputs.row(static_cast<Eigen::Index>(t)) = fh->embed(first_episode[t]).transpose();
        const auto maps = memnet::attention_maps(*model, inputs);
        for (std::size_t l = 0; l < maps.size(); ++l)
            for (std::size_t h = 0; h < maps[l].size(); ++h) {
                const std::string stem = "attention_l" + std::to_string(l) + "_h" + std::to_string(h);
                write_pgm(dir / (stem + ".pgm"), maps[l][h]);
                write_matrix_csv(dir / (stem + ".csv"), maps[l][h]);
            }
    } else {
        log << "memory has no attention; skipping attention maps\n";
    }
    log << "JL: " << jl.violations << " violations over " << jl.pairs << " pairs (delta " << jl.delta
        << "), mean ratio " << jl.mean_ratio << "\nwrote " << dir.string() << '\n';
}

void cmd_rollout(const Config& c, bool render, std::ostream& out)
{
    auto ag = agent_for(c, "rollout.checkpoint", out);
    auto env = envs::make_env(env_spec(c));
    if (env->obs_size() != ag->config().obs_size || env->num_actions() != ag->config().num_actions)
        throw ConfigError("checkpointed agent does not match env.kind " + c.str("env.kind"));
    const bool greedy = c.flag("rollout.greedy");
    Rng rng(split_seed(c.seed(), "actions"));
    const long episodes = c.integer("rollout.episodes");
    for (long k = 0; k < episodes; ++k) {
        envs::Grid obs = env->reset(split_seed(c.seed(), "episode", static_cast<std::uint64_t>(k)));
        auto state = ag->initial_state(split_seed(c.seed(), "noise", static_cast<std::uint64_t>(k)));
        double ret = 0;
        int length = 0;
        static constexpr const char* names[] = {"up", "down", "left", "right", "pickup", "toggle"};
        for (;;) {
            if (render) out << "episode " << k << " step " << length << '\n' << env->render();
            const auto a = ag->act(obs, state, rng, greedy);
            const auto step = env->step(a.action);
            ret += step.reward;
            ++length;
            if (render) out << "action " << names[a.action] << " reward " << step.reward << "\n\n";
            if (step.done) break;
            obs = step.observation;
        }
        if (render) out << "episode " << k << " final\n" << env->render() << '\n';
        out << "episode " << k << " return " << ret << " length " << length << '\n';
    }
}

}  // namespace helm::cli
