#include "helm/envs/env.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace helm::envs {

namespace {

void require_running(bool done, std::string_view env)
{
    if (done) throw std::logic_error(std::string(env) + ": step() after the episode ended; call reset()");
}

void check_action(int action, int count, std::string_view env)
{
    if (action < 0 || action >= count)
        throw std::out_of_range(std::string(env) + ": action " + std::to_string(action) + " outside [0, " +
                                std::to_string(count) + ")");
}

bool inside(const Grid& g, Position p) { return p.row >= 0 && p.col >= 0 && p.row < g.rows() && p.col < g.cols(); }

int cell_at(const Grid& g, Position p) { return inside(g, p) ? g(p.row, p.col) : Cell::wall; }

char glyph(int code)
{
    static constexpr char glyphs[] = " #GKDdLRO";
    return code >= 0 && code <= max_cell_code ? glyphs[code] : '?';
}

std::string draw(const Grid& g, Position agent)
{
    std::string out;
    for (Eigen::Index r = 0; r < g.rows(); ++r) {
        for (Eigen::Index c = 0; c < g.cols(); ++c)
            out += (r == agent.row && c == agent.col) ? '@' : glyph(g(r, c));
        out += '\n';
    }
    return out;
}

}  // namespace

Position moved(Position p, int action)
{
    switch (action) {
    case Action::up: return {p.row - 1, p.col};
    case Action::down: return {p.row + 1, p.col};
    case Action::left: return {p.row, p.col - 1};
    case Action::right: return {p.row, p.col + 1};
    default: return p;
    }
}

Grid crop(const Grid& grid, Position center, int rows, int cols)
{
    if (rows % 2 == 0 || cols % 2 == 0) throw std::invalid_argument("crop: extents must be odd");
    Grid out(rows, cols);
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c)
            out(r, c) = cell_at(grid, {center.row - rows / 2 + r, center.col - cols / 2 + c});
    return out;
}

Eigen::VectorXd flatten(const Grid& observation)
{
    Eigen::VectorXd v(observation.size());
    Eigen::Index k = 0;
    for (Eigen::Index r = 0; r < observation.rows(); ++r)
        for (Eigen::Index c = 0; c < observation.cols(); ++c)
            v(k++) = static_cast<double>(observation(r, c)) / max_cell_code;
    return v;
}

// RandomMaze

RandomMaze::RandomMaze(Options options) : options_(options)
{
    if (options_.min_size < 3 || options_.max_size < options_.min_size)
        throw std::invalid_argument("random-maze: need 3 <= min_size <= max_size");
    if (options_.view < 1 || options_.view % 2 == 0) throw std::invalid_argument("random-maze: view must be odd");
    if (options_.limit_per_cell < 1) throw std::invalid_argument("random-maze: limit_per_cell must be >= 1");
}

Grid RandomMaze::generate(int size, Rng& rng)
{
    // Carve on the odd lattice of a (size | 1) square, then crop to size.
    const int n = size % 2 == 1 ? size : size + 1;
    Grid g = Grid::Constant(n, n, Cell::wall);
    const int cells = (n - 1) / 2;
    std::vector<char> visited(static_cast<std::size_t>(cells * cells), 0);
    std::vector<std::pair<int, int>> stack{{0, 0}};
    visited[0] = 1;
    g(1, 1) = Cell::empty;
    static constexpr int dr[] = {-1, 1, 0, 0};
    static constexpr int dc[] = {0, 0, -1, 1};
    while (!stack.empty()) {
        const auto [r, c] = stack.back();
        int options[4];
        int count = 0;
        for (int d = 0; d < 4; ++d) {
            const int nr = r + dr[d], nc = c + dc[d];
            if (nr >= 0 && nc >= 0 && nr < cells && nc < cells && !visited[static_cast<std::size_t>(nr * cells + nc)])
                options[count++] = d;
        }
        if (count == 0) {
            stack.pop_back();
            continue;
        }
        const int d = options[rng.below(static_cast<std::uint64_t>(count))];
        const int nr = r + dr[d], nc = c + dc[d];
        visited[static_cast<std::size_t>(nr * cells + nc)] = 1;
        g(2 * r + 1 + dr[d], 2 * c + 1 + dc[d]) = Cell::empty;
        g(2 * nr + 1, 2 * nc + 1) = Cell::empty;
        stack.emplace_back(nr, nc);
    }
    return g.topLeftCorner(size, size);
}

Grid RandomMaze::reset(std::uint64_t seed)
{
    Rng rng(seed);
    const int size = static_cast<int>(rng.range(options_.min_size, options_.max_size));
    grid_ = generate(size, rng);

    std::vector<Position> free;
    goal_ = {-1, -1};
    for (int r = 0; r < size; ++r)
        for (int c = 0; c < size; ++c)
            if (grid_(r, c) == Cell::empty) {
                free.push_back({r, c});
                if (goal_.row < 0 || r + c > goal_.row + goal_.col || (r + c == goal_.row + goal_.col && r > goal_.row))
                    goal_ = {r, c};
            }
    grid_(goal_.row, goal_.col) = Cell::goal;
    do {
        agent_ = free[rng.below(free.size())];
    } while (agent_ == goal_);

    steps_ = 0;
    max_steps_ = options_.limit_per_cell * size * size;
    done_ = false;
    return observe();
}

Grid RandomMaze::observe() const { return crop(grid_, agent_, options_.view, options_.view); }

EnvStep RandomMaze::step(int action)
{
    require_running(done_, name());
    check_action(action, num_actions(), name());
    EnvStep s;
    ++steps_;
    const Position next = moved(agent_, action);
    const int target = cell_at(grid_, next);
    if (target == Cell::wall) {
        s.reward = -1.0;
        s.done = true;
    } else {
        agent_ = next;
        if (target == Cell::goal) {
            s.reward = 1.0;
            s.done = true;
            s.info.success = true;
        } else {
            s.reward = -0.01;
        }
    }
    if (!s.done && steps_ >= max_steps_) {
        s.done = true;
        s.info.timeout = true;
        s.reward = -1.0;
    }
    done_ = s.done;
    s.info.episode_length = steps_;
    s.observation = observe();
    return s;
}

std::string RandomMaze::render() const { return draw(grid_, agent_); }

// KeyCorridor

KeyCorridor::KeyCorridor(Options options) : options_(options)
{
    if (options_.min_length < 5 || options_.max_length < options_.min_length)
        throw std::invalid_argument("key-corridor: need 5 <= min_length <= max_length");
    if (options_.view < 1 || options_.view % 2 == 0) throw std::invalid_argument("key-corridor: view must be odd");
    if (options_.limit_per_cell < 1) throw std::invalid_argument("key-corridor: limit_per_cell must be >= 1");
}

Grid KeyCorridor::reset(std::uint64_t seed)
{
    Rng rng(seed);
    const int w = static_cast<int>(rng.range(options_.min_length, options_.max_length));
    grid_ = Grid::Constant(1, w, Cell::empty);
    grid_(0, 0) = Cell::key;
    grid_(0, w - 2) = Cell::door_locked;
    grid_(0, w - 1) = Cell::object;
    agent_ = {0, static_cast<int>(rng.range(1, w - 3))};
    has_key_ = false;
    steps_ = 0;
    max_steps_ = options_.limit_per_cell * w;
    done_ = false;
    return observe();
}

Grid KeyCorridor::observe() const { return crop(grid_, agent_, options_.view, options_.view); }

EnvStep KeyCorridor::step(int action)
{
    require_running(done_, name());
    check_action(action, num_actions(), name());
    EnvStep s;
    ++steps_;
    auto adjacent = [&](int code) -> Position {
        for (int a : {Action::left, Action::right, Action::up, Action::down}) {
            const Position p = moved(agent_, a);
            if (cell_at(grid_, p) == code) return p;
        }
        return {-1, -1};
    };
    if (action <= Action::right) {
        const Position next = moved(agent_, action);
        const int target = cell_at(grid_, next);
        if (target == Cell::empty || target == Cell::door_open) agent_ = next;
    } else if (action == Action::pickup) {
        if (const Position k = adjacent(Cell::key); k.row >= 0) {
            grid_(k.row, k.col) = Cell::empty;
            has_key_ = true;
        } else if (adjacent(Cell::object).row >= 0) {
            s.reward = 1.0 - 0.9 * static_cast<double>(steps_) / static_cast<double>(max_steps_);
            s.done = true;
            s.info.success = true;
        }
    } else if (const Position d = adjacent(Cell::door_locked); d.row >= 0 && has_key_) {
        grid_(d.row, d.col) = Cell::door_open;
    }
    if (!s.done && steps_ >= max_steps_) {
        s.done = true;
        s.info.timeout = true;
    }
    done_ = s.done;
    s.info.episode_length = steps_;
    s.observation = observe();
    return s;
}

std::string KeyCorridor::render() const { return draw(grid_, agent_); }

// TMaze

TMaze::TMaze(Options options) : options_(options)
{
    if (options_.length < 0) throw std::invalid_argument("tmaze: corridor length must be >= 0");
    if (options_.max_steps < 0) throw std::invalid_argument("tmaze: max_steps must be >= 0");
    max_steps_ = options_.max_steps > 0 ? options_.max_steps : 4 * (options_.length + 2);
    grid_ = Grid::Constant(3, options_.length + 1, Cell::wall);
    grid_.row(1).setConstant(Cell::empty);
    grid_(0, options_.length) = Cell::empty;
    grid_(2, options_.length) = Cell::empty;
}

Grid TMaze::reset(std::uint64_t seed)
{
    Rng rng(seed);
    return reset_with_cue(rng.below(2) == 0);
}

Grid TMaze::reset_with_cue(bool cue_left)
{
    cue_left_ = cue_left;
    agent_ = {1, 0};
    steps_ = 0;
    done_ = false;
    return observe();
}

Grid TMaze::observe() const
{
    Grid obs = crop(grid_, agent_, 3, 3);
    if (steps_ == 0) {
        if (cue_left_)
            obs.row(0).setConstant(Cell::cue_left);
        else
            obs.row(2).setConstant(Cell::cue_right);
    }
    return obs;
}

EnvStep TMaze::step(int action)
{
    require_running(done_, name());
    check_action(action, num_actions(), name());
    EnvStep s;
    const bool cue_step = steps_ == 0;
    ++steps_;
    const Position next = moved(agent_, action);
    // On the cue step only an arm turn moves the agent, so a memoryless
    // policy cannot record the cue in its position.
    if (cell_at(grid_, next) == Cell::empty && !(cue_step && next.row == 1)) {
        agent_ = next;
        if (agent_.row != 1) {
            const bool went_up = agent_.row == 0;
            s.done = true;
            s.info.success = went_up == cue_left_;
            s.reward = s.info.success ? 1.0 : -1.0;
        }
    }
    if (!s.done && steps_ >= max_steps_) {
        s.done = true;
        s.info.timeout = true;
        s.reward = -1.0;
    }
    done_ = s.done;
    s.info.episode_length = steps_;
    s.observation = observe();
    return s;
}

std::string TMaze::render() const
{
    // The cue sits under the agent, so it is spelled out while visible.
    std::string out = draw(grid_, agent_);
    if (steps_ == 0) out += cue_left_ ? "cue: left\n" : "cue: right\n";
    return out;
}

// UnitEnv

Grid UnitEnv::reset(std::uint64_t)
{
    done_ = false;
    return Grid::Zero(1, 1);
}

EnvStep UnitEnv::step(int action)
{
    require_running(done_, name());
    check_action(action, num_actions(), name());
    done_ = true;
    EnvStep s;
    s.observation = Grid::Zero(1, 1);
    s.reward = 1.0;
    s.done = true;
    s.info.episode_length = 1;
    s.info.success = true;
    return s;
}

std::unique_ptr<Env> make_env(const EnvSpec& spec)
{
    if (spec.kind == "tmaze") return std::make_unique<TMaze>(TMaze::Options{spec.tmaze_length, spec.tmaze_max_steps});
    if (spec.kind == "random-maze") {
        RandomMaze::Options o;
        o.min_size = spec.maze_min_size;
        o.max_size = spec.maze_max_size;
        return std::make_unique<RandomMaze>(o);
    }
    if (spec.kind == "key-corridor") {
        KeyCorridor::Options o;
        o.min_length = spec.corridor_min_length;
        o.max_length = spec.corridor_max_length;
        return std::make_unique<KeyCorridor>(o);
    }
    if (spec.kind == "unit") return std::make_unique<UnitEnv>();
    throw std::invalid_argument("unknown environment kind: " + spec.kind);
}

}  // namespace helm::envs
