#pragma once

// Seeded gridworld POMDPs with symbolic observations.
//
// Cells use integer codes; agents see an egocentric crop in which
// out-of-bounds cells read as wall. Flattening for the FrozenHopfield input
// divides codes by 8 so every entry lies in [0, 1].

#include <Eigen/Dense>

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>

#include "helm/rng.hpp"

namespace helm::envs {

enum Cell : int {
    empty = 0,
    wall = 1,
    goal = 2,
    key = 3,
    door_locked = 4,
    door_open = 5,
    cue_left = 6,
    cue_right = 7,
    object = 8,
};

inline constexpr int max_cell_code = 8;

using Grid = Eigen::MatrixXi;

enum Action : int { up = 0, down = 1, left = 2, right = 3, pickup = 4, toggle = 5 };

struct StepInfo {
    int episode_length = 0;
    bool success = false;
    bool timeout = false;
};

struct EnvStep {
    Grid observation;
    double reward = 0.0;
    bool done = false;
    StepInfo info;
};

struct Position {
    int row = 0;
    int col = 0;
    bool operator==(const Position&) const = default;
};

Position moved(Position p, int action);

/// rows x cols window centred on `center` (odd extents); cells outside the
/// grid read as wall.
Grid crop(const Grid& grid, Position center, int rows, int cols);

/// Row-major codes / 8.
Eigen::VectorXd flatten(const Grid& observation);

class Env {
public:
    virtual ~Env() = default;

    virtual std::string_view name() const = 0;
    virtual int num_actions() const = 0;
    virtual int obs_rows() const = 0;
    virtual int obs_cols() const = 0;
    int obs_size() const { return obs_rows() * obs_cols(); }

    /// Starts a new episode; everything random about it derives from seed.
    virtual Grid reset(std::uint64_t seed) = 0;
    /// Throws std::logic_error after a terminal step or before reset().
    virtual EnvStep step(int action) = 0;
    virtual bool done() const = 0;

    /// Full grid with the agent drawn as '@'.
    virtual std::string render() const = 0;
    virtual std::unique_ptr<Env> clone() const = 0;
};

/// Agent spawned at a uniformly random free cell of a random maze of side
/// 5..25 whose goal is the lower-right-most free cell. A bump ends the
/// episode with -1, the goal with +1, every other step costs 0.01.
class RandomMaze final : public Env {
public:
    struct Options {
        int min_size = 5;
        int max_size = 25;
        int view = 9;
        /// Episode limit as a multiple of the grid area.
        int limit_per_cell = 4;
    };

    RandomMaze() : RandomMaze(Options{}) {}
    explicit RandomMaze(Options options);

    std::string_view name() const override { return "random-maze"; }
    int num_actions() const override { return 4; }
    int obs_rows() const override { return options_.view; }
    int obs_cols() const override { return options_.view; }
    Grid reset(std::uint64_t seed) override;
    EnvStep step(int action) override;
    bool done() const override { return done_; }
    std::string render() const override;
    std::unique_ptr<Env> clone() const override { return std::make_unique<RandomMaze>(*this); }

    const Grid& grid() const { return grid_; }
    Position agent() const { return agent_; }
    Position goal() const { return goal_; }
    int max_steps() const { return max_steps_; }
    Grid observe() const;

    /// Recursive-backtracker maze of the given size; connected by construction.
    static Grid generate(int size, Rng& rng);

private:
    Options options_;
    Grid grid_;
    Position agent_, goal_;
    int steps_ = 0;
    int max_steps_ = 0;
    bool done_ = true;
};

/// One-high corridor: key at the far left, a locked door near the right and
/// the object behind it. pickup takes an adjacent key or object, toggle
/// opens an adjacent locked door when the key is held. Picking up the object
/// pays 1 - 0.9 steps / max_steps; timing out pays 0.
class KeyCorridor final : public Env {
public:
    struct Options {
        int min_length = 7;
        int max_length = 9;
        int view = 7;
        int limit_per_cell = 30;
    };

    KeyCorridor() : KeyCorridor(Options{}) {}
    explicit KeyCorridor(Options options);

    std::string_view name() const override { return "key-corridor"; }
    int num_actions() const override { return 6; }
    int obs_rows() const override { return options_.view; }
    int obs_cols() const override { return options_.view; }
    Grid reset(std::uint64_t seed) override;
    EnvStep step(int action) override;
    bool done() const override { return done_; }
    std::string render() const override;
    std::unique_ptr<Env> clone() const override { return std::make_unique<KeyCorridor>(*this); }

    const Grid& grid() const { return grid_; }
    Position agent() const { return agent_; }
    bool has_key() const { return has_key_; }
    int max_steps() const { return max_steps_; }
    Grid observe() const;

private:
    Options options_;
    Grid grid_;
    Position agent_;
    bool has_key_ = false;
    int steps_ = 0;
    int max_steps_ = 0;
    bool done_ = true;
};

/// Corridor of length C ending in a junction with arms up and down. In the
/// first observation the row on the cued side is painted with the cue code
/// (top row for left, bottom row for right); afterwards the cue is gone.
/// The first step is a cue step: the corridor does not let the agent move
/// yet, so its position after step 0 is the same under both cues unless it
/// turns straight into an arm (only possible when C = 0). Entering the arm
/// matching the cue (up for left, down for right) pays +1, the other arm -1,
/// and so does a timeout, so every episode ends with -1 or +1.
class TMaze final : public Env {
public:
    struct Options {
        int length = 8;
        /// Episode limit; 0 selects 4 (C + 2). A uniform random walk needs a
        /// limit near 10 (C + 2)^2 to reach an arm almost surely.
        int max_steps = 0;
    };

    TMaze() : TMaze(Options{}) {}
    explicit TMaze(Options options);

    std::string_view name() const override { return "tmaze"; }
    int num_actions() const override { return 4; }
    int obs_rows() const override { return 3; }
    int obs_cols() const override { return 3; }
    Grid reset(std::uint64_t seed) override;
    EnvStep step(int action) override;
    bool done() const override { return done_; }
    std::string render() const override;
    std::unique_ptr<Env> clone() const override { return std::make_unique<TMaze>(*this); }

    /// Reset with a fixed cue instead of a seeded one.
    Grid reset_with_cue(bool cue_left);
    bool cue_left() const { return cue_left_; }
    Position agent() const { return agent_; }
    int length() const { return options_.length; }
    int max_steps() const { return max_steps_; }
    Grid observe() const;

private:
    Options options_;
    Grid grid_;
    Position agent_;
    bool cue_left_ = true;
    int steps_ = 0;
    int max_steps_ = 0;
    bool done_ = true;
};

/// Single cell; every action pays 1 and ends the episode.
class UnitEnv final : public Env {
public:
    std::string_view name() const override { return "unit"; }
    int num_actions() const override { return 2; }
    int obs_rows() const override { return 1; }
    int obs_cols() const override { return 1; }
    Grid reset(std::uint64_t) override;
    EnvStep step(int action) override;
    bool done() const override { return done_; }
    std::string render() const override { return "@\n"; }
    std::unique_ptr<Env> clone() const override { return std::make_unique<UnitEnv>(*this); }

private:
    bool done_ = true;
};

struct EnvSpec {
    std::string kind = "tmaze";  // tmaze | random-maze | key-corridor | unit
    int tmaze_length = 8;
    int tmaze_max_steps = 0;
    int maze_min_size = 5;
    int maze_max_size = 25;
    int corridor_min_length = 7;
    int corridor_max_length = 9;
};

/// Throws std::invalid_argument for an unknown kind or invalid parameters.
std::unique_ptr<Env> make_env(const EnvSpec& spec);

}  // namespace helm::envs
