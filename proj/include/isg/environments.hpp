#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "isg/mdp.hpp"

namespace isg {

/// Seed derivation for independent sub-streams.
std::uint64_t splitmix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

/// Seeded generator whose output does not depend on the standard library's
/// distribution implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform integer in [0, n); n > 0.
  std::uint64_t below(std::uint64_t n);
  /// Uniform real in [0, 1) with 53 random bits.
  double uniform();
  bool bernoulli(double p) { return uniform() < p; }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) std::swap(v[i - 1], v[below(i)]);
  }

 private:
  std::mt19937_64 engine_;
};

enum class Domain { kMaze, kFourRooms, kPuddle, kRocks };

std::string to_string(Domain d);
/// Accepts maze, four_rooms (also four-rooms, fourrooms), puddle, rocks.
Domain parse_domain(const std::string& name);

struct Cell {
  std::size_t row = 0;
  std::size_t col = 0;
  bool operator==(const Cell&) const = default;
};

/// Layout knobs; unset counts follow the grid area.
struct DomainParams {
  std::optional<std::size_t> puddle_count;    // default cells / 8
  double puddle_penalty = -0.05;
  std::optional<std::size_t> rock_count;      // per kind; default cells / 16
  double valuable_reward = 0.02;
  double dangerous_penalty = -0.05;
  std::vector<Cell> doors;                    // four-rooms override, one per wall segment
};

struct GridSpec {
  Domain domain = Domain::kMaze;
  std::size_t width = 4;
  std::size_t height = 4;
  double obstacle_density = 0.1;
  std::uint64_t seed = 0;                   // obstacle placement
  std::optional<std::uint64_t> layout_seed; // walls, doors, puddles, rocks; defaults to seed
  double slip_probability = 0.0;
  double gamma = 0.95;
  std::optional<Cell> start;                // default top-left
  std::optional<Cell> goal;                 // default bottom-right
  DomainParams params;
};

enum class CellKind : std::uint8_t { kFree, kObstacle, kWall, kPuddle, kValuableRock, kDangerousRock };

/// Generated grid with its model. State of cell (r, c) is r * width + c.
/// Actions are N, E, S, W; blocked moves stay in place.
struct GridWorld {
  GridSpec spec;
  std::vector<CellKind> cells;
  Cell start;
  Cell goal;
  std::size_t attempts = 1;  // obstacle draws until the goal was reachable
  GoalMdp model;

  std::size_t width() const { return spec.width; }
  std::size_t height() const { return spec.height; }
  StateId state(Cell c) const { return c.row * spec.width + c.col; }
  Cell cell(StateId s) const { return {s / spec.width, s % spec.width}; }
  bool blocked(Cell c) const;

  /// One row of glyphs per grid row: . # S G ~ * x
  std::string to_text() const;
};

inline constexpr std::size_t kMaxGenerationAttempts = 1000;

/// Generates the spec's domain. Throws std::runtime_error when no obstacle
/// draw within kMaxGenerationAttempts leaves the goal reachable.
GridWorld make_grid_world(const GridSpec& spec);

GoalMdp make_maze(GridSpec spec);
GoalMdp make_four_rooms(GridSpec spec);
GoalMdp make_puddle_world(GridSpec spec);
GoalMdp make_rock_world(GridSpec spec);

/// Grid model from explicit cell kinds (used by map parsing and the generators).
GoalMdp build_grid_model(std::size_t width, std::size_t height, const std::vector<CellKind>& cells, Cell start,
                         Cell goal, const GridSpec& spec);

/// Parses map text; every row must have the same width and exactly one S and
/// one G must appear.
GridWorld parse_map_text(const std::string& text, double slip_probability = 0.0, const DomainParams& params = {});

struct EnsembleSpec {
  GridSpec base;
  std::size_t human_count = 20;
  std::size_t truth_model_index = 0;
  double subgoal_inclusion_prob = 0.5;
};

/// Robot and human worlds share the layout and differ in obstacle seeds.
struct Ensemble {
  GridWorld robot;
  std::vector<GridWorld> humans;
  std::vector<std::uint64_t> human_seeds;
  std::vector<StateId> truth;  // ground-truth implicit subgoals, sorted

  std::vector<GoalMdp> human_models() const;
};

Ensemble make_ensemble(const EnsembleSpec& spec);

/// Fingerprint over every model of the ensemble and the truth set.
std::uint64_t ensemble_fingerprint(const Ensemble& e);

}  // namespace isg
