#include "isg/environments.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <deque>
#include <sstream>
#include <stdexcept>

#include "isg/bottleneck.hpp"
#include "isg/model_io.hpp"

namespace isg {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return splitmix64(splitmix64(seed) ^ splitmix64(stream + 0x632be59bd9b4e019ULL));
}

std::uint64_t Rng::below(std::uint64_t n) {
  if (n == 0) throw std::invalid_argument("Rng::below needs a positive bound");
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  for (;;) {
    const std::uint64_t x = next();
    if (x < limit) return x % n;
  }
}

double Rng::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

std::string to_string(Domain d) {
  switch (d) {
    case Domain::kMaze: return "maze";
    case Domain::kFourRooms: return "four_rooms";
    case Domain::kPuddle: return "puddle";
    case Domain::kRocks: return "rocks";
  }
  return "unknown";
}

Domain parse_domain(const std::string& name) {
  std::string n;
  for (char c : name) n += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (n == "maze") return Domain::kMaze;
  if (n == "four_rooms" || n == "four-rooms" || n == "fourrooms") return Domain::kFourRooms;
  if (n == "puddle" || n == "puddleworld") return Domain::kPuddle;
  if (n == "rocks" || n == "rock" || n == "rockworld") return Domain::kRocks;
  throw std::invalid_argument("unknown domain '" + name + "'");
}

bool GridWorld::blocked(Cell c) const {
  const CellKind k = cells[state(c)];
  return k == CellKind::kObstacle || k == CellKind::kWall;
}

namespace {

constexpr int kRowStep[4] = {-1, 0, 1, 0};  // N, E, S, W
constexpr int kColStep[4] = {0, 1, 0, -1};

bool is_blocked(CellKind k) { return k == CellKind::kObstacle || k == CellKind::kWall; }

struct Grid {
  std::size_t width;
  std::size_t height;
  const std::vector<CellKind>& cells;

  // Destination of moving from s in direction d; stays put at edges and blocked cells.
  StateId move(StateId s, int d) const {
    const long r = static_cast<long>(s / width) + kRowStep[d];
    const long c = static_cast<long>(s % width) + kColStep[d];
    if (r < 0 || c < 0 || r >= static_cast<long>(height) || c >= static_cast<long>(width)) return s;
    const StateId t = static_cast<StateId>(r) * width + static_cast<StateId>(c);
    return is_blocked(cells[t]) ? s : t;
  }

  bool connected(StateId from, StateId to) const {
    std::vector<std::uint8_t> seen(cells.size(), 0);
    std::deque<StateId> frontier{from};
    seen[from] = 1;
    while (!frontier.empty()) {
      const StateId s = frontier.front();
      frontier.pop_front();
      if (s == to) return true;
      for (int d = 0; d < 4; ++d) {
        const StateId t = move(s, d);
        if (!seen[t]) {
          seen[t] = 1;
          frontier.push_back(t);
        }
      }
    }
    return false;
  }
};

void check_cell(const GridSpec& spec, Cell c, const char* what) {
  if (c.row >= spec.height || c.col >= spec.width) throw std::invalid_argument(std::string(what) + " outside the grid");
}

// Walls and doors of the four-rooms layout.
void place_rooms(const GridSpec& spec, std::vector<CellKind>& cells, Rng& rng) {
  const std::size_t w = spec.width;
  const std::size_t h = spec.height;
  if (w < 4 || h < 4) throw std::invalid_argument("four-rooms needs a grid of at least 4x4");
  const std::size_t wall_col = w / 2;
  const std::size_t wall_row = h / 2;
  for (std::size_t r = 0; r < h; ++r) cells[r * w + wall_col] = CellKind::kWall;
  for (std::size_t c = 0; c < w; ++c) cells[wall_row * w + c] = CellKind::kWall;

  std::vector<Cell> doors = spec.params.doors;
  if (doors.empty()) {
    doors.push_back({rng.below(wall_row), wall_col});
    doors.push_back({wall_row + 1 + rng.below(h - wall_row - 1), wall_col});
    doors.push_back({wall_row, rng.below(wall_col)});
    doors.push_back({wall_row, wall_col + 1 + rng.below(w - wall_col - 1)});
  }
  for (const Cell& d : doors) {
    check_cell(spec, d, "door");
    if (cells[d.row * w + d.col] != CellKind::kWall) throw std::invalid_argument("door is not on an internal wall");
    cells[d.row * w + d.col] = CellKind::kFree;
  }
}

void place_features(const GridSpec& spec, std::vector<CellKind>& cells, StateId start, StateId goal, Rng& rng) {
  const std::size_t area = spec.width * spec.height;
  std::vector<StateId> open;
  for (StateId s = 0; s < area; ++s) {
    if (s != start && s != goal && cells[s] == CellKind::kFree) open.push_back(s);
  }
  rng.shuffle(open);
  std::size_t next = 0;
  const auto take = [&](std::size_t count, CellKind kind) {
    for (std::size_t i = 0; i < count && next < open.size(); ++i) cells[open[next++]] = kind;
  };
  if (spec.domain == Domain::kPuddle) {
    take(spec.params.puddle_count.value_or(static_cast<std::size_t>(std::lround(area / 8.0))), CellKind::kPuddle);
  } else if (spec.domain == Domain::kRocks) {
    const std::size_t n = spec.params.rock_count.value_or(static_cast<std::size_t>(std::lround(area / 16.0)));
    take(n, CellKind::kValuableRock);
    take(n, CellKind::kDangerousRock);
  }
}

}  // namespace

GoalMdp build_grid_model(std::size_t width, std::size_t height, const std::vector<CellKind>& cells, Cell start,
                         Cell goal, const GridSpec& spec) {
  if (cells.size() != width * height) throw std::invalid_argument("cell count does not match the grid size");
  if (!(spec.slip_probability >= 0.0 && spec.slip_probability < 0.5)) {
    throw std::invalid_argument("slip probability must lie in [0, 0.5)");
  }
  const StateId s0 = start.row * width + start.col;
  const StateId g = goal.row * width + goal.col;
  if (is_blocked(cells[s0]) || is_blocked(cells[g])) throw std::invalid_argument("start or goal cell is blocked");
  if (s0 == g) throw std::invalid_argument("start and goal coincide");

  const Grid grid{width, height, cells};
  GoalMdpBuilder builder(width * height, 4);
  const double slip = spec.slip_probability;
  for (StateId s = 0; s < width * height; ++s) {
    if (s == g) continue;
    for (int d = 0; d < 4; ++d) {
      if (is_blocked(cells[s])) {
        builder.add_transition(s, static_cast<ActionId>(d), s, 1.0);
        continue;
      }
      builder.add_transition(s, static_cast<ActionId>(d), grid.move(s, d), 1.0 - 2.0 * slip);
      if (slip > 0.0) {
        builder.add_transition(s, static_cast<ActionId>(d), grid.move(s, (d + 1) % 4), slip);
        builder.add_transition(s, static_cast<ActionId>(d), grid.move(s, (d + 3) % 4), slip);
      }
    }
  }
  builder.add_goal(g).set_initial_state(s0).set_gamma(spec.gamma);
  std::vector<std::string> labels;
  for (StateId s = 0; s < width * height; ++s) {
    labels.push_back("(" + std::to_string(s / width) + "," + std::to_string(s % width) + ")");
    switch (cells[s]) {
      case CellKind::kPuddle: builder.set_overlay(s, spec.params.puddle_penalty); break;
      case CellKind::kValuableRock: builder.set_overlay(s, spec.params.valuable_reward); break;
      case CellKind::kDangerousRock: builder.set_overlay(s, spec.params.dangerous_penalty); break;
      default: break;
    }
  }
  builder.set_labels(std::move(labels));
  return builder.build();
}

GridWorld make_grid_world(const GridSpec& spec) {
  if (spec.width == 0 || spec.height == 0) throw std::invalid_argument("grid must be nonempty");
  if (!(spec.obstacle_density >= 0.0 && spec.obstacle_density < 1.0)) {
    throw std::invalid_argument("obstacle density must lie in [0, 1)");
  }
  GridWorld world;
  world.spec = spec;
  world.start = spec.start.value_or(Cell{0, 0});
  world.goal = spec.goal.value_or(Cell{spec.height - 1, spec.width - 1});
  check_cell(spec, world.start, "start");
  check_cell(spec, world.goal, "goal");
  const std::size_t area = spec.width * spec.height;
  const StateId s0 = world.state(world.start);
  const StateId g = world.state(world.goal);
  if (s0 == g) throw std::invalid_argument("start and goal coincide");

  std::vector<CellKind> layout(area, CellKind::kFree);
  Rng layout_rng(derive_seed(spec.layout_seed.value_or(spec.seed), 1));
  if (spec.domain == Domain::kFourRooms) place_rooms(spec, layout, layout_rng);
  if (layout[s0] == CellKind::kWall || layout[g] == CellKind::kWall) {
    throw std::invalid_argument("start or goal lies on a wall");
  }
  place_features(spec, layout, s0, g, layout_rng);

  std::vector<StateId> eligible;
  for (StateId s = 0; s < area; ++s) {
    if (s != s0 && s != g && layout[s] != CellKind::kWall) eligible.push_back(s);
  }
  const std::size_t count =
      std::min(eligible.size(), static_cast<std::size_t>(std::lround(spec.obstacle_density * static_cast<double>(area))));

  for (std::size_t attempt = 0; attempt < kMaxGenerationAttempts; ++attempt) {
    std::vector<CellKind> cells = layout;
    std::vector<StateId> pool = eligible;
    Rng rng(derive_seed(spec.seed, attempt + 2));
    rng.shuffle(pool);
    for (std::size_t i = 0; i < count; ++i) cells[pool[i]] = CellKind::kObstacle;
    if (!Grid{spec.width, spec.height, cells}.connected(s0, g)) continue;
    world.cells = std::move(cells);
    world.attempts = attempt + 1;
    world.model = build_grid_model(spec.width, spec.height, world.cells, world.start, world.goal, spec);
    return world;
  }
  throw std::runtime_error("no obstacle placement with a reachable goal after " +
                           std::to_string(kMaxGenerationAttempts) + " attempts");
}

GoalMdp make_maze(GridSpec spec) {
  spec.domain = Domain::kMaze;
  return make_grid_world(spec).model;
}

GoalMdp make_four_rooms(GridSpec spec) {
  spec.domain = Domain::kFourRooms;
  return make_grid_world(spec).model;
}

GoalMdp make_puddle_world(GridSpec spec) {
  spec.domain = Domain::kPuddle;
  return make_grid_world(spec).model;
}

GoalMdp make_rock_world(GridSpec spec) {
  spec.domain = Domain::kRocks;
  return make_grid_world(spec).model;
}

std::string GridWorld::to_text() const {
  std::string out;
  for (std::size_t r = 0; r < height(); ++r) {
    for (std::size_t c = 0; c < width(); ++c) {
      const Cell here{r, c};
      char glyph = '.';
      if (here == start) {
        glyph = 'S';
      } else if (here == goal) {
        glyph = 'G';
      } else {
        switch (cells[state(here)]) {
          case CellKind::kObstacle:
          case CellKind::kWall: glyph = '#'; break;
          case CellKind::kPuddle: glyph = '~'; break;
          case CellKind::kValuableRock: glyph = '*'; break;
          case CellKind::kDangerousRock: glyph = 'x'; break;
          case CellKind::kFree: break;
        }
      }
      out += glyph;
    }
    out += '\n';
  }
  return out;
}

GridWorld parse_map_text(const std::string& text, double slip_probability, const DomainParams& params) {
  std::vector<std::string> rows;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    if (!line.empty()) rows.push_back(line);
  }
  if (rows.empty()) throw std::invalid_argument("map is empty");
  GridWorld world;
  world.spec.width = rows.front().size();
  world.spec.height = rows.size();
  world.spec.obstacle_density = 0.0;
  world.spec.slip_probability = slip_probability;
  world.spec.params = params;
  bool has_start = false;
  bool has_goal = false;
  bool has_puddle = false;
  bool has_rock = false;
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r].size() != world.spec.width) throw std::invalid_argument("map row " + std::to_string(r) + " has a different width");
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      CellKind kind = CellKind::kFree;
      switch (rows[r][c]) {
        case '.': break;
        case '#': kind = CellKind::kObstacle; break;
        case '~': kind = CellKind::kPuddle; has_puddle = true; break;
        case '*': kind = CellKind::kValuableRock; has_rock = true; break;
        case 'x': kind = CellKind::kDangerousRock; has_rock = true; break;
        case 'S':
          if (has_start) throw std::invalid_argument("map has more than one start");
          has_start = true;
          world.start = {r, c};
          break;
        case 'G':
          if (has_goal) throw std::invalid_argument("map has more than one goal");
          has_goal = true;
          world.goal = {r, c};
          break;
        default:
          throw std::invalid_argument(std::string("unknown map glyph '") + rows[r][c] + "' at row " + std::to_string(r));
      }
      world.cells.push_back(kind);
    }
  }
  if (!has_start || !has_goal) throw std::invalid_argument("map needs one S and one G");
  world.spec.domain = has_rock ? Domain::kRocks : has_puddle ? Domain::kPuddle : Domain::kMaze;
  world.spec.start = world.start;
  world.spec.goal = world.goal;
  world.model = build_grid_model(world.spec.width, world.spec.height, world.cells, world.start, world.goal, world.spec);
  return world;
}

std::vector<GoalMdp> Ensemble::human_models() const {
  std::vector<GoalMdp> out;
  out.reserve(humans.size());
  for (const GridWorld& h : humans) out.push_back(h.model);
  return out;
}

Ensemble make_ensemble(const EnsembleSpec& spec) {
  if (spec.human_count == 0) throw std::invalid_argument("ensemble needs at least one human model");
  if (spec.truth_model_index >= spec.human_count) throw std::invalid_argument("truth model index out of range");
  if (!(spec.subgoal_inclusion_prob >= 0.0 && spec.subgoal_inclusion_prob <= 1.0)) {
    throw std::invalid_argument("inclusion probability must lie in [0, 1]");
  }
  const std::uint64_t master = spec.base.seed;
  GridSpec base = spec.base;
  base.layout_seed = spec.base.layout_seed.value_or(master);

  Ensemble e;
  GridSpec robot = base;
  robot.seed = derive_seed(master, 0);
  e.robot = make_grid_world(robot);
  for (std::size_t i = 0; i < spec.human_count; ++i) {
    std::uint64_t seed = derive_seed(master, i + 1);
    while (seed == robot.seed || std::find(e.human_seeds.begin(), e.human_seeds.end(), seed) != e.human_seeds.end()) {
      seed = splitmix64(seed);
    }
    e.human_seeds.push_back(seed);
    GridSpec human = base;
    human.seed = seed;
    e.humans.push_back(make_grid_world(human));
  }

  const GoalMdp& truth_model = e.humans[spec.truth_model_index].model;
  const auto candidates = strip_trivial(truth_model, find_bottlenecks(truth_model).bottlenecks);
  Rng rng(derive_seed(master, 0x7472757468ULL));
  for (StateId s : candidates) {
    if (rng.bernoulli(spec.subgoal_inclusion_prob)) e.truth.push_back(s);
  }
  return e;
}

std::uint64_t ensemble_fingerprint(const Ensemble& e) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (8 * i)) & 0xff;
      h *= 0x100000001b3ULL;
    }
  };
  mix(model_fingerprint(e.robot.model));
  for (const GridWorld& w : e.humans) mix(model_fingerprint(w.model));
  mix(e.truth.size());
  for (StateId s : e.truth) mix(s);
  return h;
}

}  // namespace isg
