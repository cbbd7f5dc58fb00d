#include "isg/cli.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "isg/achievable_subsets.hpp"
#include "isg/bottleneck.hpp"
#include "isg/environments.hpp"
#include "isg/experiment.hpp"
#include "isg/model_io.hpp"
#include "isg/query_strategy.hpp"

namespace isg {

namespace {

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::invalid_argument("cannot read '" + path + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// A model file is either a JSON model document or a map in grid glyphs.
GoalMdp load_any_model(const std::string& path, double slip) {
  const std::string text = read_file(path);
  const auto first = text.find_first_not_of(" \t\r\n");
  if (first != std::string::npos && text[first] == '{') {
    try {
      return model_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
      throw std::invalid_argument("malformed model '" + path + "': " + e.what());
    }
  }
  return parse_map_text(text, slip).model;
}

std::string state_text(const GoalMdp& m, StateId s) { return m.labels().empty() ? std::to_string(s) : m.label(s); }

// Accepts state indices ("7") and grid cells ("2,3" or "(2,3)").
StateId parse_state(const std::string& text, const GoalMdp& model, std::size_t grid_width) {
  std::string t;
  for (char c : text) {
    if (c != '(' && c != ')' && c != ' ') t += c;
  }
  StateId s = 0;
  const auto comma = t.find(',');
  try {
    if (comma == std::string::npos) {
      s = std::stoul(t);
    } else {
      if (grid_width == 0) throw std::invalid_argument("cell coordinates need a grid model");
      s = std::stoul(t.substr(0, comma)) * grid_width + std::stoul(t.substr(comma + 1));
    }
  } catch (const std::logic_error&) {
    throw std::invalid_argument("cannot parse state '" + text + "'");
  }
  if (s >= model.num_states()) throw std::invalid_argument("state '" + text + "' out of range");
  return s;
}

int run_solve(const std::string& path, double slip, double tolerance, const std::string& format, std::ostream& out) {
  const GoalMdp model = load_any_model(path, slip);
  SolverOptions opts;
  opts.tolerance = tolerance;
  const Policy policy = value_iteration(model, opts);
  if (format == "json") {
    nlohmann::json doc;
    doc["iterations"] = policy.iterations;
    doc["residual"] = policy.residual;
    doc["start_value"] = policy.values[model.initial_state()];
    doc["goal_probability"] = goal_reach_probability(model, policy, model.initial_state());
    doc["actions"] = nlohmann::json::array();
    for (ActionId a : policy.action_for) doc["actions"].push_back(a == kNoAction ? -1 : static_cast<long long>(a));
    doc["values"] = policy.values;
    out << doc.dump(2) << '\n';
    return 0;
  }
  out << "iterations " << policy.iterations << " residual " << policy.residual << '\n';
  out << "start value " << std::setprecision(10) << policy.values[model.initial_state()] << " goal probability "
      << goal_reach_probability(model, policy, model.initial_state()) << '\n';
  for (StateId s : reachable_states(model, &policy)) {
    out << state_text(model, s) << " action ";
    if (policy.defined(s)) {
      out << policy(s);
    } else {
      out << '-';
    }
    out << " value " << policy.values[s] << '\n';
  }
  return 0;
}

int run_bottlenecks(const std::string& path, double slip, const std::string& method, bool trivial, std::ostream& out) {
  const GoalMdp model = load_any_model(path, slip);
  const auto m = method == "avoid" ? BottleneckMethod::kAvoidTest : BottleneckMethod::kGraphRemoval;
  const BottleneckReport report = find_bottlenecks(model, m);
  if (!report.feasible) {
    out << "no goal reachable from the initial state\n";
    return 0;
  }
  const auto states = trivial ? report.bottlenecks : strip_trivial(model, report.bottlenecks);
  out << states.size() << " bottleneck" << (states.size() == 1 ? "" : "s") << '\n';
  for (StateId s : states) out << s << ' ' << state_text(model, s) << '\n';
  return 0;
}

struct ExperimentFlags {
  std::string config;
  std::vector<std::string> domains;
  std::vector<std::string> grids;
  std::vector<double> densities;
  std::vector<std::size_t> humans;
  std::optional<std::size_t> trials;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> budget;
  std::optional<std::size_t> threads;
  std::string strategy;
  std::string out_path;
  std::string format = "csv";
};

int run_experiment_cmd(const ExperimentFlags& f, std::ostream& out, std::ostream& err) {
  ExperimentConfig config = f.config.empty() ? ExperimentConfig{} : load_config(f.config);
  if (!f.domains.empty()) {
    config.domains.clear();
    for (const auto& d : f.domains) config.domains.push_back(parse_domain(d));
  }
  if (!f.grids.empty()) {
    config.grid_sizes.clear();
    for (const auto& g : f.grids) config.grid_sizes.push_back(parse_grid_size(g));
  }
  if (!f.densities.empty()) config.obstacle_densities = f.densities;
  if (!f.humans.empty()) config.human_model_counts = f.humans;
  if (f.trials) config.trials_per_config = *f.trials;
  if (f.seed) config.master_seed = *f.seed;
  if (f.budget) config.query_budget = *f.budget;
  if (f.threads) config.threads = *f.threads;
  if (!f.strategy.empty()) config.strategies = parse_strategies(f.strategy);
  config.validate();

  const ExperimentOutput result = run_experiment(config);
  std::ofstream file;
  if (!f.out_path.empty()) {
    file.open(f.out_path);
    if (!file) throw std::invalid_argument("cannot write '" + f.out_path + "'");
  }
  std::ostream& sink = f.out_path.empty() ? out : file;
  if (f.format == "json") {
    sink << results_to_json(result).dump(2) << '\n';
  } else {
    write_csv(sink, result.results);
  }
  write_summary(err, result.summary);
  write_comparison(err, result.summary);
  for (const TrialResult& r : result.results) {
    if (!r.error.empty()) err << "trial " << r.key.trial << " failed: " << r.error << '\n';
  }
  return 0;
}

struct SessionFlags {
  std::string robot;
  std::vector<std::string> human_files;
  std::string domain = "maze";
  std::string grid = "4x4";
  double density = 0.1;
  std::size_t humans = 20;
  std::uint64_t seed = 0;
  double slip = 0.0;
  bool simulate = false;
  std::vector<std::string> truth;
  bool truth_given = false;
  std::string strategy = "strategic";
  std::size_t budget = 1000;
};

int run_query_session(const SessionFlags& f, std::ostream& out, std::istream& in) {
  GoalMdp robot;
  std::vector<GoalMdp> humans;
  std::vector<StateId> truth;
  std::size_t grid_width = 0;
  if (!f.robot.empty()) {
    if (f.human_files.empty()) throw std::invalid_argument("--robot needs at least one --human model");
    robot = load_any_model(f.robot, f.slip);
    for (const auto& h : f.human_files) humans.push_back(load_any_model(h, f.slip));
  } else {
    EnsembleSpec spec;
    spec.base.domain = parse_domain(f.domain);
    std::tie(spec.base.width, spec.base.height) = parse_grid_size(f.grid);
    spec.base.obstacle_density = f.density;
    spec.base.seed = f.seed;
    spec.base.slip_probability = f.slip;
    spec.human_count = f.humans;
    const Ensemble e = make_ensemble(spec);
    robot = e.robot.model;
    humans = e.human_models();
    truth = e.truth;
    grid_width = spec.base.width;
    out << "robot map:\n" << e.robot.to_text();
  }
  if (f.truth_given) {
    truth.clear();
    for (const auto& t : f.truth) {
      if (!t.empty()) truth.push_back(parse_state(t, robot, grid_width));
    }
  }

  const BottleneckHypothesis hyp = build_hypothesis_set(humans);
  for (const auto& w : hyp.warnings) out << "warning: " << w << '\n';
  const AchievableFamily family = find_maximal_achievable_subsets(robot, hyp.candidates);
  out << "candidates:";
  for (StateId s : family.candidates) out << ' ' << state_text(robot, s);
  out << "\nmaximal achievable sets: " << family.maximal_sets.size() << '\n';

  const auto kinds = parse_strategies(f.strategy);
  if (kinds.size() != 1) throw std::invalid_argument("query-session runs a single strategy");
  const QueryStrategy strategy =
      kinds.front() == StrategyKind::kStrategic ? make_strategic_strategy(family) : query_all_baseline(family);

  std::unique_ptr<Oracle> oracle;
  if (f.simulate) {
    oracle = std::make_unique<SimulatedOracle>(truth, f.budget);
  } else {
    oracle = std::make_unique<InteractiveOracle>(
        in, out, [&robot](StateId s) { return state_text(robot, s); }, f.budget);
  }
  const SessionOutcome session = run_session(strategy, *oracle, family);
  for (std::size_t i = 0; i < session.transcript.size(); ++i) {
    const auto& [s, yes] = session.transcript[i];
    out << "query " << i + 1 << ": " << state_text(robot, s) << " -> " << (yes ? "yes" : "no") << '\n';
  }
  out << "outcome: " << to_string(session.result) << " after " << session.queries_asked << " queries\n";
  if (session.plan) {
    out << "subgoals:";
    for (StateId s : session.final_subgoals) out << ' ' << state_text(robot, s);
    out << "\nplan start value " << session.plan->start_value << '\n';
  }
  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv, std::ostream& out, std::ostream& err, std::istream& in) {
  CLI::App app{"Implicit subgoal planning tools"};
  app.require_subcommand(1);

  std::string model_path;
  double slip = 0.0;
  double tolerance = 1e-8;
  std::string format = "text";
  auto* solve = app.add_subcommand("solve", "Solve a model and print its policy and values");
  solve->add_option("model", model_path, "Model JSON or map text file")->required();
  solve->add_option("--slip", slip, "Slip probability for map files")->envname("ISG_SLIP");
  solve->add_option("--tolerance", tolerance, "Value iteration tolerance");
  solve->add_option("--format", format, "Output format")->check(CLI::IsMember({"text", "json"}));

  std::string method = "graph";
  bool trivial = false;
  auto* bottlenecks = app.add_subcommand("bottlenecks", "List the bottleneck states of a model");
  bottlenecks->add_option("model", model_path, "Model JSON or map text file")->required();
  bottlenecks->add_option("--slip", slip, "Slip probability for map files")->envname("ISG_SLIP");
  bottlenecks->add_option("--method", method, "Bottleneck test")->check(CLI::IsMember({"graph", "avoid"}));
  bottlenecks->add_flag("--include-trivial", trivial, "Also list the start and goal states");

  ExperimentFlags ef;
  auto* experiment = app.add_subcommand("experiment", "Run the strategic vs query-all benchmark");
  experiment->add_option("--config", ef.config, "JSON config file")->envname("ISG_CONFIG");
  experiment->add_option("--domain", ef.domains, "maze, four_rooms, puddle, rocks")->delimiter(',')->envname("ISG_DOMAIN");
  experiment->add_option("--grid", ef.grids, "Grid size WxH")->delimiter(',')->envname("ISG_GRID");
  experiment->add_option("--density", ef.densities, "Obstacle density")->delimiter(',')->envname("ISG_DENSITY");
  experiment->add_option("--humans", ef.humans, "Human model count")->delimiter(',')->envname("ISG_HUMANS");
  experiment->add_option("--trials", ef.trials, "Trials per configuration")->envname("ISG_TRIALS");
  experiment->add_option("--seed", ef.seed, "Master seed")->envname("ISG_SEED");
  experiment->add_option("--budget", ef.budget, "Query budget per session")->envname("ISG_BUDGET");
  experiment->add_option("--threads", ef.threads, "Worker threads")->envname("ISG_THREADS");
  experiment->add_option("--strategy", ef.strategy, "strategic, query-all or both")
      ->check(CLI::IsMember({"strategic", "query-all", "both"}))
      ->envname("ISG_STRATEGY");
  experiment->add_option("--out", ef.out_path, "Result file (default stdout)")->envname("ISG_OUT");
  experiment->add_option("--format", ef.format, "csv or json")->check(CLI::IsMember({"csv", "json"}))->envname("ISG_FORMAT");

  SessionFlags sf;
  auto* session = app.add_subcommand("query-session", "Run a query session against a user or a simulated oracle");
  session->add_option("--robot", sf.robot, "Robot model file");
  session->add_option("--human", sf.human_files, "Human model file (repeatable)");
  session->add_option("--domain", sf.domain, "Generated ensemble domain")->envname("ISG_DOMAIN");
  session->add_option("--grid", sf.grid, "Generated grid size WxH")->envname("ISG_GRID");
  session->add_option("--density", sf.density, "Generated obstacle density")->envname("ISG_DENSITY");
  session->add_option("--humans", sf.humans, "Generated human model count")->envname("ISG_HUMANS");
  session->add_option("--seed", sf.seed, "Generation seed")->envname("ISG_SEED");
  session->add_option("--slip", sf.slip, "Slip probability")->envname("ISG_SLIP");
  session->add_flag("--simulate", sf.simulate, "Answer from the ground truth instead of asking");
  auto* truth_opt = session->add_option("--truth", sf.truth, "Ground-truth states: indices or row,col cells")
                        ->delimiter(';');
  session->add_option("--strategy", sf.strategy, "strategic or query-all")
      ->check(CLI::IsMember({"strategic", "query-all"}))
      ->envname("ISG_STRATEGY");
  session->add_option("--budget", sf.budget, "Query budget")->envname("ISG_BUDGET");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }
  try {
    if (*solve) return run_solve(model_path, slip, tolerance, format, out);
    if (*bottlenecks) return run_bottlenecks(model_path, slip, method, trivial, out);
    if (*experiment) return run_experiment_cmd(ef, out, err);
    if (*session) {
      sf.truth_given = truth_opt->count() > 0;
      return run_query_session(sf, out, in);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  }
  return 1;
}

}  // namespace isg
