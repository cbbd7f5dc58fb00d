#include "isg/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <thread>
#include <tuple>

namespace isg {

using nlohmann::json;

std::string to_string(StrategyKind k) { return k == StrategyKind::kStrategic ? "strategic" : "query-all"; }

std::vector<StrategyKind> parse_strategies(const std::string& name) {
  if (name == "strategic") return {StrategyKind::kStrategic};
  if (name == "query-all" || name == "query_all") return {StrategyKind::kQueryAll};
  if (name == "both") return {StrategyKind::kStrategic, StrategyKind::kQueryAll};
  throw std::invalid_argument("unknown strategy '" + name + "'");
}

std::pair<std::size_t, std::size_t> parse_grid_size(const std::string& text) {
  std::size_t w = 0;
  std::size_t h = 0;
  char x = 0;
  std::istringstream in(text);
  if (!(in >> w >> x >> h) || (x != 'x' && x != 'X') || !(in >> std::ws).eof() || w == 0 || h == 0) {
    throw std::invalid_argument("grid size must look like WxH, got '" + text + "'");
  }
  return {w, h};
}

void ExperimentConfig::validate() const {
  if (domains.empty()) throw std::invalid_argument("config lists no domains");
  if (grid_sizes.empty()) throw std::invalid_argument("config lists no grid sizes");
  if (obstacle_densities.empty()) throw std::invalid_argument("config lists no densities");
  if (human_model_counts.empty()) throw std::invalid_argument("config lists no human model counts");
  if (strategies.empty()) throw std::invalid_argument("config lists no strategies");
  if (trials_per_config < 1) throw std::invalid_argument("trials must be at least 1");
  for (const auto& [w, h] : grid_sizes) {
    if (w == 0 || h == 0) throw std::invalid_argument("grid sizes must be positive");
  }
  for (double d : obstacle_densities) {
    if (!(d >= 0.0 && d < 1.0)) throw std::invalid_argument("densities must lie in [0, 1)");
  }
  for (std::size_t n : human_model_counts) {
    if (n == 0) throw std::invalid_argument("human model counts must be positive");
  }
  if (!(gamma >= 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
  if (!(tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");
  if (!(slip_probability >= 0.0 && slip_probability < 0.5)) throw std::invalid_argument("slip must lie in [0, 0.5)");
  if (!(subgoal_inclusion_prob >= 0.0 && subgoal_inclusion_prob <= 1.0)) {
    throw std::invalid_argument("inclusion probability must lie in [0, 1]");
  }
  if (!(query_cost < 0.0)) throw std::invalid_argument("query cost must be negative");
  if (!(prior > 0.0 && prior < 1.0)) throw std::invalid_argument("prior must lie in (0, 1)");
  if (max_candidates > kMaxSubgoals) throw std::invalid_argument("max_candidates exceeds " + std::to_string(kMaxSubgoals));
  if (threads == 0) throw std::invalid_argument("threads must be at least 1");
}

namespace {

template <typename T, typename F>
std::vector<T> list_of(const json& v, F convert) {
  std::vector<T> out;
  if (v.is_array()) {
    for (const json& item : v) out.push_back(convert(item));
  } else {
    out.push_back(convert(v));
  }
  return out;
}

}  // namespace

ExperimentConfig config_from_json(const json& doc) {
  if (!doc.is_object()) throw std::invalid_argument("config must be a JSON object");
  ExperimentConfig c;
  for (const auto& [key, v] : doc.items()) {
    try {
      if (key == "domains" || key == "domain") {
        c.domains = list_of<Domain>(v, [](const json& x) { return parse_domain(x.get<std::string>()); });
      } else if (key == "grid_sizes" || key == "grid") {
        c.grid_sizes = list_of<std::pair<std::size_t, std::size_t>>(
            v, [](const json& x) { return parse_grid_size(x.get<std::string>()); });
      } else if (key == "obstacle_densities" || key == "density") {
        c.obstacle_densities = list_of<double>(v, [](const json& x) { return x.get<double>(); });
      } else if (key == "human_model_counts" || key == "humans") {
        c.human_model_counts = list_of<std::size_t>(v, [](const json& x) { return x.get<std::size_t>(); });
      } else if (key == "trials_per_config" || key == "trials") {
        c.trials_per_config = v.get<std::size_t>();
      } else if (key == "query_budget" || key == "budget") {
        c.query_budget = v.get<std::size_t>();
      } else if (key == "master_seed" || key == "seed") {
        c.master_seed = v.get<std::uint64_t>();
      } else if (key == "gamma") {
        c.gamma = v.get<double>();
      } else if (key == "tolerance") {
        c.tolerance = v.get<double>();
      } else if (key == "strategies" || key == "strategy") {
        c.strategies.clear();
        for (const std::string& s : list_of<std::string>(v, [](const json& x) { return x.get<std::string>(); })) {
          for (StrategyKind k : parse_strategies(s)) c.strategies.push_back(k);
        }
      } else if (key == "slip_probability") {
        c.slip_probability = v.get<double>();
      } else if (key == "subgoal_inclusion_prob") {
        c.subgoal_inclusion_prob = v.get<double>();
      } else if (key == "query_cost") {
        c.query_cost = v.get<double>();
      } else if (key == "prior") {
        c.prior = v.get<double>();
      } else if (key == "max_candidates") {
        c.max_candidates = v.get<std::size_t>();
      } else if (key == "threads") {
        c.threads = v.get<std::size_t>();
      } else {
        throw std::invalid_argument("unknown key");
      }
    } catch (const json::exception& e) {
      throw std::invalid_argument("config key '" + key + "': " + e.what());
    } catch (const std::invalid_argument& e) {
      throw std::invalid_argument("config key '" + key + "': " + e.what());
    }
  }
  c.validate();
  return c;
}

json config_to_json(const ExperimentConfig& c) {
  json doc;
  doc["domains"] = json::array();
  for (Domain d : c.domains) doc["domains"].push_back(to_string(d));
  doc["grid_sizes"] = json::array();
  for (const auto& [w, h] : c.grid_sizes) doc["grid_sizes"].push_back(std::to_string(w) + "x" + std::to_string(h));
  doc["obstacle_densities"] = c.obstacle_densities;
  doc["human_model_counts"] = c.human_model_counts;
  doc["trials_per_config"] = c.trials_per_config;
  doc["query_budget"] = c.query_budget;
  doc["master_seed"] = c.master_seed;
  doc["gamma"] = c.gamma;
  doc["tolerance"] = c.tolerance;
  doc["strategies"] = json::array();
  for (StrategyKind k : c.strategies) doc["strategies"].push_back(to_string(k));
  doc["slip_probability"] = c.slip_probability;
  doc["subgoal_inclusion_prob"] = c.subgoal_inclusion_prob;
  doc["query_cost"] = c.query_cost;
  doc["prior"] = c.prior;
  doc["max_candidates"] = c.max_candidates;
  doc["threads"] = c.threads;
  return doc;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot read config file '" + path + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw std::invalid_argument("malformed config '" + path + "': " + e.what());
  }
  return config_from_json(doc);
}

std::uint64_t trial_seed(std::uint64_t master_seed, const TrialKey& key) {
  std::uint64_t s = derive_seed(master_seed, static_cast<std::uint64_t>(key.domain));
  s = derive_seed(s, key.width);
  s = derive_seed(s, key.height);
  s = derive_seed(s, static_cast<std::uint64_t>(std::llround(key.density * 1e6)));
  s = derive_seed(s, key.humans);
  return derive_seed(s, key.trial);
}

std::vector<TrialKey> expand_trials(const ExperimentConfig& config) {
  std::vector<TrialKey> keys;
  for (Domain d : config.domains) {
    for (const auto& [w, h] : config.grid_sizes) {
      for (double density : config.obstacle_densities) {
        for (std::size_t humans : config.human_model_counts) {
          for (std::size_t t = 0; t < config.trials_per_config; ++t) keys.push_back({d, w, h, density, humans, t});
        }
      }
    }
  }
  return keys;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

}  // namespace

TrialRecord run_trial(const ExperimentConfig& config, const TrialKey& key) {
  TrialRecord rec;
  rec.key = key;
  rec.seed = trial_seed(config.master_seed, key);
  const auto fail_all = [&](const std::string& message) {
    rec.results.clear();
    for (StrategyKind k : config.strategies) {
      TrialResult r;
      r.key = key;
      r.strategy = k;
      r.outcome = "error";
      r.error = message;
      rec.results.push_back(r);
    }
  };
  try {
    EnsembleSpec spec;
    spec.base.domain = key.domain;
    spec.base.width = key.width;
    spec.base.height = key.height;
    spec.base.obstacle_density = key.density;
    spec.base.seed = rec.seed;
    spec.base.slip_probability = config.slip_probability;
    spec.base.gamma = config.gamma;
    spec.human_count = key.humans;
    spec.subgoal_inclusion_prob = config.subgoal_inclusion_prob;
    rec.ensemble = make_ensemble(spec);

    auto t0 = Clock::now();
    rec.hypothesis = build_hypothesis_set(rec.ensemble.human_models());
    const double t_bottleneck = ms_since(t0);

    t0 = Clock::now();
    SubsetSearchOptions search;
    search.max_candidates = config.max_candidates;
    search.solver.tolerance = config.tolerance;
    rec.family = find_maximal_achievable_subsets(rec.ensemble.robot.model, rec.hypothesis.candidates, search);
    const double t_subsets = ms_since(t0);

    QueryParams qp;
    qp.query_cost = config.query_cost;
    qp.prior = config.prior;
    for (StrategyKind k : config.strategies) {
      t0 = Clock::now();
      const QueryStrategy strategy =
          k == StrategyKind::kStrategic ? make_strategic_strategy(rec.family, qp) : query_all_baseline(rec.family);
      SimulatedOracle oracle(rec.ensemble.truth, config.query_budget);
      SessionOutcome session = run_session(strategy, oracle, rec.family);
      TrialResult r;
      r.key = key;
      r.strategy = k;
      r.queries = session.queries_asked;
      r.outcome = to_string(session.result);
      r.t_bottleneck_ms = t_bottleneck;
      r.t_subsets_ms = t_subsets;
      r.t_query_ms = ms_since(t0);
      r.t_total_ms = t_bottleneck + t_subsets + r.t_query_ms;
      r.human_bottleneck_count = rec.hypothesis.candidates.size();
      r.unachievable_count = static_cast<std::size_t>(std::popcount(rec.family.unachievable_singletons));
      rec.results.push_back(r);
      rec.sessions.emplace_back(k, std::move(session));
    }
  } catch (const std::exception& e) {
    fail_all(e.what());
  }
  return rec;
}

ExperimentOutput run_experiment(const ExperimentConfig& config, std::vector<TrialRecord>* records) {
  config.validate();
  const std::vector<TrialKey> keys = expand_trials(config);
  std::vector<TrialRecord> done(keys.size());
  std::atomic<std::size_t> next{0};
  const auto worker = [&] {
    for (std::size_t i = next++; i < keys.size(); i = next++) done[i] = run_trial(config, keys[i]);
  };
  const std::size_t workers = std::min(config.threads, keys.size());
  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < workers; ++i) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  ExperimentOutput out;
  for (const TrialRecord& rec : done) out.results.insert(out.results.end(), rec.results.begin(), rec.results.end());
  if (!out.results.empty()) out.summary = summarize(out.results);
  if (records) *records = std::move(done);
  return out;
}

std::pair<double, double> mean_std(const std::vector<double>& values) {
  if (values.empty()) return {0.0, 0.0};
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  if (values.size() < 2) return {mean, 0.0};
  double sq = 0.0;
  for (double v : values) sq += (v - mean) * (v - mean);
  return {mean, std::sqrt(sq / static_cast<double>(values.size() - 1))};
}

namespace {

using CellKey = std::tuple<Domain, std::size_t, std::size_t, double, std::size_t>;

CellKey cell_of(const TrialKey& k) { return {k.domain, k.width, k.height, k.density, k.humans}; }

}  // namespace

std::vector<SummaryRow> summarize(const std::vector<TrialResult>& results) {
  if (results.empty()) throw std::invalid_argument("no results to summarize");
  // Query-all counts per (cell, trial) for the paired reduction.
  std::map<std::pair<CellKey, std::size_t>, std::size_t> baseline;
  for (const TrialResult& r : results) {
    if (r.strategy == StrategyKind::kQueryAll && r.outcome != "error") {
      baseline[{cell_of(r.key), r.key.trial}] = r.queries;
    }
  }
  struct Group {
    TrialKey cell;
    StrategyKind strategy;
    std::vector<const TrialResult*> members;
    std::size_t failures = 0;
  };
  std::vector<Group> groups;
  for (const TrialResult& r : results) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group& g) {
      return g.strategy == r.strategy && cell_of(g.cell) == cell_of(r.key);
    });
    if (it == groups.end()) {
      groups.push_back({r.key, r.strategy, {}, 0});
      it = std::prev(groups.end());
    }
    if (r.outcome == "error") {
      ++it->failures;
    } else {
      it->members.push_back(&r);
    }
  }
  std::vector<SummaryRow> rows;
  for (const Group& g : groups) {
    SummaryRow row;
    row.cell = g.cell;
    row.cell.trial = 0;
    row.strategy = g.strategy;
    row.samples = g.members.size();
    row.failures = g.failures;
    row.single_sample = row.samples == 1;
    std::vector<double> queries, reduction, tb, ts, tq, tt, hb;
    for (const TrialResult* r : g.members) {
      queries.push_back(static_cast<double>(r->queries));
      tb.push_back(r->t_bottleneck_ms);
      ts.push_back(r->t_subsets_ms);
      tq.push_back(r->t_query_ms);
      tt.push_back(r->t_total_ms);
      hb.push_back(static_cast<double>(r->human_bottleneck_count));
      const auto base = baseline.find({cell_of(r->key), r->key.trial});
      if (base != baseline.end()) {
        const double qa = static_cast<double>(base->second);
        reduction.push_back(qa == 0.0 ? 0.0 : (qa - static_cast<double>(r->queries)) / qa * 100.0);
      }
    }
    std::tie(row.mean_queries, row.std_queries) = mean_std(queries);
    std::tie(row.mean_reduction, row.std_reduction) = mean_std(reduction);
    row.mean_bottleneck_ms = mean_std(tb).first;
    row.mean_subsets_ms = mean_std(ts).first;
    row.mean_query_ms = mean_std(tq).first;
    row.mean_total_ms = mean_std(tt).first;
    row.mean_human_bottlenecks = mean_std(hb).first;
    rows.push_back(row);
  }
  return rows;
}

namespace {

std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  return buf;
}

std::string density_text(double d) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", d);
  return buf;
}

}  // namespace

std::string format_mean_std(double mean, double std_dev) { return fixed(mean, 1) + "±" + fixed(std_dev, 1); }

void write_csv(std::ostream& out, const std::vector<TrialResult>& results) {
  out << kCsvHeader << '\n';
  for (const TrialResult& r : results) {
    out << to_string(r.key.domain) << ',' << r.key.width << ',' << r.key.height << ',' << density_text(r.key.density)
        << ',' << r.key.humans << ',' << r.key.trial << ',' << to_string(r.strategy) << ',' << r.queries << ','
        << r.outcome << ',' << fixed(r.t_bottleneck_ms, 3) << ',' << fixed(r.t_subsets_ms, 3) << ','
        << fixed(r.t_query_ms, 3) << ',' << fixed(r.t_total_ms, 3) << '\n';
  }
}

json results_to_json(const ExperimentOutput& output) {
  json doc;
  doc["results"] = json::array();
  for (const TrialResult& r : output.results) {
    json row{{"domain", to_string(r.key.domain)},
             {"width", r.key.width},
             {"height", r.key.height},
             {"density", r.key.density},
             {"humans", r.key.humans},
             {"trial", r.key.trial},
             {"strategy", to_string(r.strategy)},
             {"queries", r.queries},
             {"outcome", r.outcome},
             {"t_bottleneck_ms", r.t_bottleneck_ms},
             {"t_subsets_ms", r.t_subsets_ms},
             {"t_query_ms", r.t_query_ms},
             {"t_total_ms", r.t_total_ms},
             {"human_bottleneck_count", r.human_bottleneck_count},
             {"unachievable_count", r.unachievable_count}};
    if (!r.error.empty()) row["error"] = r.error;
    doc["results"].push_back(row);
  }
  doc["summary"] = json::array();
  for (const SummaryRow& s : output.summary) {
    doc["summary"].push_back({{"domain", to_string(s.cell.domain)},
                              {"width", s.cell.width},
                              {"height", s.cell.height},
                              {"density", s.cell.density},
                              {"humans", s.cell.humans},
                              {"strategy", to_string(s.strategy)},
                              {"samples", s.samples},
                              {"failures", s.failures},
                              {"single_sample", s.single_sample},
                              {"mean_queries", s.mean_queries},
                              {"std_queries", s.std_queries},
                              {"mean_reduction", s.mean_reduction},
                              {"std_reduction", s.std_reduction},
                              {"mean_total_ms", s.mean_total_ms},
                              {"mean_human_bottlenecks", s.mean_human_bottlenecks}});
  }
  return doc;
}

void write_summary(std::ostream& out, const std::vector<SummaryRow>& summary) {
  for (const SummaryRow& s : summary) {
    out << to_string(s.cell.domain) << ' ' << s.cell.width << 'x' << s.cell.height << " density "
        << density_text(s.cell.density) << " humans " << s.cell.humans << ' ' << to_string(s.strategy)
        << ": queries " << format_mean_std(s.mean_queries, s.std_queries) << " reduction "
        << format_mean_std(s.mean_reduction, s.std_reduction) << "% n=" << s.samples;
    if (s.single_sample) out << " (single sample)";
    if (s.failures) out << " failures=" << s.failures;
    out << " bottleneck_ms " << fixed(s.mean_bottleneck_ms, 1) << " subsets_ms " << fixed(s.mean_subsets_ms, 1)
        << " query_ms " << fixed(s.mean_query_ms, 1) << " total_ms " << fixed(s.mean_total_ms, 1) << '\n';
  }
}

void write_comparison(std::ostream& out, const std::vector<SummaryRow>& summary) {
  out << "domain size strategic / query-all / reduction%\n";
  for (const SummaryRow& s : summary) {
    if (s.strategy != StrategyKind::kStrategic) continue;
    const auto qa = std::find_if(summary.begin(), summary.end(), [&](const SummaryRow& o) {
      return o.strategy == StrategyKind::kQueryAll && cell_of(o.cell) == cell_of(s.cell);
    });
    if (qa == summary.end()) continue;
    out << to_string(s.cell.domain) << " (" << s.cell.width << ',' << s.cell.height << ") "
        << format_mean_std(s.mean_queries, s.std_queries) << " / " << format_mean_std(qa->mean_queries, qa->std_queries)
        << " / " << format_mean_std(s.mean_reduction, s.std_reduction) << '\n';
  }
}

}  // namespace isg
