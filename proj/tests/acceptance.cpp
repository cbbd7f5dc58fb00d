// Acceptance checks, one line per criterion. Exit code is nonzero if any fails.

#include <chrono>
#include <cstdio>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <string>

#include "isg/achievable_subsets.hpp"
#include "isg/bottleneck.hpp"
#include "isg/environments.hpp"
#include "isg/experiment.hpp"
#include "isg/query_strategy.hpp"
#include "oracles.hpp"

using namespace isg;

namespace {

struct Verdict {
  bool pass;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

constexpr Domain kDomains[] = {Domain::kMaze, Domain::kFourRooms, Domain::kPuddle, Domain::kRocks};
constexpr std::uint64_t kMasterSeed = 0;

// 1. Avoid-MDP test agrees with graph removal on every state.
Verdict bottleneck_equivalence() {
  const auto t0 = Clock::now();
  std::size_t instances = 0, states = 0, disagreements = 0;
  const std::pair<std::size_t, std::size_t> sizes[] = {{4, 4}, {5, 5}, {6, 6}, {4, 6}, {6, 5}};
  for (Domain d : kDomains) {
    for (std::uint64_t i = 0; i < 100; ++i) {
      GridSpec g;
      g.domain = d;
      std::tie(g.width, g.height) = sizes[i % 5];
      g.obstacle_density = i % 2 ? 0.15 : 0.1;
      g.seed = derive_seed(1000 + static_cast<std::uint64_t>(d), i);
      const DeterminizedMdp dm = determinize(make_grid_world(g).model);
      for (StateId s = 0; s < dm.model().num_states(); ++s) {
        ++states;
        if (is_bottleneck_avoid_test(dm, s) != is_bottleneck_graph_oracle(dm, s)) ++disagreements;
      }
      ++instances;
    }
  }
  const double secs = seconds_since(t0);
  return {disagreements == 0 && secs < 120.0,
          std::to_string(instances) + " instances, " + std::to_string(states) + " states, " +
              std::to_string(disagreements) + " disagreements, " + fmt("%.1fs (limit 120s)", secs)};
}

// 2. Bottlenecks of a slipping maze equal those of its determinization.
Verdict determinization_preservation() {
  const auto t0 = Clock::now();
  std::size_t mismatches = 0, nontrivial = 0;
  for (std::uint64_t i = 0; i < 50; ++i) {
    GridSpec g;
    g.width = 4 + i % 3;
    g.height = 4 + (i / 3) % 3;
    g.obstacle_density = i % 2 ? 0.15 : 0.1;
    g.slip_probability = 0.05 + 0.05 * static_cast<double>(i % 5);
    g.seed = derive_seed(2000, i);
    const GoalMdp m = make_grid_world(g).model;
    const auto direct = oracle::bottlenecks_by_removal(m);
    const auto det = determinize(m);
    const auto graph = find_bottlenecks(det, BottleneckMethod::kGraphRemoval).bottlenecks;
    const auto avoid = find_bottlenecks(det, BottleneckMethod::kAvoidTest).bottlenecks;
    if (std::set<StateId>(graph.begin(), graph.end()) != direct || avoid != graph) ++mismatches;
    if (direct.size() > 2) ++nontrivial;
  }
  const double secs = seconds_since(t0);
  return {mismatches == 0 && secs < 60.0, "50 slip mazes (" + std::to_string(nontrivial) + " with inner bottlenecks), " +
                                              std::to_string(mismatches) + " mismatches, " +
                                              fmt("%.1fs (limit 60s)", secs)};
}

// Forward-only random model: successors have higher indices, so branches
// exclude each other and families often have several maximal sets.
GoalMdp forward_mdp(std::mt19937_64& rng, std::size_t n, bool deterministic) {
  std::uniform_real_distribution<double> u(0.1, 1.0);
  GoalMdpBuilder b(n, 3);
  for (StateId s = 0; s + 1 < n; ++s) {
    for (ActionId a = 0; a < 3; ++a) {
      std::uniform_int_distribution<StateId> ahead(s + 1, std::min(n - 1, s + 3));
      const StateId x = ahead(rng);
      const StateId y = ahead(rng);
      if (deterministic || x == y) {
        b.add_transition(s, a, x, 1.0);
      } else {
        const double p = u(rng) / 1.1;
        b.add_transition(s, a, x, p).add_transition(s, a, y, 1.0 - p);
      }
    }
  }
  b.add_goal(n - 1).set_initial_state(0).set_gamma(0.95);
  return b.build();
}

std::vector<StateId> pick(std::mt19937_64& rng, std::vector<StateId> pool, std::size_t k) {
  std::shuffle(pool.begin(), pool.end(), rng);
  pool.resize(std::min(k, pool.size()));
  return pool;
}

// 3. Maximal achievable subsets equal brute force; antichain and downward closure hold.
Verdict maximal_subsets() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(3000);
  std::size_t failures = 0, multi = 0;
  for (int i = 0; i < 50; ++i) {
    GoalMdp m;
    std::vector<StateId> pool;
    if (i % 3 == 0) {
      m = oracle::random_mdp(rng, 9, 3, 3, i % 2 == 0);
      for (StateId s = 1; s + 1 < m.num_states(); ++s) pool.push_back(s);
    } else if (i % 3 == 1) {
      m = forward_mdp(rng, 10, i % 2 == 0);
      for (StateId s = 1; s + 1 < m.num_states(); ++s) pool.push_back(s);
    } else {
      GridSpec g;
      g.obstacle_density = 0.15;
      g.slip_probability = 0.1;
      g.seed = derive_seed(3001, static_cast<std::uint64_t>(i));
      const GridWorld w = make_grid_world(g);
      m = w.model;
      for (StateId s = 0; s < m.num_states(); ++s) {
        if (s != m.initial_state() && !m.is_goal(s) && !w.blocked(w.cell(s))) pool.push_back(s);
      }
    }
    const auto cands = pick(rng, pool, 3 + static_cast<std::size_t>(i) % 3);
    const AchievableFamily fam = find_maximal_achievable_subsets(m, cands);
    const auto expected = oracle::maximal_achievable_brute_force(m, cands);
    std::set<std::vector<StateId>> got;
    for (auto v : fam.maximal_state_sets()) {
      std::sort(v.begin(), v.end());
      got.insert(v);
    }
    bool ok = got == expected;
    for (CandidateMask a : fam.maximal_sets) {
      for (CandidateMask b : fam.maximal_sets) ok = ok && (a == b || (a & b) != a);
      // Every subset of a member is achievable.
      for (CandidateMask sub = a;; sub = (sub - 1) & a) {
        ok = ok && oracle::achievable_by_game(m, fam.checker->states_of(sub));
        if (sub == 0) break;
      }
    }
    // Every achievable subset lies in some member.
    for (CandidateMask s = 0; s < (1u << cands.size()); ++s) {
      if (oracle::achievable_by_game(m, fam.checker->states_of(s))) ok = ok && fam.contains(s);
    }
    failures += !ok;
    multi += fam.maximal_sets.size() > 1;
  }
  const double secs = seconds_since(t0);
  return {failures == 0 && multi > 0 && secs < 300.0, "50 instances (" + std::to_string(multi) + " with several maximal sets), " +
                                             std::to_string(failures) + " failures, " +
                                             fmt("%.1fs (limit 300s)", secs)};
}

bool achievable_mask(const GoalMdp& m, const std::vector<StateId>& cands, std::uint32_t mask) {
  std::vector<StateId> sub;
  for (std::size_t i = 0; i < cands.size(); ++i) {
    if (mask & (1u << i)) sub.push_back(cands[i]);
  }
  return oracle::achievable_by_game(m, sub);
}

// 4. Solved query policy attains the brute-force minimum over adaptive query trees.
Verdict query_optimality() {
  std::size_t used = 0, failures = 0, multi = 0;
  double worst = 0.0;
  const auto check = [&](std::size_t n, const std::vector<CandidateMask>& sets,
                         const std::function<bool(std::uint32_t)>& achievable) {
    multi += sets.size() > 1;
    QueryMdp q(n, sets);
    const double got = expected_query_cost(strategy_from_solution(solve_query_mdp(q)));
    const double best = oracle::min_expected_queries(n, achievable);
    worst = std::max(worst, std::abs(got - best));
    failures += std::abs(got - best) > 1e-6;
    ++used;
  };
  for (std::uint64_t i = 0; i < 30; ++i) {
    EnsembleSpec e;
    e.base.domain = kDomains[i % 4];
    e.base.seed = derive_seed(4000, i);
    e.base.obstacle_density = i % 2 ? 0.15 : 0.1;
    e.base.slip_probability = i % 3 == 0 ? 0.1 : 0.0;
    e.human_count = 2 + i % 6;
    const Ensemble ens = make_ensemble(e);
    const auto hyp = build_hypothesis_set(ens.human_models());
    if (hyp.candidates.size() > 4) continue;
    const auto fam = find_maximal_achievable_subsets(ens.robot.model, hyp.candidates);
    check(hyp.candidates.size(), fam.maximal_sets,
          [&](std::uint32_t m) { return achievable_mask(ens.robot.model, hyp.candidates, m); });
  }
  const std::size_t from_ensembles = used;
  // Random robot models with four candidates give richer families.
  std::mt19937_64 rng(4001);
  for (int i = 0; i < 30; ++i) {
    const GoalMdp m = i % 2 ? forward_mdp(rng, 9, i % 4 == 1) : oracle::random_mdp(rng, 9, 3, 2, i % 4 == 0);
    std::vector<StateId> pool;
    for (StateId s = 1; s + 1 < m.num_states(); ++s) pool.push_back(s);
    const auto cands = pick(rng, pool, 1 + static_cast<std::size_t>(i) % 4);
    const auto fam = find_maximal_achievable_subsets(m, cands);
    check(cands.size(), fam.maximal_sets, [&](std::uint32_t mask) { return achievable_mask(m, cands, mask); });
  }
  // Random antichains over at most four candidates.
  std::size_t synthetic = 0;
  while (synthetic < 20) {
    const std::size_t n = 2 + rng() % 3;
    std::vector<CandidateMask> sets;
    for (int k = 0; k < 3; ++k) {
      const CandidateMask c = static_cast<CandidateMask>(rng() % (1u << n));
      bool dominated = false;
      for (CandidateMask s : sets) dominated = dominated || (c & s) == c;
      if (dominated) continue;
      std::erase_if(sets, [c](CandidateMask s) { return (s & c) == s; });
      sets.push_back(c);
    }
    std::sort(sets.begin(), sets.end());
    check(n, sets, [&](std::uint32_t mask) {
      return std::any_of(sets.begin(), sets.end(), [mask](CandidateMask s) { return (mask & s) == mask; });
    });
    ++synthetic;
  }
  QueryMdp worked(2, {0b01, 0b10});
  const double worked_cost = expected_query_cost(strategy_from_solution(solve_query_mdp(worked)));
  const bool worked_ok = std::abs(worked_cost - 1.5) <= 1e-12;
  return {failures == 0 && worked_ok && from_ensembles > 0,
          std::to_string(from_ensembles) + " ensemble instances with |B|<=4 + " + std::to_string(used - from_ensembles - 20) +
              " random-model + 20 synthetic families (" + std::to_string(multi) + " with several maximal sets), max deviation " + fmt("%.2g", worst) + ", worked instance " +
              fmt("%.6f (expected 1.5)", worked_cost)};
}

// 5. Meta-policy cost equals the full query MDP optimum.
Verdict meta_policy_optimality() {
  std::mt19937_64 rng(5000);
  std::size_t found = 0, failures = 0, draws = 0, with_unachievable = 0;
  double worst = 0.0;
  while (found < 30 && draws < 20000) {
    ++draws;
    const GoalMdp m = oracle::random_mdp(rng, 10, 3, 2, draws % 2 == 0);
    std::vector<StateId> pool;
    for (StateId s = 1; s + 1 < m.num_states(); ++s) pool.push_back(s);
    const auto cands = pick(rng, pool, 2 + draws % 4);
    const auto fam = find_maximal_achievable_subsets(m, cands);
    if (!fam.robot_feasible) continue;
    const std::size_t bad = static_cast<std::size_t>(std::popcount(fam.unachievable_singletons));
    if (bad > 2 || cands.size() - bad > 3) continue;
    ++found;
    with_unachievable += bad > 0;
    QueryMdp full(cands.size(), fam.maximal_sets);
    const double optimum = solve_query_mdp(full).at({}).expected_queries;
    const double meta = expected_query_cost(make_strategic_strategy(fam));
    const double brute = oracle::min_expected_queries(cands.size(), [&](std::uint32_t mask) {
      return achievable_mask(m, cands, mask);
    });
    worst = std::max({worst, std::abs(meta - optimum), std::abs(meta - brute)});
    failures += std::abs(meta - optimum) > 1e-6 || std::abs(meta - brute) > 1e-6;
  }
  return {found == 30 && failures == 0 && with_unachievable > 0,
          std::to_string(found) + " instances (" + std::to_string(with_unachievable) +
              " with unachievable candidates), max deviation " + fmt("%.2g", worst)};
}

ExperimentConfig trend_config() {
  ExperimentConfig c;
  c.domains.assign(std::begin(kDomains), std::end(kDomains));
  c.grid_sizes = {{4, 4}};
  c.obstacle_densities = {0.1};
  c.human_model_counts = {20};
  c.trials_per_config = 3;
  c.master_seed = kMasterSeed;
  return c;
}

// Trials at 6x6 and 8x8; 3 trials leave the means dominated by noise, so the
// growth comparison uses 20 trials per size.
ExperimentConfig scaling_config() {
  ExperimentConfig c;
  c.domains = {Domain::kMaze};
  c.grid_sizes = {{6, 6}, {8, 8}};
  c.obstacle_densities = {0.1};
  c.human_model_counts = {20};
  c.trials_per_config = 20;
  c.master_seed = kMasterSeed;
  return c;
}

// 6. Every "policy found" verifies against the true subgoals; every
// "proven infeasible" is confirmed by brute-force achievability.
Verdict soundness(const std::vector<TrialRecord>& records) {
  std::size_t found = 0, infeasible = 0, other = 0, failures = 0;
  for (const TrialRecord& rec : records) {
    if (rec.results.empty() || rec.results.front().outcome == "error") {
      ++other;
      ++failures;
      continue;
    }
    for (const auto& [kind, s] : rec.sessions) {
      if (s.result == SessionResult::kPolicyFound) {
        ++found;
        const SubgoalMask required = s.plan->product.mask_of(rec.ensemble.truth);
        if (!verify_achievement(s.plan->product, s.plan->policy, required)) ++failures;
      } else if (s.result == SessionResult::kProvenInfeasible) {
        ++infeasible;
        if (oracle::achievable_by_game(rec.ensemble.robot.model, rec.ensemble.truth)) ++failures;
      } else {
        ++other;
        ++failures;
      }
    }
  }
  return {failures == 0 && found > 0, std::to_string(records.size()) + " trials: " + std::to_string(found) +
                                          " policies verified, " + std::to_string(infeasible) +
                                          " infeasibility proofs confirmed, " + std::to_string(other) +
                                          " other, " + std::to_string(failures) + " failures"};
}

const SummaryRow* find_row(const std::vector<SummaryRow>& rows, Domain d, std::size_t w, StrategyKind k) {
  for (const SummaryRow& r : rows) {
    if (r.cell.domain == d && r.cell.width == w && r.strategy == k) return &r;
  }
  return nullptr;
}

// 7. Strategic below query-all in every domain, aggregate reduction >= 10%.
Verdict trend(const ExperimentOutput& out, double secs) {
  bool ok = secs < 600.0;
  std::string detail;
  for (Domain d : kDomains) {
    const SummaryRow* s = find_row(out.summary, d, 4, StrategyKind::kStrategic);
    const SummaryRow* q = find_row(out.summary, d, 4, StrategyKind::kQueryAll);
    if (!s || !q || s->failures || q->failures) return {false, "missing or failed cells for " + to_string(d)};
    ok = ok && s->mean_queries < q->mean_queries;
    detail += to_string(d) + " " + format_mean_std(s->mean_queries, s->std_queries) + " / " +
              format_mean_std(q->mean_queries, q->std_queries) + "; ";
  }
  std::map<std::pair<Domain, std::size_t>, std::pair<double, double>> pairs;
  for (const TrialResult& r : out.results) {
    if (r.key.domain == Domain::kFourRooms) continue;
    auto& p = pairs[{r.key.domain, r.key.trial}];
    (r.strategy == StrategyKind::kStrategic ? p.first : p.second) = static_cast<double>(r.queries);
  }
  std::vector<double> reductions;
  for (const auto& [k, p] : pairs) reductions.push_back(p.second == 0.0 ? 0.0 : (p.second - p.first) / p.second * 100.0);
  const double aggregate = mean_std(reductions).first;
  ok = ok && aggregate >= 10.0;
  return {ok, detail + "aggregate reduction (maze/puddle/rocks) " + fmt("%.1f%% (>= 10%%), ", aggregate) +
                  fmt("%.1fs (limit 600s)", secs)};
}

// 8. From 6x6 to 8x8 the strategic mean grows slower than the query-all mean.
Verdict scaling(const ExperimentOutput& out, double secs) {
  const SummaryRow* s6 = find_row(out.summary, Domain::kMaze, 6, StrategyKind::kStrategic);
  const SummaryRow* q6 = find_row(out.summary, Domain::kMaze, 6, StrategyKind::kQueryAll);
  const SummaryRow* s8 = find_row(out.summary, Domain::kMaze, 8, StrategyKind::kStrategic);
  const SummaryRow* q8 = find_row(out.summary, Domain::kMaze, 8, StrategyKind::kQueryAll);
  if (!s6 || !q6 || !s8 || !q8) return {false, "missing summary rows"};
  const double ds = s8->mean_queries - s6->mean_queries;
  const double dq = q8->mean_queries - q6->mean_queries;
  const std::size_t failures = s6->failures + q6->failures + s8->failures + q8->failures;
  return {ds < dq && s8->mean_queries < q8->mean_queries && failures == 0 && secs < 1200.0,
          "strategic " + format_mean_std(s6->mean_queries, s6->std_queries) + " -> " +
              format_mean_std(s8->mean_queries, s8->std_queries) + " (delta " + fmt("%+.2f", ds) + "), query-all " +
              format_mean_std(q6->mean_queries, q6->std_queries) + " -> " +
              format_mean_std(q8->mean_queries, q8->std_queries) + " (delta " + fmt("%+.2f", dq) + "), " +
              std::to_string(failures) + " failed trials, " + fmt("%.1fs (limit 1200s)", secs)};
}

// 9. Replaying the trend run reproduces every per-trial query count.
Verdict determinism(const ExperimentOutput& first) {
  ExperimentConfig c = trend_config();
  const ExperimentOutput again = run_experiment(c);
  c.threads = 2;
  const ExperimentOutput parallel = run_experiment(c);
  std::size_t diffs = 0;
  if (again.results.size() != first.results.size() || parallel.results.size() != first.results.size()) {
    return {false, "result counts differ"};
  }
  for (std::size_t i = 0; i < first.results.size(); ++i) {
    diffs += again.results[i].queries != first.results[i].queries;
    diffs += parallel.results[i].queries != first.results[i].queries;
    diffs += again.results[i].outcome != first.results[i].outcome;
  }
  return {diffs == 0, std::to_string(first.results.size()) + " results replayed twice (1 and 2 workers), " +
                          std::to_string(diffs) + " differences"};
}

}  // namespace

int main() {
  int failed = 0;
  const auto report = [&failed](int id, const char* name, const Verdict& v) {
    std::printf("[%s] %d %s: %s\n", v.pass ? "PASS" : "FAIL", id, name, v.detail.c_str());
    std::fflush(stdout);
    failed += !v.pass;
  };
  const auto guarded = [](const std::function<Verdict()>& f) -> Verdict {
    try {
      return f();
    } catch (const std::exception& e) {
      return {false, std::string("exception: ") + e.what()};
    }
  };

  report(1, "bottleneck equivalence", guarded(bottleneck_equivalence));
  report(2, "determinization preservation", guarded(determinization_preservation));
  report(3, "maximal-subset correctness", guarded(maximal_subsets));
  report(4, "query-strategy optimality", guarded(query_optimality));
  report(5, "meta-policy optimality", guarded(meta_policy_optimality));

  std::vector<TrialRecord> trend_records, scaling_records;
  ExperimentOutput trend_out, scaling_out;
  double trend_secs = 0.0, scaling_secs = 0.0;
  const Verdict runs = guarded([&]() -> Verdict {
    auto t0 = Clock::now();
    trend_out = run_experiment(trend_config(), &trend_records);
    trend_secs = seconds_since(t0);
    t0 = Clock::now();
    scaling_out = run_experiment(scaling_config(), &scaling_records);
    scaling_secs = seconds_since(t0);
    return {true, ""};
  });
  if (!runs.pass) {
    for (int id = 6; id <= 9; ++id) report(id, "benchmark run", runs);
    return 1;
  }
  std::vector<TrialRecord> all = std::move(trend_records);
  for (auto& r : scaling_records) all.push_back(std::move(r));
  report(6, "alignment soundness", guarded([&] { return soundness(all); }));
  report(7, "evaluation trend (4x4, 20 humans, 10% obstacles, 3 trials)", guarded([&] { return trend(trend_out, trend_secs); }));
  report(8, "scaling trend (maze 6x6 -> 8x8)", guarded([&] { return scaling(scaling_out, scaling_secs); }));
  report(9, "determinism", guarded([&] { return determinism(trend_out); }));
  std::printf("%d of 9 criteria failed\n", failed);
  return failed == 0 ? 0 : 1;
}
