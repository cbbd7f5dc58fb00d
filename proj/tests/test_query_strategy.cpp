#include <doctest.h>

#include <random>
#include <sstream>

#include "isg/query_strategy.hpp"
#include "oracles.hpp"

using namespace isg;

namespace {

// Family from explicit maximal sets over n candidates (no robot model).
AchievableFamily synthetic(std::size_t n, std::vector<CandidateMask> sets) {
  AchievableFamily f;
  for (std::size_t i = 0; i < n; ++i) f.candidates.push_back(100 + i);
  f.maximal_sets = std::move(sets);
  CandidateMask covered = 0;
  for (CandidateMask m : f.maximal_sets) covered |= m;
  f.unachievable_singletons = static_cast<CandidateMask>((1u << n) - 1) & ~covered;
  return f;
}

// Random antichain over the candidates outside `excluded`.
std::vector<CandidateMask> random_antichain(std::mt19937_64& rng, std::size_t n, CandidateMask excluded) {
  std::uniform_int_distribution<std::uint32_t> pick(0, (1u << n) - 1);
  std::vector<CandidateMask> raw;
  const int count = 1 + static_cast<int>(rng() % 3);
  for (int i = 0; i < count; ++i) raw.push_back(pick(rng) & ~excluded);
  std::vector<CandidateMask> out;
  for (CandidateMask a : raw) {
    const bool dominated = std::any_of(raw.begin(), raw.end(), [a](CandidateMask b) { return b != a && (a & b) == a; });
    if (!dominated && std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
  }
  return out;
}

bool in_family(const std::vector<CandidateMask>& sets, std::uint32_t m) {
  return std::any_of(sets.begin(), sets.end(), [m](CandidateMask s) { return (m & s) == m; });
}

// 0 -> {1, 2} -> 3 goal: visiting 1 and 2 together is impossible.
GoalMdp fork_model() {
  GoalMdpBuilder b(4, 2);
  b.add_transition(0, 0, 1, 1.0).add_transition(0, 1, 2, 1.0);
  b.add_transition(1, 0, 3, 1.0).add_transition(2, 0, 3, 1.0).add_goal(3);
  return b.build();
}

}  // namespace

TEST_CASE("two incompatible candidates need 1.5 queries on average") {
  QueryMdp q(2, {0b01, 0b10});
  const QuerySolution sol = solve_query_mdp(q);
  CHECK(sol.at(q.start()).expected_queries == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(sol.value(q.start()) == doctest::Approx(-1.5 * 1000 + 0.75 * 500).epsilon(1e-12));
  CHECK(expected_query_cost(strategy_from_solution(sol)) == doctest::Approx(1.5));
  CHECK(oracle::min_expected_queries(2, [](std::uint32_t m) { return in_family({1, 2}, m); }) == doctest::Approx(1.5));
}

TEST_CASE("everything achievable needs no query") {
  QueryMdp q(3, {0b111});
  CHECK(q.absorbing(q.start()));
  const QuerySolution sol = solve_query_mdp(q);
  CHECK(sol.at(q.start()).action == kNoAction);
  CHECK(sol.value(q.start()) == doctest::Approx(500.0));
  CHECK(expected_query_cost(strategy_from_solution(sol)) == 0.0);
}

TEST_CASE("one unachievable candidate takes exactly one query") {
  QueryMdp q(1, {0});
  CHECK_FALSE(q.absorbing(q.start()));
  const auto t = q.transitions(q.start(), 0);
  REQUIRE(t.size() == 2);
  CHECK(q.status(t[0].first) == QueryStatus::kUnachievable);
  CHECK(q.status(t[1].first) == QueryStatus::kAchievable);
  CHECK(q.transitions(t[0].first, 0).size() == 1);  // absorbing: self-loop
  CHECK(q.reward(q.start()) == -1000.0);
  CHECK(q.terminal_reward(t[0].first) == 0.0);
  CHECK(expected_query_cost(strategy_from_solution(solve_query_mdp(q))) == doctest::Approx(1.0));
}

TEST_CASE("parameters are validated") {
  CHECK_THROWS_AS(QueryMdp(2, {3}, {1.0, 0.5, 1.0, 0.1}), std::invalid_argument);
  CHECK_THROWS_AS(QueryMdp(2, {3}, {-1.0, 1.0, 1.0, 0.1}), std::invalid_argument);
  CHECK_THROWS_AS(QueryMdp(2, {4}), std::invalid_argument);
}

TEST_CASE("solved policy is optimal over all adaptive query trees") {
  std::mt19937_64 rng(77);
  for (int i = 0; i < 200; ++i) {
    const std::size_t n = 1 + i % 4;
    const auto sets = random_antichain(rng, n, 0);
    QueryMdp q(n, sets);
    const QuerySolution sol = solve_query_mdp(q);
    const double best = oracle::min_expected_queries(n, [&](std::uint32_t m) { return in_family(sets, m); });
    CHECK(sol.at(q.start()).expected_queries == doctest::Approx(best).epsilon(1e-9));
    const double strategic = expected_query_cost(strategy_from_solution(sol));
    CHECK(strategic == doctest::Approx(best).epsilon(1e-9));
    CHECK(strategic <= expected_query_cost(query_all_baseline(n, sets)) + 1e-12);
  }
}

TEST_CASE("terminal rewards follow start values and stay below the query cost") {
  // Implied sets {0} and {1}: start values 0.2 and 0.7.
  QueryMdp q(2, {0b01, 0b10}, {}, [](CandidateMask m) { return m == 0b01 ? 0.2 : 0.7; });
  const QueryState only0{0b01, 0b10};
  const QueryState only1{0, 0b01};
  CHECK(q.terminal_reward(only1) > q.terminal_reward(only0));
  CHECK(q.terminal_reward(only1) <= 500.0);
  CHECK(q.terminal_reward(only0) > 0.0);
  // Querying b1 first ends in the better set more often, at equal count.
  const QuerySolution sol = solve_query_mdp(q);
  CHECK(sol.at(q.start()).expected_queries == doctest::Approx(1.5));
  CHECK(sol.at(q.start()).action == 0);
}

TEST_CASE("scaling the start values never changes the query count") {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int i = 0; i < 60; ++i) {
    const std::size_t n = 2 + i % 3;
    const auto sets = random_antichain(rng, n, 0);
    std::vector<double> score(1u << n);
    for (double& s : score) s = u(rng);
    QueryMdp plain(n, sets);
    QueryMdp a(n, sets, {}, [&](CandidateMask m) { return score[m]; });
    QueryMdp b(n, sets, {}, [&](CandidateMask m) { return 3.0 * score[m]; });
    const double base = solve_query_mdp(plain).at({}).expected_queries;
    CHECK(solve_query_mdp(a).at({}).expected_queries == doctest::Approx(base));
    CHECK(solve_query_mdp(b).at({}).expected_queries == doctest::Approx(base));
  }
}

TEST_CASE("query-all counts") {
  CHECK(expected_query_cost(query_all_baseline(3, {0b111})) == doctest::Approx(3.0));
  const AchievableFamily f = synthetic(4, {0b1101});  // candidate 1 unachievable
  SimulatedOracle oracle({101, 103});
  const QueryStrategy qa = query_all_baseline(f);
  QueryState q;
  std::size_t asked = 0;
  while (auto b = qa(q)) {
    (oracle.ask(f.candidates[*b]) ? q.known_in : q.known_out) |= 1u << *b;
    ++asked;
  }
  CHECK(asked == 2);
  CHECK(classify(q, f.maximal_sets, 0b1111) == QueryStatus::kUnachievable);
}

TEST_CASE("meta-policy special cases") {
  // No unachievable candidates: identical to the pruned policy.
  const AchievableFamily f = synthetic(2, {0b01, 0b10});
  const PrunedQuery pruned = build_pruned_query_mdp(f);
  CHECK(pruned.kept == std::vector<std::size_t>{0, 1});
  const QueryStrategy meta = make_strategic_strategy(f);
  CHECK(expected_query_cost(meta) == doctest::Approx(1.5));

  // Everything unachievable, family {∅}: stops at the first "yes".
  const AchievableFamily g = synthetic(3, {0});
  const QueryStrategy all = make_strategic_strategy(g);
  CHECK(all({}) == std::optional<std::size_t>{0});
  CHECK(all({0b001, 0}) == std::nullopt);
  CHECK(all({0, 0b001}) == std::optional<std::size_t>{1});
  CHECK(all({0, 0b111}) == std::nullopt);
  CHECK(expected_query_cost(all) == doctest::Approx(1.0 + 0.5 + 0.25));
}

TEST_CASE("meta-policy matches the optimum of the full query problem") {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 100; ++i) {
    const std::size_t bad = i % 3;
    const std::size_t good = 1 + i % 3;
    const std::size_t n = bad + good;
    const CandidateMask excluded = static_cast<CandidateMask>(((1u << bad) - 1) << good);
    auto sets = random_antichain(rng, n, excluded);
    const AchievableFamily f = synthetic(n, sets);
    QueryMdp full(n, sets);
    const double optimum = solve_query_mdp(full).at({}).expected_queries;
    CHECK(expected_query_cost(make_strategic_strategy(f)) == doctest::Approx(optimum).epsilon(1e-9));
    CHECK(optimum == doctest::Approx(oracle::min_expected_queries(n, [&](std::uint32_t m) { return in_family(sets, m); })));
  }
}

TEST_CASE("sessions on a real model") {
  const auto fam = find_maximal_achievable_subsets(fork_model(), {1, 2});
  REQUIRE(fam.maximal_sets.size() == 2);
  const QueryStrategy strategic = make_strategic_strategy(fam);

  SimulatedOracle none({});
  const SessionOutcome a = run_session(strategic, none, fam);
  CHECK(a.result == SessionResult::kPolicyFound);
  CHECK(a.queries_asked == 1);
  CHECK(a.final_subgoals == std::vector<StateId>{2});
  REQUIRE(a.plan);
  CHECK(verify_achievement(a.plan->product, a.plan->policy));

  SimulatedOracle both({1, 2});
  const SessionOutcome b = run_session(strategic, both, fam);
  CHECK(b.result == SessionResult::kProvenInfeasible);
  CHECK(b.transcript == std::vector<std::pair<StateId, bool>>{{1, true}, {2, true}});

  SimulatedOracle tight({1, 2}, 1);
  const SessionOutcome c = run_session(strategic, tight, fam);
  CHECK(c.result == SessionResult::kBudgetExceeded);
  CHECK(c.queries_asked == 1);
}

TEST_CASE("sessions end soundly for every ground truth") {
  std::mt19937_64 rng(40);
  for (int i = 0; i < 40; ++i) {
    const GoalMdp m = oracle::random_mdp(rng, 8, 3, 2, i % 2 == 0);
    std::vector<StateId> cands;
    for (StateId s = 1; s + 1 < m.num_states(); ++s) cands.push_back(s);
    std::shuffle(cands.begin(), cands.end(), rng);
    cands.resize(3);
    const auto fam = find_maximal_achievable_subsets(m, cands);
    for (CandidateMask t = 0; t < 8; ++t) {
      std::vector<StateId> truth;
      for (std::size_t k = 0; k < 3; ++k) {
        if (t & (1u << k)) truth.push_back(cands[k]);
      }
      for (const QueryStrategy& s : {make_strategic_strategy(fam), query_all_baseline(fam)}) {
        SimulatedOracle o(truth);
        const SessionOutcome out = run_session(s, o, fam);
        if (out.result == SessionResult::kPolicyFound) {
          CHECK(verify_achievement(m, out.plan->policy, out.final_subgoals));
          const SubgoalMask req = out.plan->product.mask_of(truth);
          CHECK(verify_achievement(out.plan->product, out.plan->policy, req));
        } else {
          CHECK(out.result == SessionResult::kProvenInfeasible);
          CHECK_FALSE(oracle::achievable_by_game(m, truth));
        }
      }
    }
  }
}

TEST_CASE("interactive oracle prompts and re-asks") {
  std::istringstream in("maybe\n Y\nn\n");
  std::ostringstream out;
  InteractiveOracle o(in, out, [](StateId s) { return "(" + std::to_string(s) + ",0)"; });
  CHECK(o.ask(2));
  CHECK_FALSE(o.ask(3));
  CHECK(out.str().find("Is state (2,0) one of your required waypoints? [y/n]") != std::string::npos);
  CHECK(out.str().find("Please answer y or n.") != std::string::npos);
  CHECK(o.queries() == 2);
  CHECK_THROWS(o.ask(4));  // input exhausted
}
