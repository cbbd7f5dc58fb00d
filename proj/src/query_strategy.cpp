#include "isg/query_strategy.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <deque>
#include <istream>
#include <ostream>
#include <stdexcept>
#include <unordered_set>

namespace isg {

namespace {

CandidateMask full_mask(std::size_t n) {
  if (n > 31) throw std::invalid_argument("too many query candidates");
  return static_cast<CandidateMask>((std::uint64_t{1} << n) - 1);
}

CandidateMask bit(std::size_t i) { return CandidateMask{1} << i; }

// Relative comparison used to break ties in the expected query count.
bool nearly_equal(double a, double b) { return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace

QueryStatus classify(const QueryState& q, const std::vector<CandidateMask>& maximal_sets, CandidateMask all) {
  const CandidateMask implied = implied_subgoals(q, all);
  bool in_some = false;
  for (CandidateMask m : maximal_sets) {
    if ((implied & m) == implied) return QueryStatus::kAchievable;
    if ((q.known_in & m) == q.known_in) in_some = true;
  }
  return in_some ? QueryStatus::kOpen : QueryStatus::kUnachievable;
}

QueryMdp::QueryMdp(std::size_t num_candidates, std::vector<CandidateMask> maximal_sets, QueryParams params,
                   StartValueFn start_value)
    : num_candidates_(num_candidates),
      all_(full_mask(num_candidates)),
      maximal_sets_(std::move(maximal_sets)),
      params_(params),
      start_value_(std::move(start_value)) {
  if (!(params_.query_cost < 0.0)) throw std::invalid_argument("query cost must be negative");
  if (!(params_.prior > 0.0 && params_.prior < 1.0)) throw std::invalid_argument("prior must lie in (0,1)");
  if (!(params_.gamma > 0.0 && params_.gamma <= 1.0)) throw std::invalid_argument("gamma must lie in (0,1]");
  if (!(params_.min_reward_fraction > 0.0 && params_.min_reward_fraction <= 1.0)) {
    throw std::invalid_argument("min_reward_fraction must lie in (0,1]");
  }
  for (CandidateMask m : maximal_sets_) {
    if (m & ~all_) throw std::invalid_argument("maximal set outside the candidate range");
  }
}

std::vector<std::pair<QueryState, double>> QueryMdp::transitions(const QueryState& q, std::size_t b) const {
  if (b >= num_candidates_) throw std::out_of_range("query candidate out of range");
  if (absorbing(q) || (q.classified() & bit(b))) return {{q, 1.0}};
  return {{QueryState{q.known_in | bit(b), q.known_out}, params_.prior},
          {QueryState{q.known_in, q.known_out | bit(b)}, 1.0 - params_.prior}};
}

void QueryMdp::expand() {
  if (expanded_) return;
  std::unordered_set<QueryState, QueryStateHash> seen{start()};
  std::deque<QueryState> frontier{start()};
  while (!frontier.empty()) {
    const QueryState q = frontier.front();
    frontier.pop_front();
    states_.push_back(q);
    if (absorbing(q)) continue;
    for (std::size_t b = 0; b < num_candidates_; ++b) {
      if (q.classified() & bit(b)) continue;
      for (const auto& [next, p] : transitions(q, b)) {
        if (seen.insert(next).second) frontier.push_back(next);
      }
    }
  }
  expanded_ = true;
  scale_rewards();
}

// Affine map of the start values of achievable implied sets into
// [fraction * 0.5|C|, 0.5|C|], preserving their order.
void QueryMdp::scale_rewards() {
  const double top = 0.5 * std::abs(params_.query_cost);
  const double bottom = params_.min_reward_fraction * top;
  std::unordered_map<CandidateMask, double> raw;
  for (const QueryState& q : states_) {
    if (status(q) != QueryStatus::kAchievable) continue;
    const CandidateMask implied = implied_subgoals(q, all_);
    if (!raw.contains(implied)) raw[implied] = start_value_ ? start_value_(implied) : 0.0;
  }
  if (raw.empty()) return;
  double lo = raw.begin()->second;
  double hi = lo;
  for (const auto& [m, v] : raw) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  for (const auto& [m, v] : raw) p_by_implied_[m] = hi > lo ? bottom + (top - bottom) * (v - lo) / (hi - lo) : top;
}

const std::vector<QueryState>& QueryMdp::states() {
  expand();
  return states_;
}

double QueryMdp::terminal_reward(const QueryState& q) {
  expand();
  if (status(q) != QueryStatus::kAchievable) return 0.0;
  const CandidateMask implied = implied_subgoals(q, all_);
  if (const auto it = p_by_implied_.find(implied); it != p_by_implied_.end()) return it->second;
  throw std::out_of_range("terminal reward requested for an unreachable query state");
}

double QueryMdp::reward(const QueryState& q) { return absorbing(q) ? terminal_reward(q) : params_.query_cost; }

double QuerySolution::value(const QueryState& q) const {
  const Entry& e = at(q);
  return query_cost * e.expected_queries + e.expected_terminal;
}

QuerySolution solve_query_mdp(QueryMdp& qmdp) {
  QuerySolution solution;
  solution.query_cost = qmdp.params().query_cost;
  const double gamma = qmdp.params().gamma;
  // Every query classifies one more candidate, so the reachable graph is
  // acyclic and ordering by classified count gives a valid backward pass.
  std::vector<QueryState> order = qmdp.states();
  std::stable_sort(order.begin(), order.end(), [](const QueryState& a, const QueryState& b) {
    return std::popcount(a.classified()) > std::popcount(b.classified());
  });
  for (const QueryState& q : order) {
    QuerySolution::Entry entry;
    if (qmdp.absorbing(q)) {
      entry.expected_terminal = qmdp.terminal_reward(q);
      solution.table.emplace(q, entry);
      continue;
    }
    bool have = false;
    for (std::size_t b = 0; b < qmdp.num_candidates(); ++b) {
      if (q.classified() & bit(b)) continue;
      double count = 1.0;
      double terminal = 0.0;
      for (const auto& [next, p] : qmdp.transitions(q, b)) {
        const auto& e = solution.table.at(next);
        count += gamma * p * e.expected_queries;
        terminal += gamma * p * e.expected_terminal;
      }
      const bool better = !have || (nearly_equal(count, entry.expected_queries)
                                        ? terminal > entry.expected_terminal + 1e-12
                                        : count < entry.expected_queries);
      if (better) {
        entry = {b, count, terminal};
        have = true;
      }
    }
    solution.table.emplace(q, entry);
  }
  return solution;
}

QueryStrategy strategy_from_solution(QuerySolution solution) {
  return [solution = std::move(solution)](const QueryState& q) -> std::optional<std::size_t> {
    const auto it = solution.table.find(q);
    if (it == solution.table.end()) throw std::out_of_range("query state outside the solved policy");
    if (it->second.action == kNoAction) return std::nullopt;
    return it->second.action;
  };
}

PrunedQuery build_pruned_query_mdp(const AchievableFamily& family, const QueryParams& params) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < family.candidates.size(); ++i) {
    if (!(family.unachievable_singletons & bit(i))) kept.push_back(i);
  }
  const auto project = [&kept](CandidateMask full) {
    CandidateMask out = 0;
    for (std::size_t j = 0; j < kept.size(); ++j) {
      if (full & bit(kept[j])) out |= bit(j);
    }
    return out;
  };
  const auto lift = [kept](CandidateMask pruned) {
    CandidateMask out = 0;
    for (std::size_t j = 0; j < kept.size(); ++j) {
      if (pruned & bit(j)) out |= bit(kept[j]);
    }
    return out;
  };
  std::vector<CandidateMask> sets;
  for (CandidateMask m : family.maximal_sets) sets.push_back(project(m));
  QueryMdp::StartValueFn score;
  if (family.checker) {
    score = [checker = family.checker, lift](CandidateMask pruned) { return checker->start_value(lift(pruned)); };
  }
  return PrunedQuery{kept, QueryMdp(kept.size(), std::move(sets), params, std::move(score))};
}

QueryStrategy build_meta_policy(const AchievableFamily& family, const std::vector<std::size_t>& kept,
                                QuerySolution pruned_solution) {
  const CandidateMask all = full_mask(family.candidates.size());
  return [all, kept, sets = family.maximal_sets, unachievable = family.unachievable_singletons,
          solution = std::move(pruned_solution)](const QueryState& q) -> std::optional<std::size_t> {
    if (classify(q, sets, all) != QueryStatus::kOpen) return std::nullopt;
    const CandidateMask pending = unachievable & ~q.classified();
    if (pending != 0) return static_cast<std::size_t>(std::countr_zero(pending));
    QueryState projected;
    for (std::size_t j = 0; j < kept.size(); ++j) {
      if (q.known_in & bit(kept[j])) projected.known_in |= bit(j);
      if (q.known_out & bit(kept[j])) projected.known_out |= bit(j);
    }
    const auto it = solution.table.find(projected);
    if (it == solution.table.end() || it->second.action == kNoAction) {
      throw std::logic_error("pruned query policy undefined on an open state");
    }
    return kept[it->second.action];
  };
}

QueryStrategy make_strategic_strategy(const AchievableFamily& family, const QueryParams& params) {
  PrunedQuery pruned = build_pruned_query_mdp(family, params);
  return build_meta_policy(family, pruned.kept, solve_query_mdp(pruned.mdp));
}

QueryStrategy query_all_baseline(std::size_t num_candidates, std::vector<CandidateMask> maximal_sets) {
  const CandidateMask all = full_mask(num_candidates);
  return [all, sets = std::move(maximal_sets)](const QueryState& q) -> std::optional<std::size_t> {
    const CandidateMask pending = all & ~q.classified();
    if (pending == 0 || classify(q, sets, all) == QueryStatus::kUnachievable) return std::nullopt;
    return static_cast<std::size_t>(std::countr_zero(pending));
  };
}

QueryStrategy query_all_baseline(const AchievableFamily& family) {
  return query_all_baseline(family.candidates.size(), family.maximal_sets);
}

double expected_query_cost(const QueryStrategy& strategy, const QueryState& start, double prior) {
  std::unordered_map<QueryState, double, QueryStateHash> memo;
  const std::function<double(const QueryState&)> cost = [&](const QueryState& q) -> double {
    if (const auto it = memo.find(q); it != memo.end()) return it->second;
    const auto b = strategy(q);
    double c = 0.0;
    if (b) {
      if (q.classified() & bit(*b)) throw std::logic_error("strategy repeats a classified candidate");
      c = 1.0 + prior * cost({q.known_in | bit(*b), q.known_out}) +
          (1.0 - prior) * cost({q.known_in, q.known_out | bit(*b)});
    }
    memo.emplace(q, c);
    return c;
  };
  return cost(start);
}

bool Oracle::ask(StateId s) {
  if (exhausted()) throw std::runtime_error("query budget exhausted");
  ++queries_;
  return answer(s);
}

SimulatedOracle::SimulatedOracle(std::vector<StateId> truth, std::optional<std::size_t> budget)
    : Oracle(budget), truth_(std::move(truth)) {
  std::sort(truth_.begin(), truth_.end());
}

bool SimulatedOracle::answer(StateId s) { return std::binary_search(truth_.begin(), truth_.end(), s); }

InteractiveOracle::InteractiveOracle(std::istream& in, std::ostream& out, Describe describe,
                                     std::optional<std::size_t> budget)
    : Oracle(budget), in_(in), out_(out), describe_(std::move(describe)) {}

bool InteractiveOracle::answer(StateId s) {
  for (;;) {
    out_ << "Is state " << describe_(s) << " one of your required waypoints? [y/n] " << std::flush;
    std::string line;
    if (!std::getline(in_, line)) throw std::runtime_error("no answer on input");
    const auto first = line.find_first_not_of(" \t\r");
    if (first != std::string::npos) {
      const char c = static_cast<char>(std::tolower(static_cast<unsigned char>(line[first])));
      if (c == 'y') return true;
      if (c == 'n') return false;
    }
    out_ << "Please answer y or n.\n";
  }
}

std::string to_string(SessionResult r) {
  switch (r) {
    case SessionResult::kPolicyFound: return "policy_found";
    case SessionResult::kProvenInfeasible: return "proven_infeasible";
    case SessionResult::kBudgetExceeded: return "budget_exceeded";
  }
  return "unknown";
}

SessionOutcome run_session(const QueryStrategy& strategy, Oracle& oracle, const AchievableFamily& family) {
  const CandidateMask all = full_mask(family.candidates.size());
  SessionOutcome out;
  QueryState& q = out.final_state;
  for (;;) {
    const auto b = strategy(q);
    if (!b) break;
    if (*b >= family.candidates.size() || (q.classified() & bit(*b))) {
      throw std::logic_error("strategy chose an invalid query");
    }
    if (oracle.exhausted()) {
      out.result = SessionResult::kBudgetExceeded;
      return out;
    }
    const StateId s = family.candidates[*b];
    const bool yes = oracle.ask(s);
    ++out.queries_asked;
    out.transcript.emplace_back(s, yes);
    (yes ? q.known_in : q.known_out) |= bit(*b);
  }
  switch (classify(q, family.maximal_sets, all)) {
    case QueryStatus::kUnachievable:
      out.result = SessionResult::kProvenInfeasible;
      return out;
    case QueryStatus::kOpen:
      throw std::logic_error("strategy stopped before the query state was resolved");
    case QueryStatus::kAchievable:
      break;
  }
  const CandidateMask implied = implied_subgoals(q, all);
  for (std::size_t i = 0; i < family.candidates.size(); ++i) {
    if (implied & bit(i)) out.final_subgoals.push_back(family.candidates[i]);
  }
  out.plan = family.checker ? family.checker->plan(implied) : std::nullopt;
  if (!out.plan) throw std::logic_error("implied subgoal set has no plan although the family contains it");
  out.result = SessionResult::kPolicyFound;
  return out;
}

}  // namespace isg
