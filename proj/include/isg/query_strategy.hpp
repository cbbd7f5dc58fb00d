#pragma once

#include <cstddef>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "isg/achievable_subsets.hpp"
#include "isg/mdp.hpp"
#include "isg/subgoal_planning.hpp"

namespace isg {

/// Classification state (K_I, K_notI); bit i refers to candidate i.
struct QueryState {
  CandidateMask known_in = 0;
  CandidateMask known_out = 0;

  CandidateMask classified() const { return known_in | known_out; }
  bool operator==(const QueryState&) const = default;
};

struct QueryStateHash {
  std::size_t operator()(const QueryState& q) const {
    return std::hash<std::uint64_t>{}((std::uint64_t{q.known_in} << 32) | q.known_out);
  }
};

enum class QueryStatus { kOpen, kAchievable, kUnachievable };

/// Candidates still possibly required: K_I plus every unclassified candidate.
inline CandidateMask implied_subgoals(const QueryState& q, CandidateMask all) { return all & ~q.known_out; }

/// Achievable-absorbing when the implied set lies inside a maximal set,
/// unachievable-absorbing when K_I lies inside none.
QueryStatus classify(const QueryState& q, const std::vector<CandidateMask>& maximal_sets, CandidateMask all);

struct QueryParams {
  double query_cost = -1000.0;  // C^Q
  double prior = 0.5;           // P(candidate is required)
  double gamma = 1.0;
  double min_reward_fraction = 0.1;  // smallest p_I as a fraction of the largest
};

/// Query MDP over a candidate list, expanded lazily from ({}, {}).
class QueryMdp {
 public:
  using StartValueFn = std::function<double(CandidateMask)>;

  /// `start_value` scores an achievable implied set; without it every
  /// achievable terminal pays the same reward.
  QueryMdp(std::size_t num_candidates, std::vector<CandidateMask> maximal_sets, QueryParams params = {},
           StartValueFn start_value = {});

  std::size_t num_candidates() const { return num_candidates_; }
  CandidateMask all() const { return all_; }
  const std::vector<CandidateMask>& maximal_sets() const { return maximal_sets_; }
  const QueryParams& params() const { return params_; }
  QueryState start() const { return {}; }

  QueryStatus status(const QueryState& q) const { return classify(q, maximal_sets_, all_); }
  bool absorbing(const QueryState& q) const { return status(q) != QueryStatus::kOpen; }

  /// Outcomes of querying candidate b: (yes, prior) and (no, 1 - prior); a
  /// single self-loop when b is already classified or q is absorbing.
  std::vector<std::pair<QueryState, double>> transitions(const QueryState& q, std::size_t b) const;
  /// Reward of acting in q: C^Q when open, the terminal reward otherwise.
  double reward(const QueryState& q);
  /// p_I for achievable-absorbing states, 0 for unachievable ones.
  double terminal_reward(const QueryState& q);

  /// States reachable from the start; expands on first call.
  const std::vector<QueryState>& states();

 private:
  void expand();
  void scale_rewards();

  std::size_t num_candidates_;
  CandidateMask all_;
  std::vector<CandidateMask> maximal_sets_;
  QueryParams params_;
  StartValueFn start_value_;
  std::vector<QueryState> states_;
  bool expanded_ = false;
  std::unordered_map<CandidateMask, double> p_by_implied_;
};

/// Optimal query policy: least expected (discounted) number of queries first,
/// then highest expected terminal reward, then lowest candidate index.
struct QuerySolution {
  struct Entry {
    std::size_t action = kNoAction;  // kNoAction on absorbing states
    double expected_queries = 0.0;
    double expected_terminal = 0.0;
  };
  std::unordered_map<QueryState, Entry, QueryStateHash> table;
  double query_cost = 0.0;

  const Entry& at(const QueryState& q) const { return table.at(q); }
  /// C^Q * expected queries + expected terminal reward.
  double value(const QueryState& q) const;
};

QuerySolution solve_query_mdp(QueryMdp& qmdp);

/// Next candidate to query, or nullopt to stop.
using QueryStrategy = std::function<std::optional<std::size_t>(const QueryState&)>;

QueryStrategy strategy_from_solution(QuerySolution solution);

/// Pruned query problem over the robot-achievable candidates.
struct PrunedQuery {
  std::vector<std::size_t> kept;  // pruned index -> full index
  QueryMdp mdp;
};

PrunedQuery build_pruned_query_mdp(const AchievableFamily& family, const QueryParams& params = {});

/// Queries the unclassified unachievable singletons first, in index order, and
/// then follows the pruned policy on the projected state.
QueryStrategy build_meta_policy(const AchievableFamily& family, const std::vector<std::size_t>& kept,
                                QuerySolution pruned_solution);

/// Pruned query MDP, its solution, and the meta-policy in one step.
QueryStrategy make_strategic_strategy(const AchievableFamily& family, const QueryParams& params = {});

/// Queries candidates in index order; stops once all are classified or K_I
/// already rules out every maximal set.
QueryStrategy query_all_baseline(const AchievableFamily& family);
QueryStrategy query_all_baseline(std::size_t num_candidates, std::vector<CandidateMask> maximal_sets);

/// Exact expected number of queries the strategy asks from `start`, with each
/// answer "yes" independently with probability `prior`.
double expected_query_cost(const QueryStrategy& strategy, const QueryState& start = {}, double prior = 0.5);

class Oracle {
 public:
  explicit Oracle(std::optional<std::size_t> budget = 1000) : budget_(budget) {}
  virtual ~Oracle() = default;

  bool ask(StateId s);
  std::size_t queries() const { return queries_; }
  bool exhausted() const { return budget_ && queries_ >= *budget_; }

 protected:
  virtual bool answer(StateId s) = 0;

 private:
  std::optional<std::size_t> budget_;
  std::size_t queries_ = 0;
};

class SimulatedOracle : public Oracle {
 public:
  SimulatedOracle(std::vector<StateId> truth, std::optional<std::size_t> budget = 1000);

 protected:
  bool answer(StateId s) override;

 private:
  std::vector<StateId> truth_;
};

/// Asks on a terminal: "Is state (row,col) one of your required waypoints? [y/n]".
class InteractiveOracle : public Oracle {
 public:
  using Describe = std::function<std::string(StateId)>;
  InteractiveOracle(std::istream& in, std::ostream& out, Describe describe,
                    std::optional<std::size_t> budget = 1000);

 protected:
  bool answer(StateId s) override;

 private:
  std::istream& in_;
  std::ostream& out_;
  Describe describe_;
};

enum class SessionResult { kPolicyFound, kProvenInfeasible, kBudgetExceeded };

std::string to_string(SessionResult r);

struct SessionOutcome {
  SessionResult result = SessionResult::kProvenInfeasible;
  std::size_t queries_asked = 0;
  std::vector<std::pair<StateId, bool>> transcript;
  QueryState final_state;
  std::vector<StateId> final_subgoals;  // implied set planned for
  std::optional<SubgoalPlan> plan;
};

/// Drives the strategy against the oracle until it stops, then plans for the
/// implied subgoal set or reports infeasibility.
SessionOutcome run_session(const QueryStrategy& strategy, Oracle& oracle, const AchievableFamily& family);

}  // namespace isg
