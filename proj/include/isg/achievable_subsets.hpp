#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

#include "isg/determinization.hpp"
#include "isg/mdp.hpp"
#include "isg/subgoal_planning.hpp"

namespace isg {

/// Subset of the candidate list; bit i stands for candidates[i].
using CandidateMask = std::uint32_t;

/// Necessary condition for achievability: some s0 -> goal walk in the
/// determinized model visits every state of `subset`.
bool path_pretest(const DeterminizedMdp& robot, std::span<const StateId> subset);

/// Memoised achievability of candidate subsets in the robot model.
class AchievabilityChecker {
 public:
  struct Stats {
    std::size_t solver_calls = 0;
    std::size_t pretest_rejections = 0;
    std::size_t pruned_supersets = 0;
    std::size_t implied_subsets = 0;
    std::size_t cache_hits = 0;
  };

  AchievabilityChecker(GoalMdp robot, std::vector<StateId> candidates, SolverOptions options = {});

  const GoalMdp& robot() const { return robot_; }
  const DeterminizedMdp& determinized() const { return determinized_; }
  const std::vector<StateId>& candidates() const { return candidates_; }
  std::vector<StateId> states_of(CandidateMask subset) const;

  /// Order: cache, known unachievable subset, known achievable superset,
  /// path pre-test, then the subgoal planner.
  bool check(CandidateMask subset);
  /// Start value of the subgoal-product optimum; throws if unachievable.
  double start_value(CandidateMask subset);
  /// Fresh plan for an achievable subset.
  std::optional<SubgoalPlan> plan(CandidateMask subset) const;

  const Stats& stats() const { return stats_; }

 private:
  struct Entry {
    bool achievable = false;
    std::optional<double> start_value;
  };

  void record_unachievable(CandidateMask subset);

  GoalMdp robot_;
  DeterminizedMdp determinized_;
  std::vector<StateId> candidates_;
  SolverOptions options_;
  std::unordered_map<CandidateMask, Entry> cache_;
  std::vector<CandidateMask> minimal_unachievable_;
  std::vector<CandidateMask> achievable_;
  Stats stats_;
};

struct AchievableFamily {
  std::vector<StateId> candidates;
  std::vector<CandidateMask> maximal_sets;        // canonical order, antichain
  CandidateMask unachievable_singletons = 0;      // B^0
  bool robot_feasible = true;
  std::shared_ptr<AchievabilityChecker> checker;  // shared cache

  std::vector<std::vector<StateId>> maximal_state_sets() const;
  /// Whether `subset` lies inside some maximal set.
  bool contains(CandidateMask subset) const;
};

struct SubsetSearchOptions {
  std::size_t max_candidates = kDefaultMaxSubgoals;
  SolverOptions solver;
};

/// Maximal achievable subsets of `candidates` in the robot model: a singleton
/// pass first, then include/exclude depth-first search with pruning of
/// supersets of unachievable sets and greedy confirmation of maximality.
AchievableFamily find_maximal_achievable_subsets(const GoalMdp& robot, std::vector<StateId> candidates,
                                                 const SubsetSearchOptions& options = {});
AchievableFamily find_maximal_achievable_subsets(std::shared_ptr<AchievabilityChecker> checker,
                                                 std::size_t max_candidates = kDefaultMaxSubgoals);

/// Canonical order of subsets: by their sorted element indices, lexicographically.
bool canonical_less(CandidateMask a, CandidateMask b);

}  // namespace isg
