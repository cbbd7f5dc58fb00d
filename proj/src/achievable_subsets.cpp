#include "isg/achievable_subsets.hpp"

#include <algorithm>
#include <bit>
#include <deque>
#include <stdexcept>
#include <string>

namespace isg {

bool path_pretest(const DeterminizedMdp& robot, std::span<const StateId> subset) {
  const GoalMdp& m = robot.model();
  const std::size_t n = m.num_states();
  if (subset.size() > kMaxSubgoals) throw std::invalid_argument("subset too large for the path pre-test");
  std::vector<SubgoalMask> bit(n, 0);
  for (std::size_t i = 0; i < subset.size(); ++i) bit.at(subset[i]) |= SubgoalMask{1} << i;
  const SubgoalMask full = static_cast<SubgoalMask>((std::uint64_t{1} << subset.size()) - 1);

  // Breadth-first search over (state, visited-mask) pairs.
  std::vector<std::uint8_t> seen(n << subset.size(), 0);
  const auto key = [n](StateId s, SubgoalMask mask) { return static_cast<std::size_t>(mask) * n + s; };
  const StateId s0 = m.initial_state();
  std::deque<std::pair<StateId, SubgoalMask>> frontier{{s0, bit[s0]}};
  seen[key(s0, bit[s0])] = 1;
  while (!frontier.empty()) {
    const auto [s, mask] = frontier.front();
    frontier.pop_front();
    if (m.is_goal(s)) {
      if (mask == full) return true;
      continue;
    }
    for (StateId t : robot.successors()[s]) {
      const SubgoalMask next = mask | bit[t];
      if (!seen[key(t, next)]) {
        seen[key(t, next)] = 1;
        frontier.emplace_back(t, next);
      }
    }
  }
  return false;
}

AchievabilityChecker::AchievabilityChecker(GoalMdp robot, std::vector<StateId> candidates, SolverOptions options)
    : robot_(std::move(robot)),
      determinized_(determinize(robot_)),
      candidates_(std::move(candidates)),
      options_(options) {
  if (candidates_.size() > kMaxSubgoals) throw std::invalid_argument("too many candidates");
}

std::vector<StateId> AchievabilityChecker::states_of(CandidateMask subset) const {
  std::vector<StateId> out;
  for (std::size_t i = 0; i < candidates_.size(); ++i) {
    if (subset & (CandidateMask{1} << i)) out.push_back(candidates_[i]);
  }
  return out;
}

void AchievabilityChecker::record_unachievable(CandidateMask subset) {
  cache_[subset] = Entry{false, std::nullopt};
  std::erase_if(minimal_unachievable_, [subset](CandidateMask u) { return (u & subset) == subset; });
  minimal_unachievable_.push_back(subset);
}

bool AchievabilityChecker::check(CandidateMask subset) {
  if (const auto it = cache_.find(subset); it != cache_.end()) {
    ++stats_.cache_hits;
    return it->second.achievable;
  }
  for (CandidateMask u : minimal_unachievable_) {
    if ((u & subset) == u) {
      ++stats_.pruned_supersets;
      cache_[subset] = Entry{false, std::nullopt};
      return false;
    }
  }
  for (CandidateMask a : achievable_) {
    if ((subset & a) == subset) {
      ++stats_.implied_subsets;
      cache_[subset] = Entry{true, std::nullopt};
      return true;
    }
  }
  const auto states = states_of(subset);
  if (!path_pretest(determinized_, states)) {
    ++stats_.pretest_rejections;
    record_unachievable(subset);
    return false;
  }
  ++stats_.solver_calls;
  const auto plan = plan_for_subgoals(robot_, states, options_);
  if (!plan) {
    record_unachievable(subset);
    return false;
  }
  cache_[subset] = Entry{true, plan->start_value};
  std::erase_if(achievable_, [subset](CandidateMask a) { return (a & subset) == a; });
  achievable_.push_back(subset);
  return true;
}

double AchievabilityChecker::start_value(CandidateMask subset) {
  if (!check(subset)) throw std::invalid_argument("start value requested for an unachievable subset");
  Entry& entry = cache_[subset];
  if (!entry.start_value) {
    ++stats_.solver_calls;
    const auto p = plan_for_subgoals(robot_, states_of(subset), options_);
    if (!p) throw std::logic_error("subset implied achievable but the planner found no policy");
    entry.start_value = p->start_value;
  }
  return *entry.start_value;
}

std::optional<SubgoalPlan> AchievabilityChecker::plan(CandidateMask subset) const {
  return plan_for_subgoals(robot_, states_of(subset), options_);
}

std::vector<std::vector<StateId>> AchievableFamily::maximal_state_sets() const {
  std::vector<std::vector<StateId>> out;
  for (CandidateMask m : maximal_sets) {
    std::vector<StateId> states;
    for (std::size_t i = 0; i < candidates.size(); ++i) {
      if (m & (CandidateMask{1} << i)) states.push_back(candidates[i]);
    }
    out.push_back(std::move(states));
  }
  return out;
}

bool AchievableFamily::contains(CandidateMask subset) const {
  return std::any_of(maximal_sets.begin(), maximal_sets.end(),
                     [subset](CandidateMask m) { return (subset & m) == subset; });
}

bool canonical_less(CandidateMask a, CandidateMask b) {
  while (a != 0 && b != 0) {
    const int ia = std::countr_zero(a);
    const int ib = std::countr_zero(b);
    if (ia != ib) return ia < ib;
    a &= a - 1;
    b &= b - 1;
  }
  return a == 0 && b != 0;
}

namespace {

class MaximalSubsetSearch {
 public:
  MaximalSubsetSearch(AchievabilityChecker& checker, CandidateMask excluded)
      : checker_(checker), n_(checker.candidates().size()), excluded_(excluded) {}

  std::vector<CandidateMask> run() {
    generate(0, 0);
    std::sort(found_.begin(), found_.end(), canonical_less);
    found_.erase(std::unique(found_.begin(), found_.end()), found_.end());
    return found_;
  }

 private:
  CandidateMask bit(std::size_t i) const { return CandidateMask{1} << i; }

  CandidateMask remaining_from(std::size_t index) const {
    CandidateMask r = 0;
    for (std::size_t i = index; i < n_; ++i) r |= bit(i);
    return r & ~excluded_;
  }

  // Greedy single-element extension over every candidate; the result is maximal
  // because achievability is downward closed.
  CandidateMask extend(CandidateMask subset) {
    for (std::size_t i = 0; i < n_; ++i) {
      if ((subset & bit(i)) || (excluded_ & bit(i))) continue;
      if (checker_.check(subset | bit(i))) subset |= bit(i);
    }
    return subset;
  }

  void generate(std::size_t index, CandidateMask current) {
    if (!checker_.check(current)) return;
    const CandidateMask rest = remaining_from(index);
    if (index == n_ || rest == 0 || checker_.check(current | rest)) {
      found_.push_back(extend(current | rest));
      return;
    }
    if (!(excluded_ & bit(index))) generate(index + 1, current | bit(index));
    generate(index + 1, current);
  }

  AchievabilityChecker& checker_;
  std::size_t n_;
  CandidateMask excluded_;
  std::vector<CandidateMask> found_;
};

}  // namespace

AchievableFamily find_maximal_achievable_subsets(std::shared_ptr<AchievabilityChecker> checker,
                                                 std::size_t max_candidates) {
  AchievableFamily family;
  family.candidates = checker->candidates();
  family.checker = checker;
  if (family.candidates.size() > max_candidates) {
    throw std::invalid_argument("candidate count " + std::to_string(family.candidates.size()) + " exceeds the limit " +
                                std::to_string(max_candidates));
  }
  if (!checker->check(0)) {
    family.robot_feasible = false;
    return family;
  }
  for (std::size_t i = 0; i < family.candidates.size(); ++i) {
    if (!checker->check(CandidateMask{1} << i)) family.unachievable_singletons |= CandidateMask{1} << i;
  }
  family.maximal_sets = MaximalSubsetSearch(*checker, family.unachievable_singletons).run();
  return family;
}

AchievableFamily find_maximal_achievable_subsets(const GoalMdp& robot, std::vector<StateId> candidates,
                                                 const SubsetSearchOptions& options) {
  if (candidates.size() > options.max_candidates) {
    throw std::invalid_argument("candidate count " + std::to_string(candidates.size()) + " exceeds the limit " +
                                std::to_string(options.max_candidates));
  }
  auto checker = std::make_shared<AchievabilityChecker>(robot, std::move(candidates), options.solver);
  return find_maximal_achievable_subsets(std::move(checker), options.max_candidates);
}

}  // namespace isg
