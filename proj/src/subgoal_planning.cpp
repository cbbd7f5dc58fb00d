#include "isg/subgoal_planning.hpp"

#include <algorithm>
#include <deque>
#include <stdexcept>
#include <string>

namespace isg {

SubgoalMdp::SubgoalMdp(GoalMdp product, std::vector<StateId> subgoals, std::size_t base_states)
    : model_(std::move(product)), subgoals_(std::move(subgoals)), base_states_(base_states) {}

SubgoalMask SubgoalMdp::mask_of(std::span<const StateId> states) const {
  SubgoalMask mask = 0;
  for (StateId s : states) {
    const auto it = std::find(subgoals_.begin(), subgoals_.end(), s);
    if (it == subgoals_.end()) throw std::invalid_argument("state " + std::to_string(s) + " is not a tracked subgoal");
    mask |= SubgoalMask{1} << (it - subgoals_.begin());
  }
  return mask;
}

SubgoalMdp build_subgoal_mdp(const GoalMdp& mdp, std::span<const StateId> subgoals) {
  const std::size_t n = mdp.num_states();
  const std::size_t k = subgoals.size();
  if (k > kMaxSubgoals) throw std::invalid_argument("too many subgoals: " + std::to_string(k));
  std::vector<SubgoalMask> bit(n, 0);
  for (std::size_t i = 0; i < k; ++i) {
    if (subgoals[i] >= n) throw std::invalid_argument("subgoal " + std::to_string(subgoals[i]) + " is not a state");
    if (bit[subgoals[i]] != 0) throw std::invalid_argument("duplicate subgoal " + std::to_string(subgoals[i]));
    bit[subgoals[i]] = SubgoalMask{1} << i;
  }
  const std::size_t copies = std::size_t{1} << k;
  const SubgoalMask full = static_cast<SubgoalMask>(copies - 1);

  GoalMdp::Parts parts;
  parts.num_states = n * copies;
  parts.num_actions = mdp.num_actions();
  parts.rows.offsets.reserve(parts.num_states * parts.num_actions + 1);
  parts.rows.outcomes.reserve(mdp.num_transitions() * copies);
  parts.rows.offsets.push_back(0);
  for (std::size_t m = 0; m < copies; ++m) {
    for (StateId s = 0; s < n; ++s) {
      for (ActionId a = 0; a < mdp.num_actions(); ++a) {
        for (const Outcome& o : mdp.outcomes(s, a)) {
          const SubgoalMask next_mask = mdp.is_goal(s) ? static_cast<SubgoalMask>(m)
                                                       : static_cast<SubgoalMask>(m) | bit[o.next];
          parts.rows.outcomes.push_back({static_cast<StateId>(next_mask) * n + o.next, o.probability});
        }
        parts.rows.offsets.push_back(parts.rows.outcomes.size());
      }
    }
  }
  const SubgoalMask start_mask = bit[mdp.initial_state()];
  parts.initial_state = static_cast<StateId>(start_mask) * n + mdp.initial_state();
  parts.gamma = mdp.gamma();
  parts.goal_reward = mdp.goal_reward();
  parts.reward_overlay.assign(parts.num_states, 0.0);
  parts.goal_states.reserve(mdp.goal_states().size() * copies);
  for (std::size_t m = 0; m < copies; ++m) {
    for (StateId s = 0; s < n; ++s) {
      const StateId x = m * n + s;
      if (mdp.is_goal(s)) {
        parts.goal_states.push_back(x);
        parts.reward_overlay[x] = m == full ? mdp.overlay(s) : -1.0 - mdp.goal_reward();
      } else {
        parts.reward_overlay[x] = mdp.overlay(s);
      }
    }
  }
  return SubgoalMdp(GoalMdp(std::move(parts)), std::vector<StateId>(subgoals.begin(), subgoals.end()), n);
}

bool verify_achievement(const SubgoalMdp& product, const Policy& policy, SubgoalMask required) {
  const GoalMdp& m = product.model();
  if (policy.action_for.size() != m.num_states()) throw std::invalid_argument("policy is not over the augmented states");
  std::vector<std::uint8_t> seen(m.num_states(), 0);
  std::deque<StateId> frontier{product.start()};
  seen[product.start()] = 1;
  bool reached_goal = false;
  while (!frontier.empty()) {
    const StateId x = frontier.front();
    frontier.pop_front();
    if (m.is_goal(x)) {
      if ((product.decode(x).second & required) != required) return false;
      reached_goal = true;
      continue;
    }
    if (!m.has_available_action(x)) continue;
    if (!policy.defined(x) || !m.available(x, policy(x))) {
      throw std::invalid_argument("policy has no action at reachable augmented state " + std::to_string(x));
    }
    for (const Outcome& o : m.outcomes(x, policy(x))) {
      if (!seen[o.next]) {
        seen[o.next] = 1;
        frontier.push_back(o.next);
      }
    }
  }
  return reached_goal;
}

bool verify_achievement(const SubgoalMdp& product, const Policy& policy) {
  return verify_achievement(product, policy, product.full_mask());
}

bool verify_achievement(const GoalMdp& mdp, const Policy& policy, std::span<const StateId> subgoals) {
  return verify_achievement(build_subgoal_mdp(mdp, subgoals), policy);
}

std::vector<std::uint8_t> safe_region(const SubgoalMdp& product, SubgoalMask required) {
  const GoalMdp& m = product.model();
  const std::size_t n = m.num_states();
  std::vector<std::uint8_t> safe(n, 1);
  for (StateId g : m.goal_states()) {
    if ((product.decode(g).second & required) != required) safe[g] = 0;
  }
  const auto relevant = reachable_mask(m, product.start());
  bool changed = true;
  while (changed) {
    changed = false;
    for (StateId x = 0; x < n; ++x) {
      if (!safe[x] || !relevant[x] || m.is_goal(x) || !m.has_available_action(x)) continue;
      bool any_safe_action = false;
      for (ActionId a = 0; a < m.num_actions() && !any_safe_action; ++a) {
        const auto outs = m.outcomes(x, a);
        if (outs.empty()) continue;
        any_safe_action = std::all_of(outs.begin(), outs.end(), [&](const Outcome& o) { return safe[o.next] != 0; });
      }
      if (!any_safe_action) {
        safe[x] = 0;
        changed = true;
      }
    }
  }
  return safe;
}

namespace {

// Product restricted to actions whose successors all stay in `safe`, with the
// shaping removed so that a positive start value means the full goal copy is
// reachable.
GoalMdp restrict_to_safe(const GoalMdp& m, const std::vector<std::uint8_t>& safe) {
  GoalMdp::Parts parts = m.parts();
  GoalMdp::Rows rows;
  rows.offsets.reserve(parts.rows.offsets.size());
  rows.offsets.push_back(0);
  for (StateId x = 0; x < m.num_states(); ++x) {
    for (ActionId a = 0; a < m.num_actions(); ++a) {
      const auto outs = m.outcomes(x, a);
      const bool keep = m.is_goal(x) || (safe[x] && std::all_of(outs.begin(), outs.end(), [&](const Outcome& o) {
                                           return safe[o.next] != 0;
                                         }));
      if (keep) rows.outcomes.insert(rows.outcomes.end(), outs.begin(), outs.end());
      rows.offsets.push_back(rows.outcomes.size());
    }
  }
  parts.rows = std::move(rows);
  parts.reward_overlay.clear();
  return GoalMdp(std::move(parts));
}

}  // namespace

std::optional<SubgoalPlan> plan_for_subgoals(const GoalMdp& mdp, std::span<const StateId> subgoals,
                                             const SolverOptions& options) {
  SubgoalMdp product = build_subgoal_mdp(mdp, subgoals);
  SolverOptions solve = options;
  solve.reachable_only = true;

  Policy shaped = value_iteration(product.model(), solve);
  const double shaped_value = shaped.values[product.start()];
  if (shaped_value > 0.0 && verify_achievement(product, shaped)) {
    return SubgoalPlan{std::move(product), std::move(shaped), shaped_value, false};
  }

  const auto safe = safe_region(product, product.full_mask());
  if (!safe[product.start()]) return std::nullopt;
  const GoalMdp restricted = restrict_to_safe(product.model(), safe);
  Policy policy = value_iteration(restricted, solve);
  if (!(policy.values[product.start()] > 0.0)) return std::nullopt;
  if (!verify_achievement(product, policy)) throw std::logic_error("safety-restricted policy failed verification");
  policy.values = evaluate_policy(product.model(), policy);
  const double value = policy.values[product.start()];
  return SubgoalPlan{std::move(product), std::move(policy), value, true};
}

}  // namespace isg
