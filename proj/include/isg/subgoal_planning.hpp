#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "isg/mdp.hpp"

namespace isg {

using SubgoalMask = std::uint32_t;

/// Default and hard limits on the number of tracked subgoals.
inline constexpr std::size_t kDefaultMaxSubgoals = 16;
inline constexpr std::size_t kMaxSubgoals = 24;

/// Product of a GoalMdp with a visitation bitmask over an ordered subgoal list.
/// Augmented state (s, m) is stored at index m * |S| + s. The bit of a subgoal
/// is set on every transition entering it. Every goal copy is absorbing;
/// entering the fully visited copy pays the goal reward, entering any other
/// copy nets -1.
class SubgoalMdp {
 public:
  SubgoalMdp(GoalMdp product, std::vector<StateId> subgoals, std::size_t base_states);

  const GoalMdp& model() const { return model_; }
  const std::vector<StateId>& subgoals() const { return subgoals_; }
  std::size_t base_states() const { return base_states_; }

  StateId encode(StateId s, SubgoalMask mask) const { return static_cast<StateId>(mask) * base_states_ + s; }
  std::pair<StateId, SubgoalMask> decode(StateId x) const {
    return {x % base_states_, static_cast<SubgoalMask>(x / base_states_)};
  }
  SubgoalMask full_mask() const { return static_cast<SubgoalMask>((std::uint64_t{1} << subgoals_.size()) - 1); }
  StateId start() const { return model_.initial_state(); }
  /// Bits of the given base states; throws if one is not a tracked subgoal.
  SubgoalMask mask_of(std::span<const StateId> states) const;

 private:
  GoalMdp model_;
  std::vector<StateId> subgoals_;
  std::size_t base_states_;
};

/// Throws std::invalid_argument for subgoals outside S, duplicates, or more
/// than kMaxSubgoals entries.
SubgoalMdp build_subgoal_mdp(const GoalMdp& mdp, std::span<const StateId> subgoals);

struct SubgoalPlan {
  SubgoalMdp product;
  Policy policy;
  /// Value of the returned policy at the augmented start under the product's rewards.
  double start_value = 0.0;
  /// True when the reward-shaped optimum failed verification and the policy
  /// came from the safety-restricted solve instead.
  bool from_safe_restriction = false;
};

/**
 * Policy over the augmented states whose every goal-reaching trace visits all
 * subgoals, or nullopt when none exists.
 *
 * The product is solved with its shaped rewards first. If that optimum does
 * not verify, the actions are restricted to those that can never lead into
 * an incompletely visited goal copy and the restricted product is solved for
 * plain goal reachability, which finds a compliant policy whenever one exists.
 */
std::optional<SubgoalPlan> plan_for_subgoals(const GoalMdp& mdp, std::span<const StateId> subgoals,
                                             const SolverOptions& options = {});

/// Reachability check on the policy-restricted product: no goal copy missing a
/// bit of `required` is reachable from the start, and some goal copy is.
bool verify_achievement(const SubgoalMdp& product, const Policy& policy, SubgoalMask required);
bool verify_achievement(const SubgoalMdp& product, const Policy& policy);
/// Rebuilds the product for `subgoals` and checks the full mask.
bool verify_achievement(const GoalMdp& mdp, const Policy& policy, std::span<const StateId> subgoals);

/// Augmented states from which the policy can forever avoid goal copies
/// missing a bit of `required` (the largest such set).
std::vector<std::uint8_t> safe_region(const SubgoalMdp& product, SubgoalMask required);

}  // namespace isg
