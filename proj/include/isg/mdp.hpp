#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace isg {

using StateId = std::size_t;
using ActionId = std::size_t;

inline constexpr ActionId kNoAction = std::numeric_limits<ActionId>::max();

/// Probabilities below this are rejected when a model is built.
inline constexpr double kMinProbability = 1e-12;
/// Allowed deviation of an outgoing distribution from 1.
inline constexpr double kProbabilitySumTolerance = 1e-9;

struct Outcome {
  StateId next;
  double probability;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/**
 * Finite goal-based MDP <S, A, T, s0, gamma, S_G>.
 *
 * Actions form a uniform index set; an action is available in a state iff it
 * has at least one outcome there. Transitions are stored in compressed rows
 * keyed by (state, action). Goal states are absorbing.
 *
 * Rewards are attached to transitions out of non-goal states: entering a goal
 * state pays goal_reward(), and entering any state additionally pays its
 * overlay value when an overlay is present. Transitions out of goal states pay
 * nothing.
 */
class GoalMdp {
 public:
  /// Compressed-row form. offsets has num_states * num_actions + 1 entries.
  struct Rows {
    std::vector<std::size_t> offsets;
    std::vector<Outcome> outcomes;
  };

  struct Parts {
    std::size_t num_states = 0;
    std::size_t num_actions = 0;
    Rows rows;
    StateId initial_state = 0;
    double gamma = 0.95;
    double goal_reward = 1.0;
    std::vector<StateId> goal_states;
    std::vector<double> reward_overlay;  // empty or one value per state
    std::vector<std::string> labels;     // empty or one label per state
  };

  GoalMdp() = default;
  /// Validates every model invariant; throws std::invalid_argument on violation.
  explicit GoalMdp(Parts parts);

  std::size_t num_states() const { return num_states_; }
  std::size_t num_actions() const { return num_actions_; }
  StateId initial_state() const { return initial_state_; }
  double gamma() const { return gamma_; }
  double goal_reward() const { return goal_reward_; }

  bool is_goal(StateId s) const { return is_goal_[s] != 0; }
  const std::vector<StateId>& goal_states() const { return goal_states_; }

  std::span<const Outcome> outcomes(StateId s, ActionId a) const {
    const std::size_t row = s * num_actions_ + a;
    return {rows_.outcomes.data() + rows_.offsets[row], rows_.offsets[row + 1] - rows_.offsets[row]};
  }
  bool available(StateId s, ActionId a) const { return !outcomes(s, a).empty(); }
  bool has_available_action(StateId s) const;
  std::size_t num_transitions() const { return rows_.outcomes.size(); }

  bool has_overlay() const { return !overlay_.empty(); }
  const std::vector<double>& reward_overlay() const { return overlay_; }
  double overlay(StateId s) const { return overlay_.empty() ? 0.0 : overlay_[s]; }

  /// Reward for the transition s -> next under the goal-entry convention.
  double transition_reward(StateId s, StateId next) const {
    if (is_goal(s)) return 0.0;
    return (is_goal(next) ? goal_reward_ : 0.0) + overlay(next);
  }

  const std::vector<std::string>& labels() const { return labels_; }
  /// Label of a state, or its decimal index when the model carries no labels.
  std::string label(StateId s) const;

  /// Copy of the model pieces, for building modified variants.
  Parts parts() const;

 private:
  std::size_t num_states_ = 0;
  std::size_t num_actions_ = 0;
  Rows rows_;
  StateId initial_state_ = 0;
  double gamma_ = 0.95;
  double goal_reward_ = 1.0;
  std::vector<StateId> goal_states_;
  std::vector<std::uint8_t> is_goal_;
  std::vector<double> overlay_;
  std::vector<std::string> labels_;
};

/// Incremental construction of a GoalMdp. Outcomes added twice for the same
/// (state, action, next) are merged by summing their probabilities.
class GoalMdpBuilder {
 public:
  GoalMdpBuilder(std::size_t num_states, std::size_t num_actions);

  GoalMdpBuilder& add_transition(StateId s, ActionId a, StateId next, double probability);
  /// Marks s as a goal and gives every action a self-loop there.
  GoalMdpBuilder& add_goal(StateId s);
  GoalMdpBuilder& set_initial_state(StateId s);
  GoalMdpBuilder& set_gamma(double gamma);
  GoalMdpBuilder& set_goal_reward(double reward);
  GoalMdpBuilder& set_overlay(StateId s, double value);
  GoalMdpBuilder& set_labels(std::vector<std::string> labels);

  GoalMdp build() const;

 private:
  std::size_t num_states_;
  std::size_t num_actions_;
  std::vector<std::vector<Outcome>> rows_;
  std::vector<StateId> goals_;
  StateId initial_state_ = 0;
  double gamma_ = 0.95;
  double goal_reward_ = 1.0;
  std::vector<double> overlay_;
  std::vector<std::string> labels_;
};

/// Deterministic stationary policy with its value function.
struct Policy {
  std::vector<ActionId> action_for;  // kNoAction where undefined
  std::vector<double> values;
  std::size_t iterations = 0;
  double residual = 0.0;

  ActionId operator()(StateId s) const { return action_for[s]; }
  bool defined(StateId s) const { return action_for[s] != kNoAction; }
};

/// A (state, action) sequence; the final step carries kNoAction.
struct Trace {
  std::vector<std::pair<StateId, ActionId>> steps;

  StateId last_state() const { return steps.back().first; }
};

struct SolverOptions {
  double tolerance = 1e-8;
  std::size_t max_iterations = 100000;
  /// Restrict sweeps to states reachable from the initial state.
  bool reachable_only = false;
};

/// Gauss-Seidel value iteration followed by greedy extraction (lowest action
/// index wins ties). Throws ConvergenceError carrying the last residual.
Policy value_iteration(const GoalMdp& mdp, const SolverOptions& options = {});

/// Value of a fixed policy. Throws std::invalid_argument naming the first
/// reachable state that has actions but no policy action.
std::vector<double> evaluate_policy(const GoalMdp& mdp, const Policy& policy, double tolerance = 1e-10);

/// Undiscounted probability of absorption in a target set under a policy.
/// Solved exactly over the transient states that can reach a target.
std::vector<double> absorption_probabilities(const GoalMdp& mdp, const Policy& policy,
                                             const std::vector<std::uint8_t>& targets);

/// P_G(state | policy): probability that the chain started at `state` ends in S_G.
double goal_reach_probability(const GoalMdp& mdp, const Policy& policy, StateId state);

/// States reachable from s0 through nonzero-probability transitions, using the
/// policy's actions when given. Sorted ascending.
std::vector<StateId> reachable_states(const GoalMdp& mdp, const Policy* policy = nullptr);
std::vector<std::uint8_t> reachable_mask(const GoalMdp& mdp, StateId from, const Policy* policy = nullptr);

/// Probability of the trace under the model (policy-independent part); zero if
/// any step is not a transition of the model.
double trace_probability(const GoalMdp& mdp, const Trace& trace);

}  // namespace isg
