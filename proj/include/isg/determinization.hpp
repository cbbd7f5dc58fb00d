#pragma once

#include <vector>

#include "isg/mdp.hpp"

namespace isg {

/// Source of a deterministic action: the original action and the rank of the
/// outcome among that action's successors (ordered by successor index).
struct DeterministicAction {
  ActionId original_action;
  std::size_t outcome_rank;

  bool operator==(const DeterministicAction&) const = default;
};

/// All-outcome determinization of a GoalMdp. Every nonzero outcome of every
/// (state, action) pair of the source becomes its own action with a single
/// successor. States, s0, gamma, goals, overlay and labels are carried over.
class DeterminizedMdp {
 public:
  DeterminizedMdp(GoalMdp model, std::vector<std::vector<DeterministicAction>> provenance);

  const GoalMdp& model() const { return model_; }
  /// Provenance of deterministic action `a` at state `s`.
  const DeterministicAction& origin(StateId s, ActionId a) const { return provenance_[s][a]; }
  std::size_t num_actions(StateId s) const { return provenance_[s].size(); }
  StateId successor(StateId s, ActionId a) const { return model_.outcomes(s, a).front().next; }

  /// Distinct successors of each state, sorted.
  const std::vector<std::vector<StateId>>& successors() const { return successors_; }

 private:
  GoalMdp model_;
  std::vector<std::vector<DeterministicAction>> provenance_;
  std::vector<std::vector<StateId>> successors_;
};

DeterminizedMdp determinize(const GoalMdp& mdp);

/// Determinizes every model and merges those with identical deterministic
/// edge sets. Throws std::invalid_argument when the models do not share the
/// state/action skeleton (state count, action count, s0, goals).
std::vector<DeterminizedMdp> determinize_model_set(const std::vector<GoalMdp>& models);

/// Same as determinize_model_set, also reporting for each input model the
/// index of its representative in the returned list.
std::vector<DeterminizedMdp> determinize_model_set(const std::vector<GoalMdp>& models,
                                                   std::vector<std::size_t>& representative);

/// Canonical identity of a determinized model: sorted unique (state, successor) edges.
std::vector<std::pair<StateId, StateId>> edge_key(const DeterminizedMdp& dmdp);

}  // namespace isg
