#include "isg/determinization.hpp"

#include <algorithm>
#include <map>
#include <stdexcept>

namespace isg {

DeterminizedMdp::DeterminizedMdp(GoalMdp model, std::vector<std::vector<DeterministicAction>> provenance)
    : model_(std::move(model)), provenance_(std::move(provenance)), successors_(model_.num_states()) {
  for (StateId s = 0; s < model_.num_states(); ++s) {
    auto& succ = successors_[s];
    for (ActionId a = 0; a < model_.num_actions(); ++a) {
      const auto outs = model_.outcomes(s, a);
      if (outs.size() > 1 || (!outs.empty() && outs.front().probability != 1.0)) {
        throw std::invalid_argument("determinized model has a stochastic action");
      }
      if (!outs.empty()) succ.push_back(outs.front().next);
    }
    std::sort(succ.begin(), succ.end());
    succ.erase(std::unique(succ.begin(), succ.end()), succ.end());
  }
}

DeterminizedMdp determinize(const GoalMdp& mdp) {
  const std::size_t n = mdp.num_states();
  std::vector<std::vector<DeterministicAction>> provenance(n);
  std::vector<std::vector<StateId>> targets(n);
  std::size_t width = 1;
  for (StateId s = 0; s < n; ++s) {
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      // Outcomes are stored sorted by successor, so position is the rank.
      const auto outs = mdp.outcomes(s, a);
      for (std::size_t rank = 0; rank < outs.size(); ++rank) {
        provenance[s].push_back({a, rank});
        targets[s].push_back(outs[rank].next);
      }
    }
    width = std::max(width, provenance[s].size());
  }

  GoalMdp::Parts parts;
  parts.num_states = n;
  parts.num_actions = width;
  parts.rows.offsets.reserve(n * width + 1);
  parts.rows.offsets.push_back(0);
  for (StateId s = 0; s < n; ++s) {
    for (std::size_t a = 0; a < width; ++a) {
      if (a < targets[s].size()) parts.rows.outcomes.push_back({targets[s][a], 1.0});
      parts.rows.offsets.push_back(parts.rows.outcomes.size());
    }
  }
  parts.initial_state = mdp.initial_state();
  parts.gamma = mdp.gamma();
  parts.goal_reward = mdp.goal_reward();
  parts.goal_states = mdp.goal_states();
  parts.reward_overlay = mdp.reward_overlay();
  parts.labels = mdp.labels();
  return DeterminizedMdp(GoalMdp(std::move(parts)), std::move(provenance));
}

std::vector<std::pair<StateId, StateId>> edge_key(const DeterminizedMdp& dmdp) {
  std::vector<std::pair<StateId, StateId>> edges;
  const auto& succ = dmdp.successors();
  for (StateId s = 0; s < succ.size(); ++s) {
    for (StateId t : succ[s]) edges.emplace_back(s, t);
  }
  return edges;
}

std::vector<DeterminizedMdp> determinize_model_set(const std::vector<GoalMdp>& models,
                                                   std::vector<std::size_t>& representative) {
  representative.clear();
  std::vector<DeterminizedMdp> out;
  if (models.empty()) return out;
  const GoalMdp& first = models.front();
  std::map<std::vector<std::pair<StateId, StateId>>, std::size_t> seen;
  for (const GoalMdp& m : models) {
    if (m.num_states() != first.num_states() || m.num_actions() != first.num_actions() ||
        m.initial_state() != first.initial_state() || m.goal_states() != first.goal_states()) {
      throw std::invalid_argument("models do not share the same state/action skeleton");
    }
    DeterminizedMdp d = determinize(m);
    auto key = edge_key(d);
    auto [it, inserted] = seen.emplace(std::move(key), out.size());
    if (inserted) out.push_back(std::move(d));
    representative.push_back(it->second);
  }
  return out;
}

std::vector<DeterminizedMdp> determinize_model_set(const std::vector<GoalMdp>& models) {
  std::vector<std::size_t> ignored;
  return determinize_model_set(models, ignored);
}

}  // namespace isg
