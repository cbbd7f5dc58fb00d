#include "isg/bottleneck.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <stdexcept>

namespace isg {

namespace {

// Breadth-first search over the deterministic graph from s0, never entering
// `blocked` (pass num_states for none). Returns whether a goal other than the
// blocked state is reached.
bool goal_reachable_avoiding(const DeterminizedMdp& dmdp, StateId blocked) {
  const GoalMdp& m = dmdp.model();
  const StateId start = m.initial_state();
  if (start == blocked) return false;
  std::vector<std::uint8_t> seen(m.num_states(), 0);
  std::deque<StateId> frontier{start};
  seen[start] = 1;
  while (!frontier.empty()) {
    const StateId s = frontier.front();
    frontier.pop_front();
    if (m.is_goal(s)) return true;
    for (StateId t : dmdp.successors()[s]) {
      if (t != blocked && !seen[t]) {
        seen[t] = 1;
        frontier.push_back(t);
      }
    }
  }
  return false;
}

double optimal_start_value(const GoalMdp& base, double reward, StateId penalised, double penalty) {
  GoalMdp::Parts parts = base.parts();
  parts.goal_reward = reward;
  parts.reward_overlay.assign(base.num_states(), 0.0);
  if (penalised < base.num_states()) parts.reward_overlay[penalised] = penalty;
  const GoalMdp modified(std::move(parts));
  SolverOptions options;
  options.reachable_only = true;
  return value_iteration(modified, options).values[modified.initial_state()];
}

}  // namespace

BottleneckVerdict is_bottleneck_graph_oracle(const DeterminizedMdp& dmdp, StateId target) {
  const StateId none = dmdp.model().num_states();
  if (target >= none) throw std::invalid_argument("target state out of range");
  if (!goal_reachable_avoiding(dmdp, none)) return BottleneckVerdict::kNoGoalPath;
  return goal_reachable_avoiding(dmdp, target) ? BottleneckVerdict::kNotBottleneck : BottleneckVerdict::kBottleneck;
}

BottleneckVerdict is_bottleneck_avoid_test(const DeterminizedMdp& dmdp, StateId target, const AvoidTestParams& params) {
  const GoalMdp& m = dmdp.model();
  if (target >= m.num_states()) throw std::invalid_argument("target state out of range");
  if (!(params.penalty < 0.0 && params.reward > 0.0 && std::abs(params.penalty) >= 1e3 * params.reward)) {
    throw std::invalid_argument("avoid test needs penalty < 0 < reward with |penalty| >= 1e3 * reward");
  }
  // Without the penalty V*(s0) > 0 exactly when some goal is reachable.
  if (!(optimal_start_value(m, params.reward, m.num_states(), 0.0) > 0.0)) return BottleneckVerdict::kNoGoalPath;
  if (target == m.initial_state()) return BottleneckVerdict::kBottleneck;
  const double v = optimal_start_value(m, params.reward, target, params.penalty);
  return v > 0.0 ? BottleneckVerdict::kNotBottleneck : BottleneckVerdict::kBottleneck;
}

BottleneckReport find_bottlenecks(const DeterminizedMdp& dmdp, BottleneckMethod method) {
  const GoalMdp& m = dmdp.model();
  BottleneckReport report;
  const StateId none = m.num_states();
  if (!goal_reachable_avoiding(dmdp, none)) {
    report.feasible = false;
    return report;
  }
  // Only states on some s0 -> goal path can be bottlenecks.
  const auto forward = reachable_mask(m, m.initial_state());
  for (StateId s = 0; s < m.num_states(); ++s) {
    if (!forward[s]) continue;
    if (s == m.initial_state() || m.is_goal(s)) {
      report.bottlenecks.push_back(s);
      continue;
    }
    const BottleneckVerdict v = method == BottleneckMethod::kGraphRemoval ? is_bottleneck_graph_oracle(dmdp, s)
                                                                          : is_bottleneck_avoid_test(dmdp, s);
    if (v == BottleneckVerdict::kBottleneck) report.bottlenecks.push_back(s);
  }
  return report;
}

BottleneckReport find_bottlenecks(const GoalMdp& model, BottleneckMethod method) {
  return find_bottlenecks(determinize(model), method);
}

std::vector<StateId> strip_trivial(const GoalMdp& model, const std::vector<StateId>& bottlenecks) {
  std::vector<StateId> out;
  for (StateId s : bottlenecks) {
    if (s != model.initial_state() && !model.is_goal(s)) out.push_back(s);
  }
  return out;
}

bool BottleneckHypothesis::all_infeasible() const {
  return std::none_of(feasible.begin(), feasible.end(), [](bool f) { return f; });
}

BottleneckHypothesis build_hypothesis_set(const std::vector<GoalMdp>& human_models) {
  BottleneckHypothesis h;
  std::vector<std::size_t> representative;
  const auto distinct = determinize_model_set(human_models, representative);
  h.distinct_models = distinct.size();

  std::vector<BottleneckReport> reports;
  reports.reserve(distinct.size());
  for (const auto& d : distinct) reports.push_back(find_bottlenecks(d));

  for (std::size_t i = 0; i < human_models.size(); ++i) {
    const BottleneckReport& r = reports[representative[i]];
    h.feasible.push_back(r.feasible);
    h.per_model.push_back(r.bottlenecks);
    if (!r.feasible) h.warnings.push_back("human model " + std::to_string(i) + " cannot reach the goal; ignored");
    h.union_set.insert(h.union_set.end(), r.bottlenecks.begin(), r.bottlenecks.end());
  }
  std::sort(h.union_set.begin(), h.union_set.end());
  h.union_set.erase(std::unique(h.union_set.begin(), h.union_set.end()), h.union_set.end());
  if (!human_models.empty()) h.candidates = strip_trivial(human_models.front(), h.union_set);
  if (!human_models.empty() && h.all_infeasible()) h.warnings.push_back("no human model reaches the goal; no candidates");
  return h;
}

}  // namespace isg
