#pragma once

#include <string>
#include <vector>

#include "isg/determinization.hpp"
#include "isg/mdp.hpp"

namespace isg {

enum class BottleneckVerdict { kBottleneck, kNotBottleneck, kNoGoalPath };

struct AvoidTestParams {
  double penalty = -1e6;  // reward for entering the tested state
  double reward = 1.0;    // reward for entering a goal
};

/// Bottleneck test through the modified MDP that penalises entering `target`
/// and rewards goal entry: target is a bottleneck iff V*(s0) <= 0 there.
/// Requires penalty < 0 < reward and |penalty| >= 1e3 * reward.
BottleneckVerdict is_bottleneck_avoid_test(const DeterminizedMdp& dmdp, StateId target,
                                           const AvoidTestParams& params = {});

/// Bottleneck test by deleting `target` and searching for a goal from s0 in
/// the deterministic transition graph.
BottleneckVerdict is_bottleneck_graph_oracle(const DeterminizedMdp& dmdp, StateId target);

enum class BottleneckMethod { kGraphRemoval, kAvoidTest };

struct BottleneckReport {
  std::vector<StateId> bottlenecks;  // sorted; includes s0 and reachable goals
  bool feasible = true;              // false when no goal is reachable from s0
};

BottleneckReport find_bottlenecks(const DeterminizedMdp& dmdp, BottleneckMethod method = BottleneckMethod::kGraphRemoval);
BottleneckReport find_bottlenecks(const GoalMdp& model, BottleneckMethod method = BottleneckMethod::kGraphRemoval);

/// Bottlenecks with s0 and goal states removed.
std::vector<StateId> strip_trivial(const GoalMdp& model, const std::vector<StateId>& bottlenecks);

struct BottleneckHypothesis {
  std::vector<std::vector<StateId>> per_model;  // indexed by input model id
  std::vector<bool> feasible;                   // per input model
  std::vector<StateId> union_set;
  std::vector<StateId> candidates;              // union minus s0 minus goals
  std::size_t distinct_models = 0;              // after determinized deduplication
  std::vector<std::string> warnings;

  bool all_infeasible() const;
};

BottleneckHypothesis build_hypothesis_set(const std::vector<GoalMdp>& human_models);

}  // namespace isg
