#include "isg/mdp.hpp"

#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <deque>
#include <sstream>

namespace isg {

namespace {

std::string state_name(const GoalMdp& mdp, StateId s) {
  std::ostringstream os;
  os << s;
  if (!mdp.labels().empty()) os << " " << mdp.labels()[s];
  return os.str();
}

// Expected one-step return of (s, a) given the current value estimate.
double q_value(const GoalMdp& mdp, StateId s, ActionId a, const std::vector<double>& values) {
  double q = 0.0;
  for (const Outcome& o : mdp.outcomes(s, a)) {
    q += o.probability * (mdp.transition_reward(s, o.next) + mdp.gamma() * values[o.next]);
  }
  return q;
}

bool near_tie(double q, double best) {
  return q >= best - 1e-12 * std::max(1.0, std::abs(best));
}

}  // namespace

GoalMdp::GoalMdp(Parts parts)
    : num_states_(parts.num_states),
      num_actions_(parts.num_actions),
      rows_(std::move(parts.rows)),
      initial_state_(parts.initial_state),
      gamma_(parts.gamma),
      goal_reward_(parts.goal_reward),
      goal_states_(std::move(parts.goal_states)),
      overlay_(std::move(parts.reward_overlay)),
      labels_(std::move(parts.labels)) {
  if (num_states_ == 0 || num_actions_ == 0) throw std::invalid_argument("model needs at least one state and one action");
  if (rows_.offsets.size() != num_states_ * num_actions_ + 1 || rows_.offsets.front() != 0 ||
      rows_.offsets.back() != rows_.outcomes.size()) {
    throw std::invalid_argument("malformed transition rows");
  }
  if (initial_state_ >= num_states_) throw std::invalid_argument("initial state out of range");
  if (!(gamma_ >= 0.0 && gamma_ < 1.0)) throw std::invalid_argument("gamma must lie in [0, 1)");
  if (!std::isfinite(goal_reward_)) throw std::invalid_argument("goal reward must be finite");
  if (goal_states_.empty()) throw std::invalid_argument("model needs at least one goal state");
  if (!overlay_.empty() && overlay_.size() != num_states_) throw std::invalid_argument("overlay size mismatch");
  if (!labels_.empty() && labels_.size() != num_states_) throw std::invalid_argument("label count mismatch");

  std::sort(goal_states_.begin(), goal_states_.end());
  goal_states_.erase(std::unique(goal_states_.begin(), goal_states_.end()), goal_states_.end());
  is_goal_.assign(num_states_, 0);
  for (StateId g : goal_states_) {
    if (g >= num_states_) throw std::invalid_argument("goal state out of range");
    is_goal_[g] = 1;
  }

  for (std::size_t row = 0; row + 1 < rows_.offsets.size(); ++row) {
    const std::size_t begin = rows_.offsets[row];
    const std::size_t end = rows_.offsets[row + 1];
    if (end < begin) throw std::invalid_argument("malformed transition rows");
    if (begin == end) continue;
    const StateId s = row / num_actions_;
    double sum = 0.0;
    for (std::size_t i = begin; i < end; ++i) {
      const Outcome& o = rows_.outcomes[i];
      if (o.next >= num_states_) throw std::invalid_argument("transition target out of range at state " + std::to_string(s));
      if (!(o.probability >= kMinProbability)) {
        throw std::invalid_argument("transition probability below threshold at state " + std::to_string(s));
      }
      sum += o.probability;
    }
    if (std::abs(sum - 1.0) > kProbabilitySumTolerance) {
      throw std::invalid_argument("outgoing probabilities of state " + std::to_string(s) + " action " +
                                  std::to_string(row % num_actions_) + " sum to " + std::to_string(sum));
    }
    if (is_goal_[s] && (end - begin != 1 || rows_.outcomes[begin].next != s)) {
      throw std::invalid_argument("goal state " + std::to_string(s) + " is not absorbing");
    }
  }
}

bool GoalMdp::has_available_action(StateId s) const {
  const std::size_t row = s * num_actions_;
  return rows_.offsets[row + num_actions_] != rows_.offsets[row];
}

std::string GoalMdp::label(StateId s) const {
  return labels_.empty() ? std::to_string(s) : labels_[s];
}

GoalMdp::Parts GoalMdp::parts() const {
  Parts p;
  p.num_states = num_states_;
  p.num_actions = num_actions_;
  p.rows = rows_;
  p.initial_state = initial_state_;
  p.gamma = gamma_;
  p.goal_reward = goal_reward_;
  p.goal_states = goal_states_;
  p.reward_overlay = overlay_;
  p.labels = labels_;
  return p;
}

GoalMdpBuilder::GoalMdpBuilder(std::size_t num_states, std::size_t num_actions)
    : num_states_(num_states), num_actions_(num_actions), rows_(num_states * num_actions) {}

GoalMdpBuilder& GoalMdpBuilder::add_transition(StateId s, ActionId a, StateId next, double probability) {
  if (s >= num_states_ || next >= num_states_ || a >= num_actions_) {
    throw std::invalid_argument("transition index out of range");
  }
  auto& row = rows_[s * num_actions_ + a];
  for (Outcome& o : row) {
    if (o.next == next) {
      o.probability += probability;
      return *this;
    }
  }
  row.push_back({next, probability});
  return *this;
}

GoalMdpBuilder& GoalMdpBuilder::add_goal(StateId s) {
  if (s >= num_states_) throw std::invalid_argument("goal state out of range");
  goals_.push_back(s);
  for (ActionId a = 0; a < num_actions_; ++a) rows_[s * num_actions_ + a] = {{s, 1.0}};
  return *this;
}

GoalMdpBuilder& GoalMdpBuilder::set_initial_state(StateId s) {
  initial_state_ = s;
  return *this;
}

GoalMdpBuilder& GoalMdpBuilder::set_gamma(double gamma) {
  gamma_ = gamma;
  return *this;
}

GoalMdpBuilder& GoalMdpBuilder::set_goal_reward(double reward) {
  goal_reward_ = reward;
  return *this;
}

GoalMdpBuilder& GoalMdpBuilder::set_overlay(StateId s, double value) {
  if (s >= num_states_) throw std::invalid_argument("overlay state out of range");
  if (overlay_.empty()) overlay_.assign(num_states_, 0.0);
  overlay_[s] = value;
  return *this;
}

GoalMdpBuilder& GoalMdpBuilder::set_labels(std::vector<std::string> labels) {
  labels_ = std::move(labels);
  return *this;
}

GoalMdp GoalMdpBuilder::build() const {
  GoalMdp::Parts p;
  p.num_states = num_states_;
  p.num_actions = num_actions_;
  p.rows.offsets.reserve(rows_.size() + 1);
  p.rows.offsets.push_back(0);
  for (const auto& row : rows_) {
    std::vector<Outcome> sorted = row;
    std::sort(sorted.begin(), sorted.end(), [](const Outcome& x, const Outcome& y) { return x.next < y.next; });
    p.rows.outcomes.insert(p.rows.outcomes.end(), sorted.begin(), sorted.end());
    p.rows.offsets.push_back(p.rows.outcomes.size());
  }
  p.initial_state = initial_state_;
  p.gamma = gamma_;
  p.goal_reward = goal_reward_;
  p.goal_states = goals_;
  p.reward_overlay = overlay_;
  p.labels = labels_;
  return GoalMdp(std::move(p));
}

std::vector<std::uint8_t> reachable_mask(const GoalMdp& mdp, StateId from, const Policy* policy) {
  std::vector<std::uint8_t> seen(mdp.num_states(), 0);
  std::deque<StateId> frontier{from};
  seen[from] = 1;
  auto visit = [&](StateId s, ActionId a) {
    for (const Outcome& o : mdp.outcomes(s, a)) {
      if (!seen[o.next]) {
        seen[o.next] = 1;
        frontier.push_back(o.next);
      }
    }
  };
  while (!frontier.empty()) {
    const StateId s = frontier.front();
    frontier.pop_front();
    if (policy) {
      if (policy->defined(s)) visit(s, (*policy)(s));
    } else {
      for (ActionId a = 0; a < mdp.num_actions(); ++a) visit(s, a);
    }
  }
  return seen;
}

std::vector<StateId> reachable_states(const GoalMdp& mdp, const Policy* policy) {
  const auto seen = reachable_mask(mdp, mdp.initial_state(), policy);
  std::vector<StateId> out;
  for (StateId s = 0; s < seen.size(); ++s) {
    if (seen[s]) out.push_back(s);
  }
  return out;
}

Policy value_iteration(const GoalMdp& mdp, const SolverOptions& options) {
  if (!(options.tolerance > 0.0)) throw std::invalid_argument("tolerance must be positive");

  std::vector<StateId> order;
  if (options.reachable_only) {
    order = reachable_states(mdp);
  } else {
    order.resize(mdp.num_states());
    for (StateId s = 0; s < order.size(); ++s) order[s] = s;
  }
  std::erase_if(order, [&](StateId s) { return mdp.is_goal(s) || !mdp.has_available_action(s); });

  Policy policy;
  policy.values.assign(mdp.num_states(), 0.0);
  policy.action_for.assign(mdp.num_states(), kNoAction);
  auto& values = policy.values;

  double residual = 0.0;
  std::size_t iteration = 0;
  bool converged = order.empty();
  while (!converged && iteration < options.max_iterations) {
    ++iteration;
    residual = 0.0;
    for (StateId s : order) {
      double best = -std::numeric_limits<double>::infinity();
      for (ActionId a = 0; a < mdp.num_actions(); ++a) {
        if (mdp.available(s, a)) best = std::max(best, q_value(mdp, s, a, values));
      }
      residual = std::max(residual, std::abs(best - values[s]));
      values[s] = best;
    }
    converged = residual < options.tolerance;
  }
  if (!converged) {
    throw ConvergenceError("value iteration did not converge in " + std::to_string(options.max_iterations) +
                               " iterations (residual " + std::to_string(residual) + ")",
                           residual);
  }
  policy.iterations = iteration;
  policy.residual = residual;

  for (StateId s : order) {
    double best = -std::numeric_limits<double>::infinity();
    std::vector<double> q(mdp.num_actions(), -std::numeric_limits<double>::infinity());
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      if (mdp.available(s, a)) {
        q[a] = q_value(mdp, s, a, values);
        best = std::max(best, q[a]);
      }
    }
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      if (mdp.available(s, a) && near_tie(q[a], best)) {
        policy.action_for[s] = a;
        break;
      }
    }
  }
  // Goal states keep their first self-loop so the policy is total where it matters.
  for (StateId g : mdp.goal_states()) {
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      if (mdp.available(g, a)) {
        policy.action_for[g] = a;
        break;
      }
    }
  }
  return policy;
}

std::vector<double> evaluate_policy(const GoalMdp& mdp, const Policy& policy, double tolerance) {
  if (policy.action_for.size() != mdp.num_states()) throw std::invalid_argument("policy size does not match model");

  std::vector<std::uint8_t> relevant = reachable_mask(mdp, mdp.initial_state(), &policy);
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (policy.defined(s) && !relevant[s]) {
      const auto more = reachable_mask(mdp, s, &policy);
      for (StateId t = 0; t < more.size(); ++t) relevant[t] |= more[t];
    }
  }

  std::vector<StateId> order;
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (!relevant[s] || mdp.is_goal(s) || !mdp.has_available_action(s)) continue;
    if (!policy.defined(s) || !mdp.available(s, policy(s))) {
      throw std::invalid_argument("policy has no valid action at reachable state " + state_name(mdp, s));
    }
    order.push_back(s);
  }

  std::vector<double> values(mdp.num_states(), 0.0);
  constexpr std::size_t kMaxSweeps = 10000000;
  for (std::size_t sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double residual = 0.0;
    for (StateId s : order) {
      const double v = q_value(mdp, s, policy(s), values);
      residual = std::max(residual, std::abs(v - values[s]));
      values[s] = v;
    }
    if (residual < tolerance) return values;
  }
  throw ConvergenceError("policy evaluation did not converge", tolerance);
}

std::vector<double> absorption_probabilities(const GoalMdp& mdp, const Policy& policy,
                                             const std::vector<std::uint8_t>& targets) {
  const std::size_t n = mdp.num_states();
  if (targets.size() != n || policy.action_for.size() != n) throw std::invalid_argument("size mismatch");

  // Reverse edges of the policy's support graph, excluding the targets' own moves.
  std::vector<std::vector<StateId>> parents(n);
  for (StateId s = 0; s < n; ++s) {
    if (targets[s] || !policy.defined(s)) continue;
    for (const Outcome& o : mdp.outcomes(s, policy(s))) parents[o.next].push_back(s);
  }
  std::vector<std::uint8_t> can_reach(n, 0);
  std::deque<StateId> frontier;
  for (StateId s = 0; s < n; ++s) {
    if (targets[s]) {
      can_reach[s] = 1;
      frontier.push_back(s);
    }
  }
  while (!frontier.empty()) {
    const StateId s = frontier.front();
    frontier.pop_front();
    for (StateId p : parents[s]) {
      if (!can_reach[p]) {
        can_reach[p] = 1;
        frontier.push_back(p);
      }
    }
  }

  std::vector<std::ptrdiff_t> index(n, -1);
  std::vector<StateId> transient;
  for (StateId s = 0; s < n; ++s) {
    if (can_reach[s] && !targets[s]) {
      index[s] = static_cast<std::ptrdiff_t>(transient.size());
      transient.push_back(s);
    }
  }

  std::vector<double> prob(n, 0.0);
  for (StateId s = 0; s < n; ++s) prob[s] = targets[s] ? 1.0 : 0.0;
  if (transient.empty()) return prob;

  const auto m = static_cast<Eigen::Index>(transient.size());
  std::vector<Eigen::Triplet<double>> entries;
  Eigen::VectorXd rhs = Eigen::VectorXd::Zero(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const StateId s = transient[static_cast<std::size_t>(i)];
    entries.emplace_back(i, i, 1.0);
    for (const Outcome& o : mdp.outcomes(s, policy(s))) {
      if (targets[o.next]) {
        rhs[i] += o.probability;
      } else if (index[o.next] >= 0) {
        entries.emplace_back(i, index[o.next], -o.probability);
      }
    }
  }
  Eigen::SparseMatrix<double> system(m, m);
  system.setFromTriplets(entries.begin(), entries.end());
  Eigen::SparseLU<Eigen::SparseMatrix<double>> solver;
  solver.compute(system);
  if (solver.info() != Eigen::Success) throw std::runtime_error("absorption system is singular");
  const Eigen::VectorXd x = solver.solve(rhs);
  for (Eigen::Index i = 0; i < m; ++i) {
    prob[transient[static_cast<std::size_t>(i)]] = std::clamp(x[i], 0.0, 1.0);
  }
  return prob;
}

double goal_reach_probability(const GoalMdp& mdp, const Policy& policy, StateId state) {
  const auto reach = reachable_mask(mdp, state, &policy);
  for (StateId s = 0; s < reach.size(); ++s) {
    if (reach[s] && !mdp.is_goal(s) && mdp.has_available_action(s) && !policy.defined(s)) {
      throw std::invalid_argument("policy has no action at reachable state " + state_name(mdp, s));
    }
  }
  std::vector<std::uint8_t> targets(mdp.num_states(), 0);
  for (StateId g : mdp.goal_states()) targets[g] = 1;
  return absorption_probabilities(mdp, policy, targets)[state];
}

double trace_probability(const GoalMdp& mdp, const Trace& trace) {
  double p = 1.0;
  for (std::size_t i = 0; i + 1 < trace.steps.size(); ++i) {
    const auto [s, a] = trace.steps[i];
    const StateId next = trace.steps[i + 1].first;
    if (a == kNoAction || a >= mdp.num_actions()) return 0.0;
    double step = 0.0;
    for (const Outcome& o : mdp.outcomes(s, a)) {
      if (o.next == next) step = o.probability;
    }
    p *= step;
    if (p == 0.0) return 0.0;
  }
  return p;
}

}  // namespace isg
