#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "isg/mdp.hpp"

namespace isg {

// Document layout:
//   {"num_states": N, "num_actions": A, "initial_state": s0, "gamma": g,
//    "goal_states": [...], "transitions": [[s, a, next, p], ...],
//    "goal_reward": r?, "reward_overlay": [...]?, "labels": [...]?}
nlohmann::json model_to_json(const GoalMdp& mdp);
GoalMdp model_from_json(const nlohmann::json& doc);

GoalMdp load_model(const std::string& path);
void save_model(const GoalMdp& mdp, const std::string& path);

/// FNV-1a over the model's structure and the bit patterns of its numbers.
std::uint64_t model_fingerprint(const GoalMdp& mdp);

}  // namespace isg
