#include "isg/model_io.hpp"

#include <bit>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace isg {

nlohmann::json model_to_json(const GoalMdp& mdp) {
  nlohmann::json doc;
  doc["num_states"] = mdp.num_states();
  doc["num_actions"] = mdp.num_actions();
  doc["initial_state"] = mdp.initial_state();
  doc["gamma"] = mdp.gamma();
  doc["goal_reward"] = mdp.goal_reward();
  doc["goal_states"] = mdp.goal_states();
  auto transitions = nlohmann::json::array();
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    if (mdp.is_goal(s)) continue;
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      for (const Outcome& o : mdp.outcomes(s, a)) transitions.push_back({s, a, o.next, o.probability});
    }
  }
  doc["transitions"] = std::move(transitions);
  if (mdp.has_overlay()) doc["reward_overlay"] = mdp.reward_overlay();
  if (!mdp.labels().empty()) doc["labels"] = mdp.labels();
  return doc;
}

GoalMdp model_from_json(const nlohmann::json& doc) {
  try {
    GoalMdpBuilder builder(doc.at("num_states").get<std::size_t>(), doc.at("num_actions").get<std::size_t>());
    for (const auto& t : doc.at("transitions")) {
      if (!t.is_array() || t.size() != 4) throw std::invalid_argument("transition entries are [state, action, next, p]");
      builder.add_transition(t[0].get<StateId>(), t[1].get<ActionId>(), t[2].get<StateId>(), t[3].get<double>());
    }
    for (const auto& g : doc.at("goal_states")) builder.add_goal(g.get<StateId>());
    builder.set_initial_state(doc.value("initial_state", StateId{0}));
    builder.set_gamma(doc.value("gamma", 0.95));
    builder.set_goal_reward(doc.value("goal_reward", 1.0));
    if (doc.contains("reward_overlay")) {
      const auto overlay = doc["reward_overlay"].get<std::vector<double>>();
      for (StateId s = 0; s < overlay.size(); ++s) builder.set_overlay(s, overlay[s]);
    }
    if (doc.contains("labels")) builder.set_labels(doc["labels"].get<std::vector<std::string>>());
    return builder.build();
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("malformed model document: ") + e.what());
  }
}

GoalMdp load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file " + path);
  nlohmann::json doc;
  try {
    in >> doc;
  } catch (const nlohmann::json::parse_error& e) {
    throw std::invalid_argument("model file " + path + " is not valid JSON: " + e.what());
  }
  return model_from_json(doc);
}

void save_model(const GoalMdp& mdp, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file " + path);
  out << model_to_json(mdp).dump(1) << '\n';
}

std::uint64_t model_fingerprint(const GoalMdp& mdp) {
  std::uint64_t h = 1469598103934665603ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int i = 0; i < 8; ++i) {
      h ^= (v >> (i * 8)) & 0xFFu;
      h *= 1099511628211ULL;
    }
  };
  auto mix_double = [&](double d) { mix(std::bit_cast<std::uint64_t>(d)); };
  mix(mdp.num_states());
  mix(mdp.num_actions());
  mix(mdp.initial_state());
  mix_double(mdp.gamma());
  mix_double(mdp.goal_reward());
  for (StateId g : mdp.goal_states()) mix(g);
  for (StateId s = 0; s < mdp.num_states(); ++s) {
    for (ActionId a = 0; a < mdp.num_actions(); ++a) {
      mix(0xA5A5A5A5ULL);
      for (const Outcome& o : mdp.outcomes(s, a)) {
        mix(o.next);
        mix_double(o.probability);
      }
    }
  }
  for (double v : mdp.reward_overlay()) mix_double(v);
  return h;
}

}  // namespace isg
