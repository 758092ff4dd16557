#include "sqil/scenario.hpp"

#include <filesystem>
#include <fstream>

#include <json.hpp>

namespace sqil {
namespace {

using nlohmann::json;

InitDist init_from_json(const json& j, const char* field) {
  InitDist init;
  for (const auto& entry : j) {
    if (!entry.is_array() || entry.size() != 2)
      throw ConfigError(std::string(field) + ": entries must be [cell, probability] pairs");
    init.support.emplace_back(entry[0].get<int>(), entry[1].get<double>());
  }
  return init;
}

json init_to_json(const InitDist& init) {
  json j = json::array();
  for (const auto& [cell, prob] : init.support) j.push_back(json::array({cell, prob}));
  return j;
}

GridNavConfig config_from_json(const json& j) {
  GridNavConfig cfg;
  cfg.width = j.at("width").get<int>();
  cfg.height = j.at("height").get<int>();
  for (int c : j.value("goals", std::vector<int>{})) cfg.goal_cells.insert(c);
  for (int c : j.value("hazards", std::vector<int>{})) cfg.hazard_cells.insert(c);
  for (int c : j.value("walls", std::vector<int>{})) cfg.walls.insert(c);
  cfg.slip_prob = j.value("slip_prob", 0.0);
  cfg.step_limit = j.at("step_limit").get<int>();
  cfg.goal_reward = j.value("goal_reward", 100.0);
  cfg.step_reward = j.value("step_reward", -1.0);
  cfg.hazard_reward = j.value("hazard_reward", -100.0);
  cfg.demo_init = init_from_json(j.at("demo_init"), "demo_init");
  cfg.train_init = init_from_json(j.at("train_init"), "train_init");
  return cfg;
}

}  // namespace

GridNavConfig preset_scenario(const std::string& name) {
  // Shared 5x5 layout (cell = y*5 + x, y up): goal in the bottom-right corner,
  // demonstrations start bottom-left, and a hazard row at y=2 leaves a single
  // safe passage down column 0.
  GridNavConfig cfg;
  cfg.width = 5;
  cfg.height = 5;
  cfg.goal_cells = {4};
  cfg.hazard_cells = {11, 12, 13, 14};
  cfg.slip_prob = 0.1;
  cfg.step_limit = 30;
  cfg.goal_reward = 100.0;
  cfg.step_reward = -1.0;
  cfg.hazard_reward = -100.0;
  cfg.demo_init.support = {{0, 1.0}};
  if (name == "shifted-start") {
    cfg.train_init.support = {{24, 1.0}};  // top-right corner, unseen in demos
    return cfg;
  }
  if (name == "matched-start") {
    cfg.train_init = cfg.demo_init;
    return cfg;
  }
  throw ConfigError("unknown scenario preset: " + name);
}

std::vector<std::string> preset_names() { return {"shifted-start", "matched-start"}; }

GridNavConfig load_scenario_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario file: " + path);
  json j;
  try {
    in >> j;
    return config_from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError("invalid scenario file " + path + ": " + e.what());
  }
}

void save_scenario_file(const GridNavConfig& cfg, const std::string& name,
                        const std::string& path) {
  json j;
  j["name"] = name;
  j["width"] = cfg.width;
  j["height"] = cfg.height;
  j["goals"] = cfg.goal_cells;
  j["hazards"] = cfg.hazard_cells;
  j["walls"] = cfg.walls;
  j["slip_prob"] = cfg.slip_prob;
  j["step_limit"] = cfg.step_limit;
  j["goal_reward"] = cfg.goal_reward;
  j["step_reward"] = cfg.step_reward;
  j["hazard_reward"] = cfg.hazard_reward;
  j["demo_init"] = init_to_json(cfg.demo_init);
  j["train_init"] = init_to_json(cfg.train_init);
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write scenario file: " + path);
  out << j.dump(2) << '\n';
}

GridNavConfig resolve_scenario(const std::string& name_or_path) {
  for (const std::string& preset : preset_names())
    if (name_or_path == preset) return preset_scenario(name_or_path);
  if (!std::filesystem::exists(name_or_path))
    throw ConfigError("scenario not found (no such preset or file): " + name_or_path);
  return load_scenario_file(name_or_path);
}

}  // namespace sqil
