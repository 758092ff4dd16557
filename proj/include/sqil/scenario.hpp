#pragma once

#include <string>
#include <vector>

#include "sqil/gridnav.hpp"

namespace sqil {

// Built-in scenario presets:
//   shifted-start  5x5 grid whose training episodes start in the corner
//                  opposite the demonstrated one, behind a hazard row
//   matched-start  same grid with identical demo/train starts
GridNavConfig preset_scenario(const std::string& name);
std::vector<std::string> preset_names();

// JSON scenario files; schema documented in the README.
GridNavConfig load_scenario_file(const std::string& path);
void save_scenario_file(const GridNavConfig& config, const std::string& name,
                        const std::string& path);

// Accepts a preset name or a path to a scenario file.
GridNavConfig resolve_scenario(const std::string& name_or_path);

}  // namespace sqil
