#pragma once

#include "regs/train/train.hpp"

#include <filesystem>
#include <string>

namespace regs::cli {

// Sections [train], [lr], [weights], [control]; every key is optional and
// unknown keys are rejected. Files ending in .json are read as JSON, all
// others as TOML.
train::TrainConfig config_from_json(const std::string& json_text, train::TrainConfig base);
train::TrainConfig load_config(const std::filesystem::path& path, train::TrainConfig base);

// Full resolved configuration in the layout accepted by config_from_json.
std::string config_to_json(const train::TrainConfig& cfg);

std::string selection_name(control::Selection s);
control::Selection parse_selection(const std::string& name);

} // namespace regs::cli
