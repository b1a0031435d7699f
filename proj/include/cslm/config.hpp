#pragma once

// Run-configuration files: key=value lines covering every TrainConfig
// field. Unknown keys are rejected. Command-line flags override file
// values, which override built-in defaults.

#include <string>

#include "cslm/training.hpp"

namespace cslm {

// Applies the file on top of the given config (usually the defaults).
void apply_config_file(TrainConfig& config, const std::string& path);

// Parses a single key=value assignment into the config.
void apply_config_entry(TrainConfig& config, const std::string& key, const std::string& value);

} // namespace cslm
