#pragma once

#include <cstdint>
#include <string>

#include "gcl/trainer.hpp"

namespace gcl {

// Run configuration parsed from the flat key-value config format. Sections
// mirror the config structs; unknown sections or keys are hard errors.
struct RunConfig {
  std::string train_csv;
  std::string test_csv;
  TrainConfig train;
  GroupThresholds groups;
};

RunConfig parse_config_text(std::string_view text, const std::string& origin);
RunConfig parse_config_file(const std::string& path);

// Canonical snapshot of a parsed config; reparsing it reproduces the config.
std::string render_config(const RunConfig& cfg);

std::uint64_t config_hash(const RunConfig& cfg);

}  // namespace gcl
