#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>

#include "ctap/env.hpp"
#include "ctap/policy.hpp"
#include "ctap/trpo.hpp"

namespace ctap::agent {

inline constexpr int kCheckpointVersion = 1;

struct PolicyCheckpoint {
  int version = kCheckpointVersion;
  std::string obs_layout;  // ScenarioConfig::observation_layout()
  GaussianPolicy policy;
  std::optional<ValueFunction> value;
  std::string env_config;  // to_config_text() of the training scenario
  std::uint64_t seed = 0;
  int epoch = -1;
  std::map<std::string, double> metrics;
};

std::string checkpoint_to_json(const PolicyCheckpoint& ckpt);
/// Throws ConfigError on malformed or unsupported documents.
PolicyCheckpoint checkpoint_from_json(const std::string& text);

/// Written to a temporary sibling and renamed into place.
void save_checkpoint(const std::filesystem::path& path, const PolicyCheckpoint& ckpt);
PolicyCheckpoint load_checkpoint(const std::filesystem::path& path);

/// Throws ArgumentError when the checkpoint's layout or network dims do not fit the scenario.
void require_compatible(const PolicyCheckpoint& ckpt, const env::ScenarioConfig& config);

}  // namespace ctap::agent
