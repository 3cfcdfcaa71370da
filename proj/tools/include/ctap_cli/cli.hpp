#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "ctap/evaluation.hpp"
#include "ctap/training.hpp"

namespace ctap::cli {

enum ExitCode : int { kOk = 0, kConfigError = 1, kNumericalError = 2 };

struct CommonArgs {
  std::filesystem::path config;
  std::filesystem::path out;
  std::uint64_t seed = 0;
};

struct TrainArgs {
  CommonArgs common;
  std::optional<std::filesystem::path> trpo_config;
  std::optional<std::filesystem::path> warm_start;
  std::optional<double> max_wall_secs;
};

struct EvaluateArgs {
  CommonArgs common;
  std::optional<std::filesystem::path> checkpoint;
  std::optional<std::filesystem::path> schedule;  // replay a schedule CSV instead of a policy
  agent::Smoothing smoothing = agent::Smoothing::none;
};

struct AnalyzeArgs {
  CommonArgs common;
  std::optional<std::filesystem::path> checkpoint;
  bool random_policy = false;
  std::size_t n_samples = 100000;
  double epsilon = 0.05;
  double exploration_std = 0.1;
};

/// Training settings read from a `key = value` file: every TrpoConfig field plus
/// `hidden` (comma list), `log_std_init`, `eval_smoothing`, `target_fidelity`, `max_intermediate`.
struct TrainingSettings {
  agent::TrpoConfig trpo;
  agent::PolicyShape shape;
  agent::TrainOptions options;
};

TrainingSettings load_training_settings(const std::filesystem::path& path);

/// Each command creates the output directory, writes its files, and finishes with manifest.json
/// (status "failed" and the error message when an exception escapes, which is then rethrown).
void cmd_baseline(const CommonArgs& args);
void cmd_train(const TrainArgs& args);
void cmd_evaluate(const EvaluateArgs& args);
void cmd_analyze(const AnalyzeArgs& args);

/// Parses argv, dispatches, and maps exceptions onto exit codes: 1 for configuration and argument
/// errors, 2 for numerical failures.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace ctap::cli
