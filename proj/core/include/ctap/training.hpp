#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <limits>
#include <optional>
#include <vector>

#include "ctap/env.hpp"
#include "ctap/evaluation.hpp"
#include "ctap/policy.hpp"
#include "ctap/trpo.hpp"

namespace ctap::agent {

struct PolicyShape {
  std::vector<int> hidden{16};
  double log_std_init = std::log(0.3);
};

struct EpochRecord {
  int epoch = 0;
  double mean_return = 0.0;
  double mean_final_rho33 = 0.0;  // target-dot population at episode end, batch mean
  double max_rho22 = 0.0;         // peak dot-2 population, batch mean of per-episode peaks
  double kl = 0.0;
  bool accepted = false;
};

struct TrainingLog {
  std::vector<EpochRecord> records;

  /// `epoch,mean_return,mean_final_rho33,max_rho22,kl,accepted` with %.17g numbers.
  void write_csv(std::ostream& out) const;
};

/// Worker count: CTAP_THREADS when set and positive, otherwise the hardware concurrency.
int worker_count();

/// Seed of one rollout; independent of how episodes are spread over workers.
std::uint64_t episode_seed(std::uint64_t seed, int epoch, int episode);

/// One stochastic episode. The env must not be in use elsewhere.
Episode run_episode(env::CtapEnv& env, const GaussianPolicy& policy, Rng& rng);

/// Episodes in index order, spread over up to n_threads workers.
std::vector<Episode> collect_episodes(const env::ScenarioConfig& config, const GaussianPolicy& policy,
                                      std::uint64_t seed, int epoch, int n_episodes, int n_threads);

struct TrainOptions {
  std::optional<GaussianPolicy> warm_start;
  std::optional<ValueFunction> warm_value;
  double max_wall_secs = std::numeric_limits<double>::infinity();
  int n_threads = 0;  // 0: worker_count()

  /// The deterministic policy is evaluated with this smoothing every eval_every epochs. The best
  /// evaluation by final fidelity, among those whose intermediate dots stay at or below
  /// max_intermediate, is kept; training stops once it reaches target_fidelity.
  Smoothing eval_smoothing = Smoothing::ma4;
  int eval_every = 1;
  double max_intermediate = 1.0;
  std::optional<double> target_fidelity;

  std::function<void(const EpochRecord&)> on_epoch;
};

struct TrainResult {
  GaussianPolicy policy;       // best evaluated
  GaussianPolicy final_policy;
  ValueFunction value;
  int best_epoch = -1;         // -1: initial policy
  EvaluationMetrics best_metrics;
  std::vector<double> best_so_far;  // best qualifying fidelity after each evaluation, 0 if none
  TrainingLog log;
  int epochs_run = 0;
  bool reached_target = false;
  bool hit_wall_clock = false;
};

/// Throws ArgumentError when the warm start does not fit the scenario.
TrainResult train(const env::ScenarioConfig& config, const TrpoConfig& trpo, const PolicyShape& shape,
                  const TrainOptions& options = {});

}  // namespace ctap::agent
