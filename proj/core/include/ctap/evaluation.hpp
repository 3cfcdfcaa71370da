#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "ctap/env.hpp"
#include "ctap/policy.hpp"
#include "ctap/pulses.hpp"
#include "ctap/quantum.hpp"

namespace ctap::agent {

enum class Smoothing { none, ma4, spline };

/// "none", "ma4" or "spline"; throws ArgumentError otherwise.
Smoothing parse_smoothing(const std::string& name);
std::string to_string(Smoothing s);

/// Maps the current observation (and the number of completed steps) to an action.
using Controller = std::function<std::vector<double>(const env::Observation&, std::size_t)>;

/// Deterministic mean action of the policy.
Controller policy_controller(const GaussianPolicy& policy);
/// Replays a fixed schedule step by step, ignoring observations.
Controller schedule_controller(pulses::PulseSchedule schedule);

/// Runs one full episode (early stop disabled) and returns the clipped actions actually applied.
pulses::PulseSchedule rollout_schedule(const Controller& controller, const env::ScenarioConfig& config);

/// ma4 is a width-4 moving average; spline resamples onto 4 n_steps intervals.
pulses::PulseSchedule apply_smoothing(const pulses::PulseSchedule& schedule, Smoothing smoothing);

struct EvaluationMetrics {
  double final_fidelity = 0.0;
  std::vector<double> max_population;  // per dot, index 0 is dot 1
  std::optional<double> transfer_time;  // last dot reaches 0.99
  double trace_drift = 0.0;
  double final_dot_trace = 0.0;  // below 1 only under loss

  /// Largest population reached by any intermediate dot.
  double max_intermediate() const;
};

EvaluationMetrics simulate_schedule(const env::ScenarioConfig& config, const pulses::PulseSchedule& schedule,
                                    quantum::Trajectory* trajectory = nullptr);

struct Evaluation {
  Smoothing smoothing = Smoothing::none;
  pulses::PulseSchedule raw_schedule;
  pulses::PulseSchedule schedule;  // after smoothing
  quantum::Trajectory trajectory;  // of the smoothed schedule
  EvaluationMetrics raw;
  EvaluationMetrics smoothed;
};

Evaluation evaluate_controller(const Controller& controller, const env::ScenarioConfig& config, Smoothing smoothing);

/// Throws ArgumentError when the policy does not fit the scenario's observation and action sizes.
Evaluation evaluate(const GaussianPolicy& policy, const env::ScenarioConfig& config, Smoothing smoothing);

}  // namespace ctap::agent
