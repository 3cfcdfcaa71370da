#include "ctap/evaluation.hpp"

#include <algorithm>
#include <memory>

#include "ctap/errors.hpp"

namespace ctap::agent {

Smoothing parse_smoothing(const std::string& name) {
  if (name == "none") return Smoothing::none;
  if (name == "ma4") return Smoothing::ma4;
  if (name == "spline") return Smoothing::spline;
  throw ArgumentError("unknown smoothing '" + name + "' (expected none, ma4 or spline)");
}

std::string to_string(Smoothing s) {
  switch (s) {
    case Smoothing::none: return "none";
    case Smoothing::ma4: return "ma4";
    case Smoothing::spline: return "spline";
  }
  return "none";
}

Controller policy_controller(const GaussianPolicy& policy) {
  auto p = std::make_shared<const GaussianPolicy>(policy);
  return [p](const env::Observation& obs, std::size_t) {
    const Eigen::VectorXd mean = p->forward(obs.values).mean;
    return std::vector<double>(mean.data(), mean.data() + mean.size());
  };
}

Controller schedule_controller(pulses::PulseSchedule schedule) {
  auto s = std::make_shared<const pulses::PulseSchedule>(std::move(schedule));
  return [s](const env::Observation&, std::size_t step) {
    if (step >= s->n_steps()) throw ArgumentError("schedule_controller: schedule shorter than the episode");
    return s->controls_at(step);
  };
}

pulses::PulseSchedule rollout_schedule(const Controller& controller, const env::ScenarioConfig& config) {
  env::ScenarioConfig cfg = config;
  cfg.rho33_threshold.reset();
  env::CtapEnv env(cfg);
  env::Observation obs = env.reset();
  std::vector<std::vector<double>> applied;
  applied.reserve(static_cast<std::size_t>(cfg.n_steps));
  while (!env.done()) {
    const auto action = controller(obs, env.steps_taken());
    auto result = env.step(action);
    applied.push_back(env.previous_action());
    obs = std::move(result.observation);
  }
  return pulses::PulseSchedule::from_steps(cfg.t_max(), applied);
}

pulses::PulseSchedule apply_smoothing(const pulses::PulseSchedule& schedule, Smoothing smoothing) {
  switch (smoothing) {
    case Smoothing::none: return schedule;
    case Smoothing::ma4: return pulses::moving_average(schedule, 4);
    case Smoothing::spline: return pulses::spline_resample(schedule, 4 * schedule.n_steps());
  }
  return schedule;
}

double EvaluationMetrics::max_intermediate() const {
  if (max_population.size() < 3) return 0.0;
  return *std::max_element(max_population.begin() + 1, max_population.end() - 1);
}

EvaluationMetrics simulate_schedule(const env::ScenarioConfig& config, const pulses::PulseSchedule& schedule,
                                    quantum::Trajectory* trajectory) {
  const auto model = config.model();
  auto traj = quantum::evolve(model, schedule, quantum::initial_state(model), config.step_options());
  const auto tm = quantum::transfer_metrics(model, traj);
  EvaluationMetrics m;
  m.final_fidelity = tm.final_fidelity;
  m.max_population = tm.max_population;
  m.transfer_time = tm.transfer_time;
  m.trace_drift = tm.trace_drift;
  m.final_dot_trace = tm.final_dot_trace;
  if (trajectory) *trajectory = std::move(traj);
  return m;
}

Evaluation evaluate_controller(const Controller& controller, const env::ScenarioConfig& config, Smoothing smoothing) {
  Evaluation ev;
  ev.smoothing = smoothing;
  ev.raw_schedule = rollout_schedule(controller, config);
  ev.schedule = apply_smoothing(ev.raw_schedule, smoothing);
  ev.raw = simulate_schedule(config, ev.raw_schedule, smoothing == Smoothing::none ? &ev.trajectory : nullptr);
  if (smoothing == Smoothing::none)
    ev.smoothed = ev.raw;
  else
    ev.smoothed = simulate_schedule(config, ev.schedule, &ev.trajectory);
  return ev;
}

Evaluation evaluate(const GaussianPolicy& policy, const env::ScenarioConfig& config, Smoothing smoothing) {
  if (policy.obs_dim() != static_cast<int>(config.observation_size()) || policy.action_dim() != config.n_actions())
    throw ArgumentError("evaluate: policy shape (" + std::to_string(policy.obs_dim()) + " -> " +
                        std::to_string(policy.action_dim()) + ") does not match the scenario (" +
                        std::to_string(config.observation_size()) + " -> " + std::to_string(config.n_actions()) + ")");
  return evaluate_controller(policy_controller(policy), config, smoothing);
}

}  // namespace ctap::agent
