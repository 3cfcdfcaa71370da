#include "ctap/env.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <fmt/format.h>

#include "ctap/errors.hpp"

namespace ctap::env {

double ScenarioConfig::t_max() const { return t_max_pi_units * std::numbers::pi; }

std::size_t ScenarioConfig::observation_size() const {
  const std::size_t actions = static_cast<std::size_t>(n_actions());
  if (observation_mode == ObservationMode::reduced) return 2 + actions;
  return static_cast<std::size_t>(n_dots * n_dots) + actions;
}

std::string ScenarioConfig::observation_layout() const {
  return fmt::format("ctap{}-{}", n_dots, observation_mode == ObservationMode::full ? "full" : "reduced");
}

quantum::MasterEquationModel ScenarioConfig::model() const {
  validate();
  if (n_dots == 3) return quantum::MasterEquationModel::three_dot(delta12, delta23, gamma_d, gamma_l);
  auto m = quantum::MasterEquationModel::ideal(n_dots);
  m.gamma_d = gamma_d;
  m.gamma_l = gamma_l;
  m.validate();
  return m;
}

quantum::StepOptions ScenarioConfig::step_options() const {
  quantum::StepOptions o;
  o.n_substeps = n_substeps;
  o.method = propagator;
  return o;
}

void ScenarioConfig::validate() const {
  if (n_dots != 3 && n_dots != 5) throw ArgumentError("scenario: n_dots must be 3 or 5");
  if (!(t_max_pi_units > 0.0) || !std::isfinite(t_max_pi_units)) throw ArgumentError("scenario: t_max must be positive");
  if (n_steps < 2) throw ArgumentError("scenario: n_steps must be >= 2");
  if (!std::isfinite(delta12) || !std::isfinite(delta23)) throw ArgumentError("scenario: detuning must be finite");
  if (n_dots == 5 && (delta12 != 0.0 || delta23 != 0.0)) throw ArgumentError("scenario: detuning is only modelled for three dots");
  if (!(gamma_d >= 0.0) || !(gamma_l >= 0.0)) throw ArgumentError("scenario: rates must be >= 0");
  if (n_dots == 3 && !(alpha > 0.0 && beta > 0.0)) throw ArgumentError("scenario: alpha and beta must be positive");
  if (rho33_threshold && !(*rho33_threshold > 0.0 && *rho33_threshold <= 1.0))
    throw ArgumentError("scenario: rho33_threshold must lie in (0, 1]");
  if (patience < 1) throw ArgumentError("scenario: patience must be >= 1");
  if (observation_mode == ObservationMode::reduced && n_dots != 3)
    throw ArgumentError("scenario: reduced observations are defined for three dots only");
  if (n_substeps < 1) throw ArgumentError("scenario: n_substeps must be >= 1");
  if (!(baseline_width_fraction > 0.0)) throw ArgumentError("scenario: baseline_width_fraction must be positive");
  if (!(baseline_separation_fraction > 0.0 && baseline_separation_fraction < 1.0))
    throw ArgumentError("scenario: baseline_separation_fraction must lie in (0, 1)");
  if (!(sctap_middle_scale >= 1.0)) throw ArgumentError("scenario: sctap_middle_scale must be >= 1");
}

ScenarioConfig scenario_from_keys(const KeyValueFile& kv) {
  ScenarioConfig c;
  if (auto v = kv.get_int("n_dots")) c.n_dots = static_cast<int>(*v);
  if (auto v = kv.get_double("t_max_pi_units")) c.t_max_pi_units = *v;
  if (auto v = kv.get_int("n_steps")) c.n_steps = static_cast<int>(*v);
  if (auto v = kv.get_double("delta12")) c.delta12 = *v;
  if (auto v = kv.get_double("delta23")) c.delta23 = *v;
  if (auto v = kv.get_double("gamma_d")) c.gamma_d = *v;
  if (auto v = kv.get_double("gamma_l")) c.gamma_l = *v;
  if (auto v = kv.get_double("alpha")) c.alpha = *v;
  if (auto v = kv.get_double("beta")) c.beta = *v;
  if (auto v = kv.get_string("rho33_threshold")) c.rho33_threshold = *v == "none" ? std::nullopt : kv.get_double("rho33_threshold");
  if (auto v = kv.get_int("patience")) c.patience = static_cast<int>(*v);
  if (auto v = kv.get_string("observation_mode")) {
    if (*v == "full") c.observation_mode = ObservationMode::full;
    else if (*v == "reduced") c.observation_mode = ObservationMode::reduced;
    else throw ConfigError("expected 'full' or 'reduced', got '" + *v + "'", 0, "observation_mode");
  }
  if (auto v = kv.get_string("propagator")) {
    if (*v == "rk4") c.propagator = quantum::Propagator::rk4;
    else if (*v == "expm") c.propagator = quantum::Propagator::expm;
    else throw ConfigError("expected 'rk4' or 'expm', got '" + *v + "'", 0, "propagator");
  }
  if (auto v = kv.get_int("n_substeps")) c.n_substeps = static_cast<int>(*v);
  if (auto v = kv.get_double("baseline_width_fraction")) c.baseline_width_fraction = *v;
  if (auto v = kv.get_double("baseline_separation_fraction")) c.baseline_separation_fraction = *v;
  if (auto v = kv.get_double("sctap_middle_scale")) c.sctap_middle_scale = *v;
  kv.reject_unknown_keys();
  try {
    c.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

ScenarioConfig load_scenario(const std::filesystem::path& path) { return scenario_from_keys(KeyValueFile::load(path)); }

ScenarioConfig parse_scenario(std::istream& in) { return scenario_from_keys(KeyValueFile::parse(in)); }

std::string to_config_text(const ScenarioConfig& c) {
  auto num = [](double v) { return fmt::format("{:.17g}", v); };
  std::string out;
  out += fmt::format("n_dots = {}\n", c.n_dots);
  out += "t_max_pi_units = " + num(c.t_max_pi_units) + "\n";
  out += fmt::format("n_steps = {}\n", c.n_steps);
  out += "delta12 = " + num(c.delta12) + "\n";
  out += "delta23 = " + num(c.delta23) + "\n";
  out += "gamma_d = " + num(c.gamma_d) + "\n";
  out += "gamma_l = " + num(c.gamma_l) + "\n";
  out += "alpha = " + num(c.alpha) + "\n";
  out += "beta = " + num(c.beta) + "\n";
  out += "rho33_threshold = " + (c.rho33_threshold ? num(*c.rho33_threshold) : std::string("none")) + "\n";
  out += fmt::format("patience = {}\n", c.patience);
  out += fmt::format("observation_mode = {}\n", c.observation_mode == ObservationMode::full ? "full" : "reduced");
  out += fmt::format("propagator = {}\n", c.propagator == quantum::Propagator::rk4 ? "rk4" : "expm");
  out += fmt::format("n_substeps = {}\n", c.n_substeps);
  out += "baseline_width_fraction = " + num(c.baseline_width_fraction) + "\n";
  out += "baseline_separation_fraction = " + num(c.baseline_separation_fraction) + "\n";
  out += "sctap_middle_scale = " + num(c.sctap_middle_scale) + "\n";
  return out;
}

pulses::PulseSchedule baseline_schedule(const ScenarioConfig& c) {
  c.validate();
  const auto n = static_cast<std::size_t>(c.n_steps);
  if (c.n_dots == 5)
    return pulses::gaussian_sctap(c.t_max(), n, c.sctap_middle_scale, c.baseline_width_fraction,
                                  c.baseline_separation_fraction);
  return pulses::gaussian_ctap_pair(c.t_max(), n, pulses::PulseOrder::counter_intuitive, c.baseline_width_fraction,
                                    c.baseline_separation_fraction);
}

std::vector<double> state_variables(const quantum::MasterEquationModel& model, const quantum::DensityMatrix& rho) {
  const int n = model.n_dots;
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(n * n));
  for (int k = 1; k <= n; ++k) out.push_back(rho.population(model.dot_index(k)));
  for (int i = 1; i <= n; ++i)
    for (int j = i + 1; j <= n; ++j) {
      const auto c = rho(model.dot_index(i), model.dot_index(j));
      out.push_back(c.real());
      out.push_back(c.imag());
    }
  return out;
}

std::vector<std::string> state_variable_names(int n_dots) {
  std::vector<std::string> out;
  for (int k = 1; k <= n_dots; ++k) out.push_back(fmt::format("rho{}{}", k, k));
  for (int i = 1; i <= n_dots; ++i)
    for (int j = i + 1; j <= n_dots; ++j) {
      out.push_back(fmt::format("re_rho{}{}", i, j));
      out.push_back(fmt::format("im_rho{}{}", i, j));
    }
  return out;
}

std::vector<std::string> action_names(int n_dots) {
  if (n_dots == 5) return {"omega_left", "omega_middle", "omega_right"};
  return {"omega12", "omega23"};
}

Observation encode_observation(const quantum::MasterEquationModel& model, const quantum::DensityMatrix& rho,
                               std::span<const double> previous_action, ObservationMode mode) {
  Observation obs;
  if (mode == ObservationMode::reduced) {
    obs.values = {rho.population(model.dot_index(2)), rho.population(model.dot_index(3))};
  } else {
    obs.values = state_variables(model, rho);
  }
  for (double a : previous_action) obs.values.push_back(a / pulses::kOmegaMax);
  return obs;
}

double reward_ctap3(double rho22, double rho33, double alpha, double beta) {
  return alpha * (-1.0 + rho33 - rho22) - std::exp(beta * rho22);
}

double reward_ctap3(const quantum::MasterEquationModel& model, const quantum::DensityMatrix& rho, double alpha,
                    double beta) {
  return reward_ctap3(rho.population(model.dot_index(2)), rho.population(model.dot_index(3)), alpha, beta);
}

double reward_sctap5(double rho55) { return -(1.0 - rho55); }

double reward_sctap5(const quantum::MasterEquationModel& model, const quantum::DensityMatrix& rho) {
  return reward_sctap5(rho.population(model.dot_index(5)));
}

CtapEnv::CtapEnv(ScenarioConfig config)
    : config_(std::move(config)),
      model_(config_.model()),
      options_(config_.step_options()),
      dt_(config_.t_max() / config_.n_steps) {}

Observation CtapEnv::reset(std::uint64_t /*seed*/) {
  rho_ = quantum::initial_state(model_);
  previous_action_.assign(static_cast<std::size_t>(config_.n_actions()), 0.0);
  steps_ = 0;
  above_threshold_ = 0;
  done_ = false;
  return encode_observation(model_, rho_, previous_action_, config_.observation_mode);
}

StepResult CtapEnv::step(std::span<const double> action) {
  if (done_) throw ProtocolError("CtapEnv::step: episode is over; call reset()");
  if (static_cast<int>(action.size()) != config_.n_actions())
    throw ArgumentError(fmt::format("CtapEnv::step: expected {} action components, got {}", config_.n_actions(), action.size()));
  std::vector<double> controls(action.begin(), action.end());
  for (double& a : controls) {
    if (std::isnan(a)) throw ArgumentError("CtapEnv::step: NaN action");
    a = std::clamp(a, 0.0, pulses::kOmegaMax);
  }

  rho_ = quantum::step(model_, rho_, controls, dt_, options_, steps_);
  previous_action_ = controls;
  ++steps_;

  StepResult r;
  r.reward = config_.n_dots == 5 ? reward_sctap5(model_, rho_) : reward_ctap3(model_, rho_, config_.alpha, config_.beta);
  const double target = quantum::fidelity(model_, rho_);
  if (config_.rho33_threshold && target > *config_.rho33_threshold) {
    ++above_threshold_;
  } else {
    above_threshold_ = 0;
  }
  done_ = steps_ >= static_cast<std::size_t>(config_.n_steps) || above_threshold_ >= config_.patience;

  r.done = done_;
  r.observation = encode_observation(model_, rho_, previous_action_, config_.observation_mode);
  r.info.step = steps_;
  for (int k = 1; k <= model_.n_dots; ++k) r.info.populations.push_back(rho_.population(model_.dot_index(k)));
  r.info.vacuum_population = model_.include_vacuum() ? rho_.population(0) : 0.0;
  r.info.trace = rho_.trace();
  return r;
}

}  // namespace ctap::env
