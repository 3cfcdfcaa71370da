#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctap/config.hpp"
#include "ctap/quantum.hpp"

namespace ctap::env {

enum class ObservationMode { full, reduced };

/// One CTAP scenario. Times are given in units of pi / Omega_max, energies and rates in Omega_max.
struct ScenarioConfig {
  int n_dots = 3;
  double t_max_pi_units = 12.0;
  int n_steps = 50;
  double delta12 = 0.0;
  double delta23 = 0.0;
  double gamma_d = 0.0;
  double gamma_l = 0.0;
  double alpha = 1.0;
  double beta = 4.0;
  std::optional<double> rho33_threshold;  // early stop disabled when empty
  int patience = 5;
  ObservationMode observation_mode = ObservationMode::full;
  quantum::Propagator propagator = quantum::Propagator::expm;
  int n_substeps = 40;  // used by rk4 only

  // Gaussian baseline shape.
  double baseline_width_fraction = pulses::kDefaultWidthFraction;
  double baseline_separation_fraction = pulses::kDefaultSeparationFraction;
  double sctap_middle_scale = 1.0;

  double t_max() const;
  int n_actions() const { return n_dots == 5 ? 3 : 2; }
  std::size_t observation_size() const;
  /// Tag stored in checkpoints, e.g. "ctap3-reduced".
  std::string observation_layout() const;

  quantum::MasterEquationModel model() const;
  quantum::StepOptions step_options() const;

  /// Throws ArgumentError on inconsistent values.
  void validate() const;
};

ScenarioConfig scenario_from_keys(const KeyValueFile& kv);
ScenarioConfig load_scenario(const std::filesystem::path& path);
ScenarioConfig parse_scenario(std::istream& in);
/// Canonical `key = value` text; parse_scenario(to_config_text(c)) reproduces c.
std::string to_config_text(const ScenarioConfig& config);

/// Gaussian counter-intuitive pair (three dots) or straddling scheme (five dots) for the scenario.
pulses::PulseSchedule baseline_schedule(const ScenarioConfig& config);

struct Observation {
  std::vector<double> values;
};

/// Real degrees of freedom of the dot block: populations rho_kk, then (Re, Im) of rho_ij for
/// i < j in lexicographic order.
std::vector<double> state_variables(const quantum::MasterEquationModel& model, const quantum::DensityMatrix& rho);
std::vector<std::string> state_variable_names(int n_dots);
/// "omega12", "omega23" for three dots; "omega_left", "omega_middle", "omega_right" for five.
std::vector<std::string> action_names(int n_dots);

Observation encode_observation(const quantum::MasterEquationModel& model, const quantum::DensityMatrix& rho,
                               std::span<const double> previous_action, ObservationMode mode);

/// alpha (-1 + rho33 - rho22) - exp(beta rho22). Never exceeds -1.
double reward_ctap3(double rho22, double rho33, double alpha, double beta);
double reward_ctap3(const quantum::MasterEquationModel& model, const quantum::DensityMatrix& rho, double alpha,
                    double beta);

/// -(1 - rho55): zero at perfect transfer, negative otherwise.
double reward_sctap5(double rho55);
double reward_sctap5(const quantum::MasterEquationModel& model, const quantum::DensityMatrix& rho);

struct StepInfo {
  std::size_t step = 0;             // number of intervals completed
  std::vector<double> populations;  // dot populations, index 0 is dot 1
  double vacuum_population = 0.0;
  double trace = 0.0;
};

struct StepResult {
  Observation observation;
  double reward = 0.0;
  bool done = false;
  StepInfo info;
};

/// Episodic wrapper around the master-equation propagator. Not thread-safe; use one instance per
/// worker.
class CtapEnv {
 public:
  explicit CtapEnv(ScenarioConfig config);

  /// Electron on dot 1, previous action zero. The seed is accepted for interface stability; the
  /// dynamics are deterministic.
  Observation reset(std::uint64_t seed = 0);

  /// Clips the action into [0, Omega_max], holds it for one interval, and scores the new state.
  /// Throws ArgumentError on wrong arity or NaN, ProtocolError when the episode is over.
  StepResult step(std::span<const double> action);

  const ScenarioConfig& config() const { return config_; }
  const quantum::MasterEquationModel& model() const { return model_; }
  const quantum::DensityMatrix& state() const { return rho_; }
  const std::vector<double>& previous_action() const { return previous_action_; }
  std::size_t steps_taken() const { return steps_; }
  bool done() const { return done_; }
  double dt() const { return dt_; }

 private:
  ScenarioConfig config_;
  quantum::MasterEquationModel model_;
  quantum::StepOptions options_;
  double dt_ = 0.0;

  quantum::DensityMatrix rho_;
  std::vector<double> previous_action_;
  std::size_t steps_ = 0;
  int above_threshold_ = 0;
  bool done_ = true;
};

}  // namespace ctap::env
