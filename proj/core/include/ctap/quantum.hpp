#pragma once

#include <array>
#include <cstddef>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "ctap/linalg.hpp"
#include "ctap/pulses.hpp"

namespace ctap::quantum {

using linalg::Complex;
using linalg::ComplexMatrix;

/// Parameters of the dot-array master equation, in units hbar = Omega_max = 1.
///
/// The basis is (|0>, |1>, ..., |N>) when the vacuum level is present and (|1>, ..., |N>)
/// otherwise. The vacuum level exists exactly when the loss rate is positive.
struct MasterEquationModel {
  int n_dots = 3;
  std::vector<double> energies;  // diagonal energy of each dot; energies[0] == 0
  double gamma_d = 0.0;          // dephasing rate
  double gamma_l = 0.0;          // loss rate into the vacuum level

  static MasterEquationModel ideal(int n_dots);

  /// Three dots with Delta_12 and Delta_23 given; dot energies (0, Delta_12, Delta_12 + Delta_23).
  static MasterEquationModel three_dot(double delta12, double delta23, double gamma_d = 0.0,
                                       double gamma_l = 0.0);

  bool include_vacuum() const { return gamma_l > 0.0; }
  int dim() const { return n_dots + (include_vacuum() ? 1 : 0); }
  /// Matrix index of dot k, 1 <= k <= n_dots.
  int dot_index(int k) const { return include_vacuum() ? k : k - 1; }
  int n_controls() const { return n_dots == 5 ? 3 : 2; }

  std::vector<std::string> basis_labels() const;

  /// Throws ArgumentError on an unsupported dot count, negative rates, or bad energies.
  void validate() const;
};

/// Hermitian, positive semidefinite state of the dot array.
class DensityMatrix {
 public:
  DensityMatrix() = default;
  explicit DensityMatrix(ComplexMatrix values) : m_(std::move(values)) {}

  /// |index><index| in a dim-dimensional space.
  static DensityMatrix basis_state(int dim, int index);

  const ComplexMatrix& matrix() const { return m_; }
  int dim() const { return static_cast<int>(m_.rows()); }
  Complex operator()(int i, int j) const { return m_(i, j); }
  double population(int i) const { return m_(i, i).real(); }
  double trace() const { return m_.trace().real(); }

 private:
  ComplexMatrix m_;
};

/// Electron on the first dot, vacuum empty.
DensityMatrix initial_state(const MasterEquationModel& model);

/// Tridiagonal dot Hamiltonian: -Omega on the nearest-neighbour couplings, dot energies on the
/// diagonal, zero vacuum row/column. Five dots share the middle control between both interior
/// couplings. Throws ArgumentError on wrong arity or controls outside [0, Omega_max].
ComplexMatrix build_hamiltonian(const MasterEquationModel& model, std::span<const double> controls);

/// Zero-energy eigenvector (cos t, 0, -sin t) of the ideal three-dot Hamiltonian,
/// t = arctan(omega12 / omega23). Throws DegenerateInputError when both couplings vanish.
std::array<Complex, 3> dark_state(double omega12, double omega23);

/// Ascending eigenvalues; closed form for dim <= 3, iterative solver above.
/// Throws ArgumentError for non-Hermitian input.
std::vector<double> eigen_spectrum(const ComplexMatrix& h);

/// d rho / dt = -i[H, rho] + dephasing + loss.
///
/// Dephasing damps coherences between distinct dots at gamma_d (coherences with the vacuum at
/// gamma_d / 2, as for the Lindblad operators sqrt(gamma_d)|k><k|); loss uses
/// sqrt(gamma_l)|0><k| for every dot k.
ComplexMatrix lindblad_rhs(const MasterEquationModel& model, const ComplexMatrix& h, const ComplexMatrix& rho);

/// Row-major vectorized generator L with vec(d rho/dt) = L vec(rho), assembled from the explicit
/// Lindblad operators.
linalg::SuperMatrix lindblad_superoperator(const MasterEquationModel& model, const ComplexMatrix& h);

enum class Propagator { rk4, expm };

struct StepOptions {
  Propagator method = Propagator::rk4;
  int n_substeps = 40;          // RK4 substeps per control interval
  bool check_invariants = true;  // trace and positivity after each step
};

/// Advances rho by dt with controls held constant; the result is re-Hermitized.
/// Throws NumericalError (carrying step_index) on non-finite values, a positivity violation
/// beyond 1e-8, or trace drift beyond 1e-9 in a trace-preserving model.
DensityMatrix step(const MasterEquationModel& model, const DensityMatrix& rho, std::span<const double> controls,
                   double dt, const StepOptions& options = {}, std::size_t step_index = 0);

struct Trajectory {
  std::vector<double> times;                  // n_steps + 1 boundaries, 0 .. t_max
  std::vector<DensityMatrix> states;          // state at each boundary
  std::vector<std::vector<double>> controls;  // one control vector per interval
};

/// Applies step() interval by interval, recording the state at every boundary.
Trajectory evolve(const MasterEquationModel& model, const pulses::PulseSchedule& schedule, const DensityMatrix& rho0,
                  const StepOptions& options = {});

/// Population of the last dot.
double fidelity(const MasterEquationModel& model, const DensityMatrix& rho);

/// Sum of dot populations (excludes the vacuum level).
double dot_trace(const MasterEquationModel& model, const DensityMatrix& rho);

/// First boundary time at which the population of `dot` reaches threshold.
std::optional<double> time_to_population(const MasterEquationModel& model, const Trajectory& traj, int dot,
                                         double threshold);

struct TransferMetrics {
  double final_fidelity = 0.0;
  std::vector<double> max_population;  // per dot, index 0 is dot 1
  std::optional<double> transfer_time;  // first time the last dot reaches 0.99
  double trace_drift = 0.0;             // max |tr rho - 1| over the trajectory
  double final_dot_trace = 0.0;
};

TransferMetrics transfer_metrics(const MasterEquationModel& model, const Trajectory& traj,
                                 double transfer_threshold = 0.99);

/// `t,omega_1,omega_2[,omega_3],rho11,...,rhoNN,rho00,trace,re_rho13,im_rho13`, 12 significant
/// digits. The control columns of a row hold the controls that produced that state (zero at t=0).
void write_trajectory_csv(std::ostream& out, const MasterEquationModel& model, const Trajectory& traj);

}  // namespace ctap::quantum
