#include "ctap/quantum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <ostream>

#include <fmt/format.h>

#include "ctap/errors.hpp"

namespace ctap::quantum {

MasterEquationModel MasterEquationModel::ideal(int n_dots) {
  MasterEquationModel m;
  m.n_dots = n_dots;
  m.energies.assign(static_cast<std::size_t>(std::max(n_dots, 0)), 0.0);
  m.validate();
  return m;
}

MasterEquationModel MasterEquationModel::three_dot(double delta12, double delta23, double gamma_d, double gamma_l) {
  MasterEquationModel m;
  m.n_dots = 3;
  m.energies = {0.0, delta12, delta12 + delta23};
  m.gamma_d = gamma_d;
  m.gamma_l = gamma_l;
  m.validate();
  return m;
}

std::vector<std::string> MasterEquationModel::basis_labels() const {
  std::vector<std::string> out;
  if (include_vacuum()) out.emplace_back("0");
  for (int k = 1; k <= n_dots; ++k) out.push_back(std::to_string(k));
  return out;
}

void MasterEquationModel::validate() const {
  if (n_dots != 3 && n_dots != 5) throw ArgumentError(fmt::format("model: n_dots must be 3 or 5, got {}", n_dots));
  if (energies.size() != static_cast<std::size_t>(n_dots)) throw ArgumentError("model: one energy per dot required");
  if (energies.front() != 0.0) throw ArgumentError("model: energy of dot 1 is the reference and must be 0");
  for (double e : energies)
    if (!std::isfinite(e)) throw ArgumentError("model: non-finite dot energy");
  if (!(gamma_d >= 0.0) || !std::isfinite(gamma_d)) throw ArgumentError("model: gamma_d must be >= 0");
  if (!(gamma_l >= 0.0) || !std::isfinite(gamma_l)) throw ArgumentError("model: gamma_l must be >= 0");
}

DensityMatrix DensityMatrix::basis_state(int dim, int index) {
  if (dim < 1 || dim > linalg::kMaxDim || index < 0 || index >= dim) throw ArgumentError("basis_state: index out of range");
  ComplexMatrix m = ComplexMatrix::Zero(dim, dim);
  m(index, index) = 1.0;
  return DensityMatrix(std::move(m));
}

DensityMatrix initial_state(const MasterEquationModel& model) {
  return DensityMatrix::basis_state(model.dim(), model.dot_index(1));
}

ComplexMatrix build_hamiltonian(const MasterEquationModel& model, std::span<const double> controls) {
  if (static_cast<int>(controls.size()) != model.n_controls())
    throw ArgumentError(fmt::format("build_hamiltonian: expected {} controls, got {}", model.n_controls(), controls.size()));
  for (double c : controls)
    if (!(c >= 0.0 && c <= pulses::kOmegaMax)) throw ArgumentError(fmt::format("build_hamiltonian: control {} outside [0, Omega_max]", c));

  const int n = model.dim();
  ComplexMatrix h = ComplexMatrix::Zero(n, n);
  for (int k = 1; k <= model.n_dots; ++k) {
    const int i = model.dot_index(k);
    h(i, i) = model.energies[static_cast<std::size_t>(k - 1)];
  }
  for (int k = 1; k < model.n_dots; ++k) {
    // Couplings (1,2), (2,3) for three dots; left, middle, middle, right for five.
    double omega = 0.0;
    if (model.n_dots == 3) {
      omega = controls[static_cast<std::size_t>(k - 1)];
    } else {
      omega = k == 1 ? controls[0] : (k == model.n_dots - 1 ? controls[2] : controls[1]);
    }
    const int i = model.dot_index(k);
    h(i, i + 1) = -omega;
    h(i + 1, i) = -omega;
  }
  return h;
}

std::array<Complex, 3> dark_state(double omega12, double omega23) {
  if (omega12 == 0.0 && omega23 == 0.0) throw DegenerateInputError("dark_state: both couplings are zero");
  const double theta = std::atan2(omega12, omega23);  // arctan(omega12/omega23) on the physical quadrant
  return {Complex(std::cos(theta)), Complex(0.0), Complex(-std::sin(theta))};
}

std::vector<double> eigen_spectrum(const ComplexMatrix& h) {
  if (h.rows() != h.cols() || h.rows() == 0) throw ArgumentError("eigen_spectrum: matrix must be square and non-empty");
  if (!linalg::is_hermitian(h, 1e-10)) throw ArgumentError("eigen_spectrum: matrix is not Hermitian");
  const auto n = h.rows();
  std::vector<double> out;
  if (n == 1) {
    out = {h(0, 0).real()};
  } else if (n == 2) {
    const double a = h(0, 0).real(), d = h(1, 1).real();
    const double mean = 0.5 * (a + d);
    const double r = std::hypot(0.5 * (a - d), std::abs(h(0, 1)));
    out = {mean - r, mean + r};
  } else if (n == 3) {
    // Trigonometric solution of the real characteristic cubic of a Hermitian 3x3 matrix.
    const double off = std::norm(h(0, 1)) + std::norm(h(0, 2)) + std::norm(h(1, 2));
    const double a0 = h(0, 0).real(), a1 = h(1, 1).real(), a2 = h(2, 2).real();
    if (off == 0.0) {
      out = {a0, a1, a2};
    } else {
      const double q = (a0 + a1 + a2) / 3.0;
      const double p2 = (a0 - q) * (a0 - q) + (a1 - q) * (a1 - q) + (a2 - q) * (a2 - q) + 2.0 * off;
      const double p = std::sqrt(p2 / 6.0);
      ComplexMatrix b = h;
      for (int i = 0; i < 3; ++i) b(i, i) -= q;
      b /= p;
      const double r = std::clamp(0.5 * b.determinant().real(), -1.0, 1.0);
      const double phi = std::acos(r) / 3.0;
      const double e1 = q + 2.0 * p * std::cos(phi);
      const double e3 = q + 2.0 * p * std::cos(phi + 2.0 * std::numbers::pi / 3.0);
      out = {e1, 3.0 * q - e1 - e3, e3};
    }
  } else {
    const auto eig = linalg::hermitian_eigs(h);
    out.assign(eig.values.data(), eig.values.data() + eig.values.size());
  }
  std::sort(out.begin(), out.end());
  return out;
}

ComplexMatrix lindblad_rhs(const MasterEquationModel& model, const ComplexMatrix& h, const ComplexMatrix& rho) {
  const int n = model.dim();
  if (h.rows() != n || h.cols() != n || rho.rows() != n || rho.cols() != n)
    throw ArgumentError(fmt::format("lindblad_rhs: expected {}x{} operands", n, n));

  const Complex minus_i(0.0, -1.0);
  ComplexMatrix out = minus_i * (h * rho - rho * h);

  const bool vac = model.include_vacuum();
  if (model.gamma_d > 0.0) {
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        if (i == j) continue;
        const bool touches_vacuum = vac && (i == 0 || j == 0);
        out(i, j) -= (touches_vacuum ? 0.5 : 1.0) * model.gamma_d * rho(i, j);
      }
  }
  if (model.gamma_l > 0.0) {
    // A_k = |0><k|:  A rho A^+ = rho_kk |0><0|;  {A^+A, rho} = |k><k| rho + rho |k><k|.
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        const double weight = (i == 0 ? 0.0 : 1.0) + (j == 0 ? 0.0 : 1.0);
        out(i, j) -= 0.5 * model.gamma_l * weight * rho(i, j);
      }
    for (int k = 1; k < n; ++k) out(0, 0) += model.gamma_l * rho(k, k);
  }
  return out;
}

linalg::SuperMatrix lindblad_superoperator(const MasterEquationModel& model, const ComplexMatrix& h) {
  const int n = model.dim();
  if (h.rows() != n || h.cols() != n) throw ArgumentError("lindblad_superoperator: Hamiltonian has wrong dimension");
  const Eigen::MatrixXcd hd = h;
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(n, n);

  // Row-major vec: vec(A X B) = (A kron B^T) vec(X).
  auto kron = [](const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
    Eigen::MatrixXcd out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
      for (Eigen::Index j = 0; j < a.cols(); ++j) out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
  };

  const Complex i_unit(0.0, 1.0);
  linalg::SuperMatrix l = -i_unit * kron(hd, id) + i_unit * kron(id, hd.transpose());

  auto add_dissipator = [&](const Eigen::MatrixXcd& a, double rate) {
    const Eigen::MatrixXcd ada = a.adjoint() * a;
    l += rate * (kron(a, a.conjugate()) - 0.5 * kron(ada, id) - 0.5 * kron(id, ada.transpose()));
  };

  if (model.gamma_d > 0.0) {
    for (int k = 1; k <= model.n_dots; ++k) {
      Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(n, n);
      a(model.dot_index(k), model.dot_index(k)) = 1.0;
      add_dissipator(a, model.gamma_d);
    }
  }
  if (model.gamma_l > 0.0) {
    for (int k = 1; k <= model.n_dots; ++k) {
      Eigen::MatrixXcd a = Eigen::MatrixXcd::Zero(n, n);
      a(0, model.dot_index(k)) = 1.0;
      add_dissipator(a, model.gamma_l);
    }
  }
  return l;
}

namespace {

void check_state(const MasterEquationModel& model, const ComplexMatrix& rho, std::size_t step_index) {
  (void)model;
  const double tr = rho.trace().real();
  // Every supported model is trace preserving: loss moves population into the vacuum level.
  if (std::abs(tr - 1.0) > 1e-9) throw NumericalError(fmt::format("trace drifted to {:.15g}", tr), step_index);
  Eigen::SelfAdjointEigenSolver<ComplexMatrix> solver(rho, Eigen::EigenvaluesOnly);
  if (solver.info() != Eigen::Success) throw NumericalError("positivity check did not converge", step_index);
  const double lowest = solver.eigenvalues()(0);
  if (lowest < -1e-8) throw NumericalError(fmt::format("density matrix lost positivity (eigenvalue {:.3e})", lowest), step_index);
}

}  // namespace

DensityMatrix step(const MasterEquationModel& model, const DensityMatrix& rho, std::span<const double> controls,
                   double dt, const StepOptions& options, std::size_t step_index) {
  if (!(dt > 0.0) || !std::isfinite(dt)) throw ArgumentError("step: dt must be positive and finite");
  if (rho.dim() != model.dim()) throw ArgumentError("step: state dimension does not match model");
  const ComplexMatrix h = build_hamiltonian(model, controls);

  ComplexMatrix next;
  if (options.method == Propagator::rk4) {
    if (options.n_substeps < 1) throw ArgumentError("step: n_substeps must be >= 1");
    const double hs = dt / options.n_substeps;
    next = rho.matrix();
    for (int s = 0; s < options.n_substeps; ++s) {
      const ComplexMatrix k1 = lindblad_rhs(model, h, next);
      const ComplexMatrix k2 = lindblad_rhs(model, h, next + (0.5 * hs) * k1);
      const ComplexMatrix k3 = lindblad_rhs(model, h, next + (0.5 * hs) * k2);
      const ComplexMatrix k4 = lindblad_rhs(model, h, next + hs * k3);
      next += (hs / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
  } else {
    const int n = model.dim();
    const linalg::SuperMatrix prop = linalg::expm(lindblad_superoperator(model, h) * dt);
    Eigen::VectorXcd v(n * n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) v(i * n + j) = rho(i, j);
    const Eigen::VectorXcd w = prop * v;
    next = ComplexMatrix(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) next(i, j) = w(i * n + j);
  }

  if (!next.allFinite()) throw NumericalError("non-finite density matrix", step_index);
  ComplexMatrix herm = 0.5 * (next + next.adjoint());
  if (options.check_invariants) check_state(model, herm, step_index);
  return DensityMatrix(std::move(herm));
}

Trajectory evolve(const MasterEquationModel& model, const pulses::PulseSchedule& schedule, const DensityMatrix& rho0,
                  const StepOptions& options) {
  schedule.validate();
  if (static_cast<int>(schedule.n_channels()) != model.n_controls())
    throw ArgumentError(fmt::format("evolve: schedule has {} channels, model needs {}", schedule.n_channels(), model.n_controls()));
  if (rho0.dim() != model.dim()) throw ArgumentError("evolve: initial state dimension does not match model");

  const std::size_t n = schedule.n_steps();
  const double dt = schedule.dt();
  Trajectory traj;
  traj.times.reserve(n + 1);
  traj.states.reserve(n + 1);
  traj.controls.reserve(n);
  traj.times.push_back(0.0);
  traj.states.push_back(rho0);
  for (std::size_t k = 0; k < n; ++k) {
    traj.controls.push_back(schedule.controls_at(k));
    traj.states.push_back(step(model, traj.states.back(), traj.controls.back(), dt, options, k));
    traj.times.push_back(k + 1 == n ? schedule.t_max : static_cast<double>(k + 1) * dt);
  }
  return traj;
}

double fidelity(const MasterEquationModel& model, const DensityMatrix& rho) {
  return rho.population(model.dot_index(model.n_dots));
}

double dot_trace(const MasterEquationModel& model, const DensityMatrix& rho) {
  double sum = 0.0;
  for (int k = 1; k <= model.n_dots; ++k) sum += rho.population(model.dot_index(k));
  return sum;
}

std::optional<double> time_to_population(const MasterEquationModel& model, const Trajectory& traj, int dot,
                                         double threshold) {
  const int idx = model.dot_index(dot);
  for (std::size_t k = 0; k < traj.states.size(); ++k)
    if (traj.states[k].population(idx) >= threshold) return traj.times[k];
  return std::nullopt;
}

TransferMetrics transfer_metrics(const MasterEquationModel& model, const Trajectory& traj, double transfer_threshold) {
  if (traj.states.empty()) throw ArgumentError("transfer_metrics: empty trajectory");
  TransferMetrics m;
  m.max_population.assign(static_cast<std::size_t>(model.n_dots), 0.0);
  for (const auto& s : traj.states) {
    for (int k = 1; k <= model.n_dots; ++k) {
      auto& slot = m.max_population[static_cast<std::size_t>(k - 1)];
      slot = std::max(slot, s.population(model.dot_index(k)));
    }
    m.trace_drift = std::max(m.trace_drift, std::abs(s.trace() - 1.0));
  }
  m.final_fidelity = fidelity(model, traj.states.back());
  m.final_dot_trace = dot_trace(model, traj.states.back());
  m.transfer_time = time_to_population(model, traj, model.n_dots, transfer_threshold);
  return m;
}

void write_trajectory_csv(std::ostream& out, const MasterEquationModel& model, const Trajectory& traj) {
  const int nc = model.n_controls();
  out << 't';
  for (int c = 1; c <= nc; ++c) out << ",omega_" << c;
  for (int k = 1; k <= model.n_dots; ++k) out << ",rho" << k << k;
  out << ",rho00,trace,re_rho13,im_rho13\n";

  auto num = [](double v) { return fmt::format("{:.12g}", v); };
  for (std::size_t r = 0; r < traj.states.size(); ++r) {
    const auto& s = traj.states[r];
    out << num(traj.times[r]);
    for (int c = 0; c < nc; ++c)
      out << ',' << num(r == 0 ? 0.0 : traj.controls[r - 1][static_cast<std::size_t>(c)]);
    for (int k = 1; k <= model.n_dots; ++k) out << ',' << num(s.population(model.dot_index(k)));
    out << ',' << num(model.include_vacuum() ? s.population(0) : 0.0);
    out << ',' << num(s.trace());
    const Complex c13 = s(model.dot_index(1), model.dot_index(3));
    out << ',' << num(c13.real()) << ',' << num(c13.imag()) << '\n';
  }
}

}  // namespace ctap::quantum
