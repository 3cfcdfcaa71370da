#include "ctap/linalg.hpp"

#include <cmath>

#include <unsupported/Eigen/MatrixFunctions>

#include "ctap/errors.hpp"

namespace ctap::linalg {

double hermiticity_defect(const ComplexMatrix& m) {
  if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
  double worst = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = i; j < m.cols(); ++j)
      worst = std::max(worst, std::abs(m(i, j) - std::conj(m(j, i))));
  return worst;
}

bool is_hermitian(const ComplexMatrix& m, double tol) { return hermiticity_defect(m) <= tol; }

HermitianEigen hermitian_eigs(const ComplexMatrix& m, double herm_tol) {
  if (m.rows() != m.cols() || m.rows() == 0) throw ArgumentError("hermitian_eigs: matrix must be square and non-empty");
  if (!is_hermitian(m, herm_tol)) throw ArgumentError("hermitian_eigs: matrix is not Hermitian");
  if (!m.allFinite()) throw NumericalError("hermitian_eigs: non-finite entries");

  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> solver(Eigen::MatrixXcd(m), Eigen::ComputeEigenvectors);
  if (solver.info() != Eigen::Success) throw NumericalError("hermitian_eigs: eigensolver did not converge");
  return {solver.eigenvalues(), solver.eigenvectors()};
}

SuperMatrix expm(const SuperMatrix& m) {
  if (m.rows() != m.cols()) throw ArgumentError("expm: matrix must be square");
  if (!m.allFinite()) throw NumericalError("expm: non-finite input");
  SuperMatrix out = m.exp();
  if (!out.allFinite()) throw NumericalError("expm: overflow");
  return out;
}

CgResult conjugate_gradient(const LinearOperator& apply, const Eigen::VectorXd& b, int max_iters,
                            double tol) {
  CgResult best{Eigen::VectorXd::Zero(b.size()), b.norm(), 0};
  const double b_norm = b.norm();
  if (b_norm == 0.0) return best;

  Eigen::VectorXd x = Eigen::VectorXd::Zero(b.size());
  Eigen::VectorXd r = b;
  Eigen::VectorXd p = r;
  double rr = r.squaredNorm();
  Eigen::VectorXd best_x = x;
  double best_rr = rr;
  int best_iter = 0;

  for (int k = 0; k < max_iters; ++k) {
    const Eigen::VectorXd ap = apply(p);
    const double pap = p.dot(ap);
    if (!std::isfinite(pap)) throw NumericalError("conjugate_gradient: non-finite curvature");
    if (pap <= 0.0) break;  // operator not positive definite along p
    const double step = rr / pap;
    x += step * p;
    r -= step * ap;
    if (!x.allFinite()) throw NumericalError("conjugate_gradient: non-finite iterate");

    const double rr_next = r.squaredNorm();
    if (rr_next < best_rr) {
      best_x = x;
      best_rr = rr_next;
      best_iter = k + 1;
    }
    if (std::sqrt(rr_next) <= tol * b_norm) break;
    p = r + (rr_next / rr) * p;
    rr = rr_next;
  }

  // The recursive residual drifts from the true one; report the true residual.
  best.residual_norm = best_iter == 0 ? b_norm : (apply(best_x) - b).norm();
  best.x = std::move(best_x);
  best.iterations = best_iter;
  return best;
}

}  // namespace ctap::linalg
