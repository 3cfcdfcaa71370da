#pragma once

#include <complex>
#include <functional>

#include <Eigen/Dense>

namespace ctap::linalg {

using Complex = std::complex<double>;

/// Largest Hilbert-space dimension handled by the dense kernels (5 dots + vacuum fits comfortably).
inline constexpr int kMaxDim = 8;

/// Small dense complex matrix, row-major, stack-allocated up to kMaxDim x kMaxDim.
using ComplexMatrix =
    Eigen::Matrix<Complex, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor, kMaxDim, kMaxDim>;
using ComplexVector = Eigen::Matrix<Complex, Eigen::Dynamic, 1, Eigen::ColMajor, kMaxDim, 1>;

/// Heap-allocated matrix for vectorized superoperators (dim^2 x dim^2).
using SuperMatrix = Eigen::MatrixXcd;

bool is_hermitian(const ComplexMatrix& m, double tol);

/// Max-norm of m - m^H.
double hermiticity_defect(const ComplexMatrix& m);

struct HermitianEigen {
  Eigen::VectorXd values;    // ascending
  Eigen::MatrixXcd vectors;  // column k pairs with values[k]
};

/// Full eigendecomposition of a Hermitian matrix.
/// Throws ArgumentError when m is not Hermitian within herm_tol, NumericalError on non-convergence.
HermitianEigen hermitian_eigs(const ComplexMatrix& m, double herm_tol = 1e-10);

/// Matrix exponential by scaling and squaring with a Pade approximant.
/// Throws NumericalError on non-finite input or overflow.
SuperMatrix expm(const SuperMatrix& m);

using LinearOperator = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;

struct CgResult {
  Eigen::VectorXd x;
  double residual_norm = 0.0;  // ||A x - b||
  int iterations = 0;
};

/// Conjugate gradient for A x = b with A symmetric positive definite, given only as a callback.
/// Stops when ||A x - b|| <= tol * ||b|| or after max_iters; the returned iterate is the one with
/// the smallest residual seen.
CgResult conjugate_gradient(const LinearOperator& apply, const Eigen::VectorXd& b, int max_iters,
                            double tol);

}  // namespace ctap::linalg
