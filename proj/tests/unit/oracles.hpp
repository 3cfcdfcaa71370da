#pragma once

// Plain-loop reference implementations used as test oracles. Nothing here touches Eigen or
// ctap_core, so a bug in the library cannot leak into its own check.

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <stdexcept>
#include <utility>
#include <vector>

namespace oracle {

using cplx = std::complex<double>;

struct CMat {
  int n = 0;
  std::vector<cplx> a;
  explicit CMat(int n_ = 0) : n(n_), a(static_cast<std::size_t>(n_ * n_)) {}
  cplx& operator()(int i, int j) { return a[static_cast<std::size_t>(i * n + j)]; }
  cplx operator()(int i, int j) const { return a[static_cast<std::size_t>(i * n + j)]; }
};

inline CMat mul(const CMat& x, const CMat& y) {
  CMat out(x.n);
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j) {
      cplx s = 0;
      for (int k = 0; k < x.n; ++k) s += x(i, k) * y(k, j);
      out(i, j) = s;
    }
  return out;
}

inline CMat dagger(const CMat& x) {
  CMat out(x.n);
  for (int i = 0; i < x.n; ++i)
    for (int j = 0; j < x.n; ++j) out(i, j) = std::conj(x(j, i));
  return out;
}

inline CMat add(const CMat& x, const CMat& y, cplx sy = 1.0) {
  CMat out(x.n);
  for (std::size_t k = 0; k < x.a.size(); ++k) out.a[k] = x.a[k] + sy * y.a[k];
  return out;
}

// -i[H, rho] + sum_k L rho L^+ - 1/2 {L^+ L, rho}
inline CMat lindblad(const CMat& h, const CMat& rho, const std::vector<CMat>& jumps) {
  const cplx mi(0.0, -1.0);
  CMat out = add(mul(h, rho), mul(rho, h), -1.0);
  for (auto& v : out.a) v *= mi;
  for (const CMat& l : jumps) {
    const CMat ld = dagger(l);
    const CMat ldl = mul(ld, l);
    out = add(out, mul(mul(l, rho), ld));
    out = add(out, add(mul(ldl, rho), mul(rho, ldl)), -0.5);
  }
  return out;
}

// Taylor series with scaling and squaring; slow but obviously correct for small matrices.
inline CMat expm_taylor(const CMat& m) {
  double norm = 0;
  for (auto v : m.a) norm = std::max(norm, std::abs(v));
  int s = 0;
  while (norm * m.n > 0.25) {
    norm /= 2;
    ++s;
  }
  CMat x = m;
  for (auto& v : x.a) v = std::ldexp(1.0, -s) * v;
  CMat result(m.n), term(m.n);
  for (int i = 0; i < m.n; ++i) result(i, i) = term(i, i) = 1.0;
  for (int k = 1; k < 40; ++k) {
    term = mul(term, x);
    for (auto& v : term.a) v /= static_cast<double>(k);
    result = add(result, term);
  }
  for (int i = 0; i < s; ++i) result = mul(result, result);
  return result;
}

// Gaussian elimination with partial pivoting on a dense row-major system.
inline std::vector<double> solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t p = c;
    for (std::size_t r = c + 1; r < n; ++r)
      if (std::abs(a[r][c]) > std::abs(a[p][c])) p = r;
    if (a[p][c] == 0.0) throw std::runtime_error("singular");
    std::swap(a[p], a[c]);
    std::swap(b[p], b[c]);
    for (std::size_t r = c + 1; r < n; ++r) {
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a[i][k] * x[k];
    x[i] = s / a[i][i];
  }
  return x;
}

// Real roots of a monic cubic x^3 + c2 x^2 + c1 x + c0 by scanning for sign changes and bisecting.
inline std::vector<double> cubic_roots(double c2, double c1, double c0) {
  auto p = [&](double x) { return ((x + c2) * x + c1) * x + c0; };
  const double bound = 1.0 + std::max({std::abs(c2), std::abs(c1), std::abs(c0)});
  const int n = 200000;
  std::vector<double> roots;
  double x0 = -bound, p0 = p(x0);
  for (int i = 1; i <= n; ++i) {
    const double x1 = -bound + 2.0 * bound * i / n, p1 = p(x1);
    if (p0 == 0.0) {
      roots.push_back(x0);
    } else if ((p0 < 0) != (p1 < 0) && p1 != 0.0) {
      double lo = x0, hi = x1;
      for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if ((p(mid) < 0) == (p(lo) < 0)) lo = mid; else hi = mid;
      }
      roots.push_back(0.5 * (lo + hi));
    }
    x0 = x1;
    p0 = p1;
  }
  return roots;
}

// Characteristic polynomial of a 3x3 Hermitian matrix: x^3 - tr x^2 + (sum of 2x2 minors) x - det.
inline std::vector<double> hermitian3_eigenvalues(const CMat& h) {
  auto r = [&](int i, int j) { return h(i, j); };
  const cplx tr = r(0, 0) + r(1, 1) + r(2, 2);
  const cplx minors = r(0, 0) * r(1, 1) - r(0, 1) * r(1, 0) + r(0, 0) * r(2, 2) - r(0, 2) * r(2, 0) +
                      r(1, 1) * r(2, 2) - r(1, 2) * r(2, 1);
  const cplx det = r(0, 0) * (r(1, 1) * r(2, 2) - r(1, 2) * r(2, 1)) -
                   r(0, 1) * (r(1, 0) * r(2, 2) - r(1, 2) * r(2, 0)) +
                   r(0, 2) * (r(1, 0) * r(2, 1) - r(1, 1) * r(2, 0));
  return cubic_roots(-tr.real(), minors.real(), -det.real());
}

// A_t = sum_k (gamma lambda)^k delta_{t+k}, delta_t = r_t + gamma V_{t+1} - V_t, V_T = 0.
inline std::vector<double> gae_direct(const std::vector<double>& r, const std::vector<double>& v, double gamma,
                                      double lambda) {
  const std::size_t n = r.size();
  std::vector<double> out(n, 0.0);
  for (std::size_t t = 0; t < n; ++t) {
    double weight = 1.0;
    for (std::size_t k = t; k < n; ++k) {
      const double next = k + 1 < n ? v[k + 1] : 0.0;
      out[t] += weight * (r[k] + gamma * next - v[k]);
      weight *= gamma * lambda;
    }
  }
  return out;
}

// Central difference gradient of f at x, step h per coordinate.
inline std::vector<double> central_gradient(const std::function<double(const std::vector<double>&)>& f,
                                            std::vector<double> x, double h) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

}  // namespace oracle
