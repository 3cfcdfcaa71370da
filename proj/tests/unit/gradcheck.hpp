#pragma once

// Central-difference checks of the analytic gradients on random (5, 8, 2) networks. Shared by the
// unit tests and the acceptance runner.

#include <algorithm>
#include <cmath>

#include "ctap/policy.hpp"
#include "ctap/rng.hpp"
#include "ctap/trpo.hpp"
#include "oracles.hpp"

namespace gradcheck {

struct Report {
  double surrogate = 0.0;  // worst relative error over all trials
  double kl = 0.0;
  double value = 0.0;
  double mean = 0.0;
};

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }
inline Eigen::VectorXd to_eigen(const std::vector<double>& v) {
  return Eigen::Map<const Eigen::VectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
}

inline double rel_error(const Eigen::VectorXd& analytic, const std::vector<double>& numeric) {
  const Eigen::VectorXd n = to_eigen(numeric);
  const double scale = std::max({analytic.norm(), n.norm(), 1e-12});
  return (analytic - n).norm() / scale;
}

inline ctap::agent::GaussianPolicy random_policy(ctap::Rng& rng) {
  auto p = ctap::agent::GaussianPolicy::initialized(5, {8}, 2, std::log(0.3), rng);
  Eigen::VectorXd theta(static_cast<Eigen::Index>(p.n_params()));
  for (auto& v : theta) v = 0.6 * rng.normal();
  for (Eigen::Index i = theta.size() - 2; i < theta.size(); ++i) theta[i] = rng.uniform(-1.5, 0.0);
  p.set_flat(theta);
  return p;
}

inline Eigen::MatrixXd random_obs(int n, ctap::Rng& rng) {
  Eigen::MatrixXd obs(5, n);
  for (auto& v : obs.reshaped()) v = rng.uniform(-1, 1);
  return obs;
}

inline Report run(int trials, std::uint64_t seed) {
  using namespace ctap::agent;
  ctap::Rng rng(seed);
  Report worst;
  const double h = 1e-6;
  for (int t = 0; t < trials; ++t) {
    GaussianPolicy pol = random_policy(rng);
    const int n = 12;

    RolloutBatch batch;
    batch.observations = random_obs(n, rng);
    batch.actions.resize(2, n);
    batch.old_log_probs.resize(n);
    batch.advantages.resize(n);
    const Eigen::MatrixXd mu0 = pol.means(batch.observations);
    for (int i = 0; i < n; ++i) {
      for (int a = 0; a < 2; ++a) batch.actions(a, i) = mu0(a, i) + 0.3 * rng.normal();
      batch.advantages[i] = rng.normal();
      batch.old_log_probs[i] = rng.uniform(-1, 1);
    }
    batch.returns = batch.advantages;

    const Eigen::VectorXd theta = pol.flat();
    auto with = [&](const std::vector<double>& x) {
      GaussianPolicy q = pol;
      q.set_flat(to_eigen(x));
      return q;
    };

    Eigen::VectorXd g;
    surrogate_loss(pol, batch, &g);
    const auto gs = oracle::central_gradient([&](const std::vector<double>& x) { return surrogate_loss(with(x), batch); },
                                             to_std(theta), h);
    worst.surrogate = std::max(worst.surrogate, rel_error(g, gs));

    // KL against a perturbed reference so the gradient is not identically zero
    GaussianPolicy old = pol;
    Eigen::VectorXd shifted = theta;
    for (auto& v : shifted) v += 0.05 * rng.normal();
    old.set_flat(shifted);
    const Eigen::MatrixXd old_mu = old.means(batch.observations);
    mean_kl(old_mu, old.log_std(), pol, batch.observations, &g);
    const auto gk = oracle::central_gradient(
        [&](const std::vector<double>& x) { return mean_kl(old_mu, old.log_std(), with(x), batch.observations); },
        to_std(theta), h);
    worst.kl = std::max(worst.kl, rel_error(g, gk));

    ValueFunction vf = make_value_function(5, {8}, rng);
    Eigen::VectorXd w(static_cast<Eigen::Index>(vf.net.n_params()));
    for (auto& v : w) v = 0.6 * rng.normal();
    vf.net.set_flat(w);
    vf.offset = 0.3;
    vf.scale = 1.7;
    const Eigen::VectorXd targets = 2.0 * Eigen::VectorXd::Random(n);
    value_loss(vf, batch.observations, targets, &g);
    const auto gv = oracle::central_gradient(
        [&](const std::vector<double>& x) {
          ValueFunction q = vf;
          q.net.set_flat(to_eigen(x));
          return value_loss(q, batch.observations, targets);
        },
        to_std(w), h);
    worst.value = std::max(worst.value, rel_error(g, gv));

    // mean of one action component for one observation, through the sigmoid squash
    Mlp::Cache cache;
    const Eigen::MatrixXd one = batch.observations.col(0);
    pol.means(one, &cache);
    const int comp = t % 2;
    const Eigen::VectorXd net_theta = pol.mean_net().flat();
    const auto gm = oracle::central_gradient(
        [&](const std::vector<double>& x) {
          GaussianPolicy q = pol;
          q.mean_net().set_flat(to_eigen(x));
          return q.means(one)(comp, 0);
        },
        to_std(net_theta), h);
    // d mean / d raw = mean (1 - mean / Omega_max) for the scaled sigmoid with Omega_max = 1
    const double m = pol.means(one)(comp, 0);
    Eigen::MatrixXd d_out = Eigen::MatrixXd::Zero(2, 1);
    d_out(comp, 0) = m * (1.0 - m);
    worst.mean = std::max(worst.mean, rel_error(pol.mean_net().backward(cache, d_out), gm));
  }
  return worst;
}

}  // namespace gradcheck
