#include "ctap/trpo.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

#include "ctap/errors.hpp"
#include "ctap/linalg.hpp"
#include "ctap/pulses.hpp"

namespace ctap::agent {

namespace {

void copy_columns(const std::vector<std::vector<double>>& cols, Eigen::Index rows, Eigen::MatrixXd& out,
                  Eigen::Index offset) {
  for (std::size_t i = 0; i < cols.size(); ++i) {
    if (static_cast<Eigen::Index>(cols[i].size()) != rows) throw ArgumentError("make_batch: ragged episode data");
    out.col(offset + static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXd>(cols[i].data(), rows);
  }
}

// d mean / d raw for the scaled sigmoid
Eigen::ArrayXXd squash_slope(const Eigen::MatrixXd& means) {
  return means.array() * (1.0 - means.array() / pulses::kOmegaMax);
}

Eigen::VectorXd log_probs(const Eigen::MatrixXd& means, const Eigen::VectorXd& log_std, const Eigen::MatrixXd& actions) {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  const Eigen::ArrayXd inv_std = (-log_std.array()).exp();
  const Eigen::ArrayXXd z = (actions - means).array().colwise() * inv_std;
  return (-0.5 * z.square().colwise().sum()).matrix().transpose().array() - (log_std.sum() + half_log_2pi * log_std.size());
}

void require_finite(const Eigen::VectorXd& v, const char* what) {
  if (!v.allFinite()) throw NumericalError(std::string("trpo_update: non-finite ") + what);
}

}  // namespace

void TrpoConfig::validate() const {
  auto fail = [](const std::string& m) { throw ArgumentError("TrpoConfig: " + m); };
  if (!(discount > 0.0 && discount <= 1.0)) fail("discount must lie in (0, 1]");
  if (!(gae_lambda > 0.0 && gae_lambda <= 1.0)) fail("gae_lambda must lie in (0, 1]");
  if (!(max_kl > 0.0) || !std::isfinite(max_kl)) fail("max_kl must be positive");
  if (cg_iters < 1) fail("cg_iters must be positive");
  if (!(cg_damping >= 0.0) || !std::isfinite(cg_damping)) fail("cg_damping must be non-negative");
  if (!(backtrack_ratio > 0.0 && backtrack_ratio < 1.0)) fail("backtrack_ratio must lie in (0, 1)");
  if (max_backtracks < 1) fail("max_backtracks must be positive");
  if (episodes_per_batch < 1) fail("episodes_per_batch must be positive");
  if (value_fit_epochs < 0) fail("value_fit_epochs must be non-negative");
  if (!(value_lr > 0.0) || !std::isfinite(value_lr)) fail("value_lr must be positive");
  if (value_minibatch < 1) fail("value_minibatch must be positive");
  if (total_epochs < 0) fail("total_epochs must be non-negative");
}

TrpoConfig trpo_config_from_keys(const KeyValueFile& kv) {
  TrpoConfig c;
  auto real = [&](const char* key, double& dst) {
    if (auto v = kv.get_double(key)) dst = *v;
  };
  auto integer = [&](const char* key, int& dst) {
    if (auto v = kv.get_int(key)) dst = static_cast<int>(*v);
  };
  real("discount", c.discount);
  real("gae_lambda", c.gae_lambda);
  real("max_kl", c.max_kl);
  integer("cg_iters", c.cg_iters);
  real("cg_damping", c.cg_damping);
  real("backtrack_ratio", c.backtrack_ratio);
  integer("max_backtracks", c.max_backtracks);
  integer("episodes_per_batch", c.episodes_per_batch);
  integer("value_fit_epochs", c.value_fit_epochs);
  real("value_lr", c.value_lr);
  integer("value_minibatch", c.value_minibatch);
  integer("total_epochs", c.total_epochs);
  if (auto v = kv.get_int("seed")) {
    if (*v < 0) throw ConfigError("seed must be non-negative", 0, "seed");
    c.seed = static_cast<std::uint64_t>(*v);
  }
  try {
    c.validate();
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  return c;
}

GaeResult compute_gae(const std::vector<Episode>& episodes, double gamma, double lambda) {
  std::size_t total = 0;
  for (const auto& ep : episodes) {
    if (ep.values.size() != ep.rewards.size()) throw ArgumentError("compute_gae: values and rewards differ in length");
    total += ep.rewards.size();
  }
  if (total == 0) throw ArgumentError("compute_gae: empty batch");

  GaeResult out;
  out.raw_advantages.resize(static_cast<Eigen::Index>(total));
  out.returns.resize(static_cast<Eigen::Index>(total));
  Eigen::Index offset = 0;
  for (const auto& ep : episodes) {
    const auto n = static_cast<Eigen::Index>(ep.rewards.size());
    double running = 0.0;
    for (Eigen::Index t = n - 1; t >= 0; --t) {
      const auto ut = static_cast<std::size_t>(t);
      const double next_v = t + 1 < n ? ep.values[ut + 1] : 0.0;
      const double delta = ep.rewards[ut] + gamma * next_v - ep.values[ut];
      running = delta + gamma * lambda * running;
      out.raw_advantages(offset + t) = running;
      out.returns(offset + t) = running + ep.values[ut];
    }
    offset += n;
  }

  const double mean = out.raw_advantages.mean();
  const Eigen::ArrayXd centered = out.raw_advantages.array() - mean;
  const double std = std::sqrt(centered.square().mean());
  out.advantages = std > 1e-12 ? Eigen::VectorXd(centered / std) : Eigen::VectorXd(centered);
  return out;
}

RolloutBatch make_batch(const std::vector<Episode>& episodes, const GaeResult& gae) {
  std::size_t total = 0;
  for (const auto& ep : episodes) total += ep.rewards.size();
  if (total == 0) throw ArgumentError("make_batch: empty batch");
  if (static_cast<Eigen::Index>(total) != gae.advantages.size()) throw ArgumentError("make_batch: GAE size mismatch");

  const auto obs_dim = static_cast<Eigen::Index>(episodes.front().observations.front().size());
  const auto act_dim = static_cast<Eigen::Index>(episodes.front().actions.front().size());
  RolloutBatch b;
  b.observations.resize(obs_dim, static_cast<Eigen::Index>(total));
  b.actions.resize(act_dim, static_cast<Eigen::Index>(total));
  b.old_log_probs.resize(static_cast<Eigen::Index>(total));
  Eigen::Index offset = 0;
  for (const auto& ep : episodes) {
    const auto n = ep.rewards.size();
    if (ep.observations.size() != n || ep.actions.size() != n || ep.log_probs.size() != n)
      throw ArgumentError("make_batch: episode fields differ in length");
    copy_columns(ep.observations, obs_dim, b.observations, offset);
    copy_columns(ep.actions, act_dim, b.actions, offset);
    b.old_log_probs.segment(offset, static_cast<Eigen::Index>(n)) =
        Eigen::Map<const Eigen::VectorXd>(ep.log_probs.data(), static_cast<Eigen::Index>(n));
    offset += static_cast<Eigen::Index>(n);
  }
  b.advantages = gae.advantages;
  b.returns = gae.returns;
  return b;
}

Eigen::VectorXd ValueFunction::predict(const Eigen::MatrixXd& obs) const {
  return (net.forward(obs).row(0).transpose().array() * scale + offset).matrix();
}

ValueFunction make_value_function(int obs_dim, const std::vector<int>& hidden, Rng& rng) {
  std::vector<int> dims{obs_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(1);
  ValueFunction v;
  v.net = Mlp::initialized(dims, rng, 1.0);
  return v;
}

double surrogate_loss(const GaussianPolicy& policy, const RolloutBatch& batch, Eigen::VectorXd* grad) {
  const auto n = static_cast<double>(batch.size());
  Mlp::Cache cache;
  const Eigen::MatrixXd mu = policy.means(batch.observations, grad ? &cache : nullptr);
  const Eigen::VectorXd lp = log_probs(mu, policy.log_std(), batch.actions);
  const Eigen::ArrayXd ratio = (lp - batch.old_log_probs).array().exp();
  const Eigen::ArrayXd weighted = ratio * batch.advantages.array();
  const double loss = weighted.mean();
  if (grad) {
    const Eigen::ArrayXd inv_var = (-2.0 * policy.log_std().array()).exp();
    const Eigen::ArrayXXd diff = (batch.actions - mu).array();
    // d lp / d mu = (a - mu) / sigma^2 ; d lp / d log_std = z^2 - 1
    Eigen::ArrayXXd d_mu = diff.colwise() * inv_var;
    d_mu.rowwise() *= (weighted / n).transpose();
    const Eigen::MatrixXd d_raw = (d_mu * squash_slope(mu)).matrix();
    const Eigen::ArrayXXd z2 = diff.square().colwise() * inv_var;
    const Eigen::VectorXd d_log_std = ((z2 - 1.0).rowwise() * (weighted / n).transpose()).rowwise().sum().matrix();
    grad->resize(static_cast<Eigen::Index>(policy.n_params()));
    const auto np = static_cast<Eigen::Index>(policy.mean_net().n_params());
    grad->head(np) = policy.mean_net().backward(cache, d_raw);
    grad->tail(d_log_std.size()) = d_log_std;
  }
  return loss;
}

double mean_kl(const Eigen::MatrixXd& old_means, const Eigen::VectorXd& old_log_std, const GaussianPolicy& policy,
               const Eigen::MatrixXd& obs, Eigen::VectorXd* grad) {
  const auto n = static_cast<double>(obs.cols());
  Mlp::Cache cache;
  const Eigen::MatrixXd mu = policy.means(obs, grad ? &cache : nullptr);
  const Eigen::ArrayXd ls = policy.log_std().array();
  const Eigen::ArrayXd inv_var = (-2.0 * ls).exp();
  const Eigen::ArrayXd old_var = (2.0 * old_log_std.array()).exp();
  const Eigen::ArrayXXd diff = (old_means - mu).array();
  const Eigen::ArrayXXd quad = (diff.square().colwise() + old_var).colwise() * inv_var;
  // per dim: log(s_new / s_old) + (s_old^2 + (m_old - m_new)^2) / (2 s_new^2) - 1/2
  const double kl = (ls - old_log_std.array()).sum() + (0.5 * quad.rowwise().sum()).sum() / n -
                    0.5 * static_cast<double>(ls.size());
  if (grad) {
    const Eigen::ArrayXXd d_mu = (-diff).colwise() * inv_var / n;
    const Eigen::MatrixXd d_raw = (d_mu * squash_slope(mu)).matrix();
    const Eigen::VectorXd d_log_std = (1.0 - quad.rowwise().sum() / n).matrix();
    grad->resize(static_cast<Eigen::Index>(policy.n_params()));
    const auto np = static_cast<Eigen::Index>(policy.mean_net().n_params());
    grad->head(np) = policy.mean_net().backward(cache, d_raw);
    grad->tail(d_log_std.size()) = d_log_std;
  }
  return kl;
}

Eigen::VectorXd fisher_vector_product(const GaussianPolicy& policy, const Eigen::MatrixXd& obs, const Eigen::VectorXd& v) {
  if (v.size() != static_cast<Eigen::Index>(policy.n_params())) throw ArgumentError("fisher_vector_product: wrong vector size");
  const auto n = static_cast<double>(obs.cols());
  const auto np = static_cast<Eigen::Index>(policy.mean_net().n_params());
  const auto na = policy.log_std().size();
  Mlp::Cache cache;
  const Eigen::MatrixXd mu = policy.means(obs, &cache);
  const Eigen::ArrayXXd slope = squash_slope(mu);
  const Eigen::ArrayXXd j_mu = policy.mean_net().jvp(cache, v.head(np)).array() * slope;
  const Eigen::ArrayXd inv_var = (-2.0 * policy.log_std().array()).exp();
  const Eigen::MatrixXd d_raw = ((j_mu.colwise() * inv_var) * slope / n).matrix();
  Eigen::VectorXd out(v.size());
  out.head(np) = policy.mean_net().backward(cache, d_raw);
  out.tail(na) = 2.0 * v.tail(na);
  return out;
}

double value_loss(const ValueFunction& value, const Eigen::MatrixXd& obs, const Eigen::VectorXd& targets,
                  Eigen::VectorXd* grad) {
  const auto n = static_cast<double>(obs.cols());
  Mlp::Cache cache;
  const Eigen::RowVectorXd pred = value.net.forward(obs, grad ? &cache : nullptr).row(0);
  const Eigen::RowVectorXd y = ((targets.array() - value.offset) / value.scale).matrix().transpose();
  const Eigen::RowVectorXd err = pred - y;
  if (grad) *grad = value.net.backward(cache, 2.0 / n * err);
  return err.squaredNorm() / n;
}

double fit_value_function(ValueFunction& value, const Eigen::MatrixXd& obs, const Eigen::VectorXd& targets,
                          const TrpoConfig& cfg, Rng& rng) {
  if (obs.cols() != targets.size() || obs.cols() == 0) throw ArgumentError("fit_value_function: bad batch");
  if (!value.calibrated) {
    value.offset = targets.mean();
    const double sd = std::sqrt((targets.array() - value.offset).square().mean());
    value.scale = sd > 1e-8 ? sd : 1.0;
    value.calibrated = true;
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, eps = 1e-8;
  Eigen::VectorXd theta = value.net.flat();
  Eigen::VectorXd m = Eigen::VectorXd::Zero(theta.size());
  Eigen::VectorXd s = Eigen::VectorXd::Zero(theta.size());
  std::vector<Eigen::Index> order(static_cast<std::size_t>(obs.cols()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  int t = 0;
  Eigen::VectorXd g;
  for (int epoch = 0; epoch < cfg.value_fit_epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.index(i)]);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.value_minibatch)) {
      const std::size_t stop = std::min(order.size(), start + static_cast<std::size_t>(cfg.value_minibatch));
      const auto k = static_cast<Eigen::Index>(stop - start);
      Eigen::MatrixXd xb(obs.rows(), k);
      Eigen::VectorXd yb(k);
      for (Eigen::Index j = 0; j < k; ++j) {
        xb.col(j) = obs.col(order[start + static_cast<std::size_t>(j)]);
        yb(j) = targets(order[start + static_cast<std::size_t>(j)]);
      }
      value_loss(value, xb, yb, &g);
      if (!g.allFinite()) throw NumericalError("fit_value_function: non-finite gradient");
      ++t;
      m = beta1 * m + (1.0 - beta1) * g;
      s = beta2 * s + (1.0 - beta2) * g.cwiseAbs2();
      const double c1 = 1.0 - std::pow(beta1, t), c2 = 1.0 - std::pow(beta2, t);
      theta.array() -= cfg.value_lr * (m.array() / c1) / ((s.array() / c2).sqrt() + eps);
      value.net.set_flat(theta);
    }
  }
  return value_loss(value, obs, targets);
}

UpdateStats trpo_update(GaussianPolicy& policy, ValueFunction& value, const RolloutBatch& batch, const TrpoConfig& cfg,
                        Rng& rng) {
  if (batch.size() == 0) throw ArgumentError("trpo_update: empty batch");
  if (batch.observations.rows() != policy.obs_dim() || batch.actions.rows() != policy.action_dim())
    throw ArgumentError("trpo_update: batch shape does not match the policy");

  UpdateStats stats;
  const Eigen::VectorXd theta_old = policy.flat();
  const Eigen::MatrixXd old_means = policy.means(batch.observations);
  const Eigen::VectorXd old_log_std = policy.log_std();

  Eigen::VectorXd g;
  stats.surrogate_before = surrogate_loss(policy, batch, &g);
  stats.surrogate_after = stats.surrogate_before;
  require_finite(g, "policy gradient");
  stats.grad_norm = g.norm();

  if (stats.grad_norm > 0.0) {
    auto fvp = [&](const Eigen::VectorXd& v) {
      return Eigen::VectorXd(fisher_vector_product(policy, batch.observations, v) + cfg.cg_damping * v);
    };
    const auto cg = linalg::conjugate_gradient(fvp, g, cfg.cg_iters, 1e-10);
    require_finite(cg.x, "natural-gradient direction");
    stats.cg_residual = cg.residual_norm / stats.grad_norm;

    double shs = cg.x.dot(fisher_vector_product(policy, batch.observations, cg.x));
    if (!(shs > 0.0)) shs = cg.x.dot(fvp(cg.x));
    if (shs > 0.0 && std::isfinite(shs)) {
      const Eigen::VectorXd full_step = std::sqrt(2.0 * cfg.max_kl / shs) * cg.x;
      double frac = 1.0;
      for (int k = 0; k < cfg.max_backtracks; ++k, frac *= cfg.backtrack_ratio) {
        policy.set_flat(theta_old + frac * full_step);
        const double kl = mean_kl(old_means, old_log_std, policy, batch.observations);
        const double surr = surrogate_loss(policy, batch);
        if (std::isfinite(kl) && std::isfinite(surr) && kl <= cfg.max_kl && surr - stats.surrogate_before > 0.0) {
          stats.accepted = true;
          stats.backtracks = k;
          stats.kl = kl;
          stats.surrogate_after = surr;
          break;
        }
      }
      if (!stats.accepted) {
        policy.set_flat(theta_old);
        stats.backtracks = cfg.max_backtracks;
      }
    }
  }

  stats.value_loss = fit_value_function(value, batch.observations, batch.returns, cfg, rng);
  return stats;
}

}  // namespace ctap::agent
