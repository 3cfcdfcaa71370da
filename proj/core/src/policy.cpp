#include "ctap/policy.hpp"

#include <cmath>
#include <numbers>

#include "ctap/errors.hpp"
#include "ctap/pulses.hpp"

namespace ctap::agent {

GaussianPolicy::GaussianPolicy(Mlp mean_net, Eigen::VectorXd log_std) : net_(std::move(mean_net)), log_std_(std::move(log_std)) {
  if (log_std_.size() != net_.output_dim()) throw ArgumentError("GaussianPolicy: log_std size must equal the action dim");
  if (!log_std_.allFinite()) throw ArgumentError("GaussianPolicy: log_std must be finite");
}

GaussianPolicy GaussianPolicy::initialized(int obs_dim, const std::vector<int>& hidden, int action_dim,
                                           double log_std_init, Rng& rng) {
  std::vector<int> dims{obs_dim};
  dims.insert(dims.end(), hidden.begin(), hidden.end());
  dims.push_back(action_dim);
  return GaussianPolicy(Mlp::initialized(dims, rng), Eigen::VectorXd::Constant(action_dim, log_std_init));
}

Eigen::VectorXd GaussianPolicy::flat() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(n_params()));
  const auto n = static_cast<Eigen::Index>(net_.n_params());
  out.head(n) = net_.flat();
  out.tail(log_std_.size()) = log_std_;
  return out;
}

void GaussianPolicy::set_flat(const Eigen::VectorXd& params) {
  if (params.size() != static_cast<Eigen::Index>(n_params())) throw ArgumentError("GaussianPolicy::set_flat: wrong parameter count");
  const auto n = static_cast<Eigen::Index>(net_.n_params());
  net_.set_flat(params.head(n));
  log_std_ = params.tail(log_std_.size());
}

Eigen::MatrixXd GaussianPolicy::means(const Eigen::MatrixXd& obs, Mlp::Cache* cache) const {
  const Eigen::MatrixXd raw = net_.forward(obs, cache);
  return (pulses::kOmegaMax / (1.0 + (-raw.array()).exp())).matrix();
}

GaussianPolicy::Output GaussianPolicy::forward(std::span<const double> obs) const {
  if (static_cast<int>(obs.size()) != obs_dim())
    throw ArgumentError("GaussianPolicy::forward: observation has " + std::to_string(obs.size()) + " entries, expected " +
                        std::to_string(obs_dim()));
  const Eigen::MatrixXd x = Eigen::Map<const Eigen::VectorXd>(obs.data(), static_cast<Eigen::Index>(obs.size()));
  return {means(x).col(0), log_std_};
}

double gaussian_log_prob(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std, std::span<const double> action) {
  const double half_log_2pi = 0.5 * std::log(2.0 * std::numbers::pi);
  double lp = 0.0;
  for (Eigen::Index j = 0; j < mean.size(); ++j) {
    const double z = (action[static_cast<std::size_t>(j)] - mean(j)) * std::exp(-log_std(j));
    lp += -0.5 * z * z - log_std(j) - half_log_2pi;
  }
  return lp;
}

ActionSample sample_action(const GaussianPolicy& policy, std::span<const double> obs, Rng& rng) {
  const auto out = policy.forward(obs);
  ActionSample s;
  s.action.resize(static_cast<std::size_t>(out.mean.size()));
  for (Eigen::Index j = 0; j < out.mean.size(); ++j)
    s.action[static_cast<std::size_t>(j)] = out.mean(j) + std::exp(out.log_std(j)) * rng.normal();
  s.log_prob = gaussian_log_prob(out.mean, out.log_std, s.action);
  return s;
}

}  // namespace ctap::agent
