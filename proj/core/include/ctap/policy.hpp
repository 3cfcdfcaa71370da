#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "ctap/mlp.hpp"
#include "ctap/rng.hpp"

namespace ctap::agent {

/// Diagonal Gaussian policy with a state-independent log standard deviation.
/// Means are squashed into (0, Omega_max) by a scaled sigmoid of the network output.
class GaussianPolicy {
 public:
  struct Output {
    Eigen::VectorXd mean;
    Eigen::VectorXd log_std;
  };

  GaussianPolicy() = default;
  GaussianPolicy(Mlp mean_net, Eigen::VectorXd log_std);

  static GaussianPolicy initialized(int obs_dim, const std::vector<int>& hidden, int action_dim, double log_std_init,
                                    Rng& rng);

  const Mlp& mean_net() const { return net_; }
  Mlp& mean_net() { return net_; }
  const Eigen::VectorXd& log_std() const { return log_std_; }
  Eigen::VectorXd& log_std() { return log_std_; }

  int obs_dim() const { return net_.input_dim(); }
  int action_dim() const { return net_.output_dim(); }
  std::size_t n_params() const { return net_.n_params() + static_cast<std::size_t>(log_std_.size()); }

  /// Network parameters followed by log_std.
  Eigen::VectorXd flat() const;
  void set_flat(const Eigen::VectorXd& params);

  /// Throws ArgumentError when obs has the wrong length.
  Output forward(std::span<const double> obs) const;

  /// Means for a batch (one observation per column); returns action_dim x batch.
  Eigen::MatrixXd means(const Eigen::MatrixXd& obs, Mlp::Cache* cache = nullptr) const;

 private:
  Mlp net_;
  Eigen::VectorXd log_std_;
};

struct ActionSample {
  std::vector<double> action;  // unclipped
  double log_prob = 0.0;
};

double gaussian_log_prob(const Eigen::VectorXd& mean, const Eigen::VectorXd& log_std, std::span<const double> action);

/// mean + exp(log_std) * N(0, 1), and its log-density.
ActionSample sample_action(const GaussianPolicy& policy, std::span<const double> obs, Rng& rng);

}  // namespace ctap::agent
