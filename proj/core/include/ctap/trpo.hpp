#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include <Eigen/Dense>

#include "ctap/config.hpp"
#include "ctap/mlp.hpp"
#include "ctap/policy.hpp"
#include "ctap/rng.hpp"

namespace ctap::agent {

struct TrpoConfig {
  double discount = 0.99;
  double gae_lambda = 0.97;
  double max_kl = 0.01;
  int cg_iters = 10;
  double cg_damping = 0.1;
  double backtrack_ratio = 0.8;
  int max_backtracks = 10;
  int episodes_per_batch = 20;
  int value_fit_epochs = 5;
  double value_lr = 1e-3;
  int value_minibatch = 64;
  int total_epochs = 5000;
  std::uint64_t seed = 0;

  /// Throws ArgumentError.
  void validate() const;
};

/// Reads every TrpoConfig field by name, e.g. `max_kl = 0.01`. Unknown keys are left for the caller.
TrpoConfig trpo_config_from_keys(const KeyValueFile& kv);

/// One rollout as seen by the learner.
struct Episode {
  std::vector<std::vector<double>> observations;
  std::vector<std::vector<double>> actions;  // unclipped samples
  std::vector<double> log_probs;             // under the sampling-time parameters
  std::vector<double> rewards;
  std::vector<double> values;                // baseline predictions, filled before GAE
  double final_fidelity = 0.0;
  double max_rho22 = 0.0;
};

struct GaeResult {
  Eigen::VectorXd raw_advantages;  // before normalization
  Eigen::VectorXd advantages;      // zero mean, unit variance over the batch
  Eigen::VectorXd returns;         // raw_advantages + values
};

/// delta_t = r_t + gamma V(s_{t+1}) - V(s_t), A_t = sum_k (gamma lambda)^k delta_{t+k}, with a zero
/// terminal value. Samples are flattened episode by episode. Throws ArgumentError on an empty batch.
GaeResult compute_gae(const std::vector<Episode>& episodes, double gamma, double lambda);

/// Flattened training tensors, one sample per column.
struct RolloutBatch {
  Eigen::MatrixXd observations;
  Eigen::MatrixXd actions;
  Eigen::VectorXd old_log_probs;
  Eigen::VectorXd advantages;
  Eigen::VectorXd returns;

  Eigen::Index size() const { return observations.cols(); }
};

RolloutBatch make_batch(const std::vector<Episode>& episodes, const GaeResult& gae);

/// State-value baseline. The network regresses standardized returns; offset and scale are fixed
/// from the first batch it is fitted on.
struct ValueFunction {
  Mlp net;
  double offset = 0.0;
  double scale = 1.0;
  bool calibrated = false;

  Eigen::VectorXd predict(const Eigen::MatrixXd& obs) const;
};

ValueFunction make_value_function(int obs_dim, const std::vector<int>& hidden, Rng& rng);

/// mean_i exp(log pi(a_i|s_i) - old_i) A_i; gradient with respect to policy.flat() when requested.
double surrogate_loss(const GaussianPolicy& policy, const RolloutBatch& batch, Eigen::VectorXd* grad = nullptr);

/// Mean over states of KL(old || policy) for diagonal Gaussians; gradient with respect to
/// policy.flat() when requested.
double mean_kl(const Eigen::MatrixXd& old_means, const Eigen::VectorXd& old_log_std, const GaussianPolicy& policy,
               const Eigen::MatrixXd& obs, Eigen::VectorXd* grad = nullptr);

/// Hessian of mean_kl at old == policy applied to v (exact Fisher form J^T M J v).
Eigen::VectorXd fisher_vector_product(const GaussianPolicy& policy, const Eigen::MatrixXd& obs, const Eigen::VectorXd& v);

/// mean (net(s) - (target - offset) / scale)^2 with gradient with respect to net.flat().
double value_loss(const ValueFunction& value, const Eigen::MatrixXd& obs, const Eigen::VectorXd& targets,
                  Eigen::VectorXd* grad = nullptr);

/// Adam on value_loss over shuffled minibatches. Calibrates offset/scale on first use.
/// Returns the loss after fitting.
double fit_value_function(ValueFunction& value, const Eigen::MatrixXd& obs, const Eigen::VectorXd& targets,
                          const TrpoConfig& cfg, Rng& rng);

struct UpdateStats {
  double surrogate_before = 0.0;
  double surrogate_after = 0.0;
  double kl = 0.0;
  bool accepted = false;
  int backtracks = 0;
  double grad_norm = 0.0;
  double cg_residual = 0.0;  // ||(F + damping I) s - g|| / ||g||
  double value_loss = 0.0;
};

/// One natural-gradient step inside the KL trust region, followed by a value refit.
/// Parameters are left unchanged when no backtracking candidate satisfies both KL <= max_kl and
/// a positive surrogate improvement. Throws NumericalError on non-finite gradients.
UpdateStats trpo_update(GaussianPolicy& policy, ValueFunction& value, const RolloutBatch& batch, const TrpoConfig& cfg,
                        Rng& rng);

}  // namespace ctap::agent
