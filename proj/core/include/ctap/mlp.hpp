#pragma once

#include <cstddef>
#include <vector>

#include <Eigen/Dense>

#include "ctap/rng.hpp"

namespace ctap::agent {

/// Fully connected network, ReLU on hidden layers and identity on the output.
///
/// Inputs are processed in batches with one sample per column. Parameters flatten layer by layer
/// as the row-major weight matrix followed by the bias.
class Mlp {
 public:
  struct Layer {
    Eigen::MatrixXd weight;  // out x in
    Eigen::VectorXd bias;
  };

  /// Intermediate values kept by forward() for backward() and jvp().
  struct Cache {
    std::vector<Eigen::MatrixXd> inputs;  // input to each layer
    std::vector<Eigen::MatrixXd> pre;     // pre-activation of each layer
  };

  Mlp() = default;

  /// All-zero parameters. Throws ArgumentError on fewer than two dims or a non-positive dim.
  explicit Mlp(std::vector<int> layer_dims);

  /// He-uniform hidden layers; the output layer is additionally scaled by output_scale.
  static Mlp initialized(std::vector<int> layer_dims, Rng& rng, double output_scale = 0.01);

  const std::vector<int>& layer_dims() const { return dims_; }
  int input_dim() const { return dims_.front(); }
  int output_dim() const { return dims_.back(); }
  std::size_t n_params() const;

  std::vector<Layer>& layers() { return layers_; }
  const std::vector<Layer>& layers() const { return layers_; }

  Eigen::VectorXd flat() const;
  void set_flat(const Eigen::VectorXd& params);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache* cache = nullptr) const;

  /// Gradient of sum_{o,b} d_out(o,b) * out(o,b) with respect to the flat parameters.
  Eigen::VectorXd backward(const Cache& cache, const Eigen::MatrixXd& d_out) const;

  /// Directional derivative of the outputs along a flat parameter direction.
  Eigen::MatrixXd jvp(const Cache& cache, const Eigen::VectorXd& direction) const;

  bool all_finite() const;

 private:
  std::vector<int> dims_;
  std::vector<Layer> layers_;
};

}  // namespace ctap::agent
