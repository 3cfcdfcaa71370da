#include "ctap/mlp.hpp"

#include <cmath>

#include "ctap/errors.hpp"

namespace ctap::agent {

Mlp::Mlp(std::vector<int> layer_dims) : dims_(std::move(layer_dims)) {
  if (dims_.size() < 2) throw ArgumentError("Mlp: need at least input and output dims");
  for (int d : dims_)
    if (d <= 0) throw ArgumentError("Mlp: layer dims must be positive");
  for (std::size_t l = 0; l + 1 < dims_.size(); ++l)
    layers_.push_back({Eigen::MatrixXd::Zero(dims_[l + 1], dims_[l]), Eigen::VectorXd::Zero(dims_[l + 1])});
}

Mlp Mlp::initialized(std::vector<int> layer_dims, Rng& rng, double output_scale) {
  Mlp net(std::move(layer_dims));
  for (std::size_t l = 0; l < net.layers_.size(); ++l) {
    auto& w = net.layers_[l].weight;
    const double limit = std::sqrt(6.0 / static_cast<double>(w.cols())) * (l + 1 == net.layers_.size() ? output_scale : 1.0);
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rng.uniform(-limit, limit);
  }
  return net;
}

std::size_t Mlp::n_params() const {
  std::size_t n = 0;
  for (const auto& layer : layers_) n += static_cast<std::size_t>(layer.weight.size() + layer.bias.size());
  return n;
}

Eigen::VectorXd Mlp::flat() const {
  Eigen::VectorXd out(static_cast<Eigen::Index>(n_params()));
  Eigen::Index pos = 0;
  for (const auto& layer : layers_) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) out(pos++) = layer.weight(r, c);
    out.segment(pos, layer.bias.size()) = layer.bias;
    pos += layer.bias.size();
  }
  return out;
}

void Mlp::set_flat(const Eigen::VectorXd& params) {
  if (params.size() != static_cast<Eigen::Index>(n_params())) throw ArgumentError("Mlp::set_flat: wrong parameter count");
  Eigen::Index pos = 0;
  for (auto& layer : layers_) {
    for (Eigen::Index r = 0; r < layer.weight.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.weight.cols(); ++c) layer.weight(r, c) = params(pos++);
    layer.bias = params.segment(pos, layer.bias.size());
    pos += layer.bias.size();
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& x, Cache* cache) const {
  if (x.rows() != input_dim()) throw ArgumentError("Mlp::forward: input has wrong dimension");
  if (cache) {
    cache->inputs.clear();
    cache->pre.clear();
  }
  Eigen::MatrixXd a = x;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    Eigen::MatrixXd z = layers_[l].weight * a;
    z.colwise() += layers_[l].bias;
    if (cache) {
      cache->inputs.push_back(a);
      cache->pre.push_back(z);
    }
    a = l + 1 == layers_.size() ? z : Eigen::MatrixXd(z.cwiseMax(0.0));
  }
  return a;
}

Eigen::VectorXd Mlp::backward(const Cache& cache, const Eigen::MatrixXd& d_out) const {
  if (cache.pre.size() != layers_.size()) throw ArgumentError("Mlp::backward: cache does not match network");
  std::vector<Eigen::MatrixXd> d_weight(layers_.size());
  std::vector<Eigen::VectorXd> d_bias(layers_.size());
  Eigen::MatrixXd delta = d_out;  // gradient with respect to the pre-activation of layer l
  for (std::size_t l = layers_.size(); l-- > 0;) {
    d_weight[l] = delta * cache.inputs[l].transpose();
    d_bias[l] = delta.rowwise().sum();
    if (l == 0) break;
    Eigen::MatrixXd up = layers_[l].weight.transpose() * delta;
    delta = up.cwiseProduct((cache.pre[l - 1].array() > 0.0).cast<double>().matrix());
  }

  Eigen::VectorXd out(static_cast<Eigen::Index>(n_params()));
  Eigen::Index pos = 0;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    for (Eigen::Index r = 0; r < d_weight[l].rows(); ++r)
      for (Eigen::Index c = 0; c < d_weight[l].cols(); ++c) out(pos++) = d_weight[l](r, c);
    out.segment(pos, d_bias[l].size()) = d_bias[l];
    pos += d_bias[l].size();
  }
  return out;
}

Eigen::MatrixXd Mlp::jvp(const Cache& cache, const Eigen::VectorXd& direction) const {
  if (direction.size() != static_cast<Eigen::Index>(n_params())) throw ArgumentError("Mlp::jvp: wrong direction size");
  if (cache.pre.size() != layers_.size()) throw ArgumentError("Mlp::jvp: cache does not match network");
  const Eigen::Index batch = cache.inputs.front().cols();
  Eigen::MatrixXd d_a = Eigen::MatrixXd::Zero(input_dim(), batch);
  Eigen::Index pos = 0;
  Eigen::MatrixXd d_z;
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const auto& layer = layers_[l];
    Eigen::MatrixXd dw(layer.weight.rows(), layer.weight.cols());
    for (Eigen::Index r = 0; r < dw.rows(); ++r)
      for (Eigen::Index c = 0; c < dw.cols(); ++c) dw(r, c) = direction(pos++);
    const Eigen::VectorXd db = direction.segment(pos, layer.bias.size());
    pos += layer.bias.size();

    d_z = layer.weight * d_a + dw * cache.inputs[l];
    d_z.colwise() += db;
    if (l + 1 < layers_.size()) d_a = d_z.cwiseProduct((cache.pre[l].array() > 0.0).cast<double>().matrix());
  }
  return d_z;
}

bool Mlp::all_finite() const {
  for (const auto& layer : layers_)
    if (!layer.weight.allFinite() || !layer.bias.allFinite()) return false;
  return true;
}

}  // namespace ctap::agent
