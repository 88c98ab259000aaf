#pragma once

// Dense layer stack with exact forward, parameter-gradient and input-gradient
// passes. Column-major batches: every column of an input matrix is one sample.

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace rlattack {

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

enum class Activation : std::uint8_t { identity = 0, relu = 1 };

template <typename Scalar>
struct DenseLayer {
  Matrix<Scalar> weight;  // [out x in]
  Vector<Scalar> bias;    // [out]
  Activation activation = Activation::identity;

  Eigen::Index in_dim() const { return weight.cols(); }
  Eigen::Index out_dim() const { return weight.rows(); }
};

template <typename Scalar>
class DenseNetwork {
 public:
  using Layer = DenseLayer<Scalar>;

  DenseNetwork() = default;

  explicit DenseNetwork(std::vector<Layer> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) {
      throw std::invalid_argument("network needs at least one layer");
    }
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const Layer& l = layers_[i];
      if (l.weight.rows() == 0 || l.weight.cols() == 0) {
        throw std::invalid_argument("layer " + std::to_string(i) + " has an empty weight matrix");
      }
      if (l.bias.size() != l.weight.rows()) {
        throw std::invalid_argument("layer " + std::to_string(i) + " bias length does not match rows");
      }
      if (i > 0 && layers_[i - 1].out_dim() != l.in_dim()) {
        throw std::invalid_argument("layer " + std::to_string(i) + " input dim does not chain");
      }
    }
  }

  Eigen::Index input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
  Eigen::Index output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }
  std::size_t layer_count() const { return layers_.size(); }

  const std::vector<Layer>& layers() const { return layers_; }
  const Layer& layer(std::size_t i) const { return layers_.at(i); }

  // Mutable access keeps shapes fixed: callers may overwrite values only.
  Matrix<Scalar>& weight(std::size_t i) { return layers_.at(i).weight; }
  Vector<Scalar>& bias(std::size_t i) { return layers_.at(i).bias; }

  bool all_finite() const {
    for (const Layer& l : layers_) {
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    }
    return true;
  }

  friend bool operator==(const DenseNetwork& a, const DenseNetwork& b) {
    if (a.layers_.size() != b.layers_.size()) return false;
    for (std::size_t i = 0; i < a.layers_.size(); ++i) {
      const Layer& x = a.layers_[i];
      const Layer& y = b.layers_[i];
      if (x.activation != y.activation || x.weight.rows() != y.weight.rows() ||
          x.weight.cols() != y.weight.cols() || x.weight != y.weight || x.bias != y.bias) {
        return false;
      }
    }
    return true;
  }

 private:
  std::vector<Layer> layers_;
};

using Network = DenseNetwork<double>;

// Per-layer parameter gradients, laid out exactly like the network.
template <typename Scalar>
struct ParamGrads {
  std::vector<Matrix<Scalar>> weight;
  std::vector<Vector<Scalar>> bias;

  static ParamGrads zeros_like(const DenseNetwork<Scalar>& net) {
    ParamGrads g;
    for (const auto& l : net.layers()) {
      g.weight.push_back(Matrix<Scalar>::Zero(l.out_dim(), l.in_dim()));
      g.bias.push_back(Vector<Scalar>::Zero(l.out_dim()));
    }
    return g;
  }

  ParamGrads& operator+=(const ParamGrads& o) {
    for (std::size_t i = 0; i < weight.size(); ++i) {
      weight[i] += o.weight[i];
      bias[i] += o.bias[i];
    }
    return *this;
  }

  ParamGrads& operator*=(Scalar s) {
    for (std::size_t i = 0; i < weight.size(); ++i) {
      weight[i] *= s;
      bias[i] *= s;
    }
    return *this;
  }

  bool all_finite() const {
    for (std::size_t i = 0; i < weight.size(); ++i) {
      if (!weight[i].allFinite() || !bias[i].allFinite()) return false;
    }
    return true;
  }
};

template <typename Scalar>
struct GradientBundle {
  ParamGrads<Scalar> params;
  Vector<Scalar> input_grad;
};

template <typename Scalar>
struct BatchGradient {
  ParamGrads<Scalar> params;  // summed over the batch
  Matrix<Scalar> input_grad;  // one column per sample
};

// Uniform in [-s, s], s = sqrt(6 / (fan_in + fan_out)); biases start at zero.
// Uses the raw 64-bit engine output so parameters are identical across
// standard-library implementations.
template <typename Scalar = double>
DenseNetwork<Scalar> init_network(std::span<const int> layer_dims,
                                  std::span<const Activation> activations, std::uint64_t seed) {
  if (layer_dims.size() < 2) {
    throw std::invalid_argument("init_network: need at least an input and an output dimension");
  }
  if (activations.size() != layer_dims.size() - 1) {
    throw std::invalid_argument("init_network: expected " + std::to_string(layer_dims.size() - 1) +
                                " activations, got " + std::to_string(activations.size()));
  }
  for (int d : layer_dims) {
    if (d <= 0) throw std::invalid_argument("init_network: dimensions must be positive");
  }
  std::mt19937_64 engine(seed);
  std::vector<DenseLayer<Scalar>> layers;
  for (std::size_t i = 0; i + 1 < layer_dims.size(); ++i) {
    const int in = layer_dims[i];
    const int out = layer_dims[i + 1];
    const double scale = std::sqrt(6.0 / static_cast<double>(in + out));
    DenseLayer<Scalar> l;
    l.weight.resize(out, in);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) {
        const double u = static_cast<double>(engine() >> 11) * 0x1.0p-53;  // [0,1)
        l.weight(r, c) = static_cast<Scalar>((2.0 * u - 1.0) * scale);
      }
    }
    l.bias = Vector<Scalar>::Zero(out);
    l.activation = activations[i];
    layers.push_back(std::move(l));
  }
  return DenseNetwork<Scalar>(std::move(layers));
}

namespace detail {

template <typename Derived>
void apply_activation(Eigen::MatrixBase<Derived>& z, Activation act) {
  if (act == Activation::relu) z = z.cwiseMax(typename Derived::Scalar(0));
}

template <typename Scalar>
void check_input_rows(const DenseNetwork<Scalar>& net, Eigen::Index rows) {
  if (net.layer_count() == 0) throw std::invalid_argument("network is empty");
  if (rows != net.input_dim()) {
    throw std::invalid_argument("input length " + std::to_string(rows) + " != network input dim " +
                                std::to_string(net.input_dim()));
  }
}

}  // namespace detail

template <typename Scalar>
Matrix<Scalar> forward_batch(const DenseNetwork<Scalar>& net, const Matrix<Scalar>& inputs) {
  detail::check_input_rows(net, inputs.rows());
  Matrix<Scalar> h = inputs;
  for (const auto& l : net.layers()) {
    Matrix<Scalar> z = l.weight * h;
    z.colwise() += l.bias;
    detail::apply_activation(z, l.activation);
    h = std::move(z);
  }
  return h;
}

template <typename Scalar>
Vector<Scalar> forward(const DenseNetwork<Scalar>& net, const Vector<Scalar>& x) {
  detail::check_input_rows(net, x.size());
  Vector<Scalar> h = x;
  for (const auto& l : net.layers()) {
    Vector<Scalar> z = l.weight * h + l.bias;
    detail::apply_activation(z, l.activation);
    h = std::move(z);
  }
  return h;
}

// Gradients of sum_over_batch <output, output_grads> with respect to every
// parameter and every input column. Relu derivative at exactly zero is 0.
template <typename Scalar>
BatchGradient<Scalar> backward_batch(const DenseNetwork<Scalar>& net, const Matrix<Scalar>& inputs,
                                     const Matrix<Scalar>& output_grads) {
  detail::check_input_rows(net, inputs.rows());
  if (output_grads.rows() != net.output_dim() || output_grads.cols() != inputs.cols()) {
    throw std::invalid_argument("backward: output gradient shape does not match network output");
  }
  const auto& layers = net.layers();
  std::vector<Matrix<Scalar>> acts;  // acts[i] = input to layer i
  acts.reserve(layers.size() + 1);
  acts.push_back(inputs);
  for (const auto& l : layers) {
    Matrix<Scalar> z = l.weight * acts.back();
    z.colwise() += l.bias;
    detail::apply_activation(z, l.activation);
    acts.push_back(std::move(z));
  }

  BatchGradient<Scalar> out;
  out.params.weight.resize(layers.size());
  out.params.bias.resize(layers.size());
  Matrix<Scalar> delta = output_grads;
  for (std::size_t k = layers.size(); k-- > 0;) {
    const auto& l = layers[k];
    if (l.activation == Activation::relu) {
      delta = (acts[k + 1].array() > Scalar(0)).select(delta, Scalar(0));
    }
    out.params.weight[k].noalias() = delta * acts[k].transpose();
    out.params.bias[k] = delta.rowwise().sum();
    delta = l.weight.transpose() * delta;
  }
  out.input_grad = std::move(delta);
  return out;
}

template <typename Scalar>
GradientBundle<Scalar> backward(const DenseNetwork<Scalar>& net, const Vector<Scalar>& x,
                                const Vector<Scalar>& output_grad) {
  detail::check_input_rows(net, x.size());
  if (output_grad.size() != net.output_dim()) {
    throw std::invalid_argument("backward: output gradient length does not match network output");
  }
  BatchGradient<Scalar> b = backward_batch<Scalar>(net, x, output_grad);
  return {std::move(b.params), b.input_grad.col(0)};
}

// p <- p - lr * g for every parameter. Throws on non-finite gradients so a
// diverging optimizer fails loudly instead of poisoning the network.
template <typename Scalar>
void sgd_step(DenseNetwork<Scalar>& net, const ParamGrads<Scalar>& grads, Scalar lr) {
  if (!(lr >= Scalar(0))) throw std::invalid_argument("sgd_step: learning rate must be non-negative");
  if (grads.weight.size() != net.layer_count() || grads.bias.size() != net.layer_count()) {
    throw std::invalid_argument("sgd_step: gradient layer count mismatch");
  }
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    if (grads.weight[i].rows() != net.layer(i).weight.rows() ||
        grads.weight[i].cols() != net.layer(i).weight.cols() ||
        grads.bias[i].size() != net.layer(i).bias.size()) {
      throw std::invalid_argument("sgd_step: gradient shape mismatch at layer " + std::to_string(i));
    }
  }
  if (!grads.all_finite()) throw std::runtime_error("sgd_step: non-finite gradient");
  for (std::size_t i = 0; i < net.layer_count(); ++i) {
    net.weight(i) -= lr * grads.weight[i];
    net.bias(i) -= lr * grads.bias[i];
  }
  if (!net.all_finite()) throw std::runtime_error("sgd_step: parameters became non-finite");
}

// Max-subtracted softmax of logits / temperature.
template <typename Scalar>
Vector<Scalar> softmax(const Vector<Scalar>& logits, Scalar temperature = Scalar(1)) {
  if (!(temperature > Scalar(0))) throw std::invalid_argument("softmax: temperature must be positive");
  if (logits.size() == 0) throw std::invalid_argument("softmax: empty logits");
  if (!logits.allFinite()) throw std::invalid_argument("softmax: non-finite logits");
  Vector<Scalar> z = logits / temperature;
  z.array() -= z.maxCoeff();
  z = z.array().exp();
  return z / z.sum();
}

// Lowest index wins ties.
template <typename Derived>
int argmax_index(const Eigen::MatrixBase<Derived>& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) > v(best)) best = static_cast<int>(i);
  }
  return best;
}

template <typename Derived>
int argmin_index(const Eigen::MatrixBase<Derived>& v) {
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v(i) < v(best)) best = static_cast<int>(i);
  }
  return best;
}

}  // namespace rlattack
