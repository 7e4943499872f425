#pragma once

// A straight stack of layers with owned parameters. Activations live in a
// separate workspace so a const Sequential can be shared across threads for
// inference; each thread brings its own workspace.

#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "pgr/nn/layers.hpp"

namespace pgr::nn {

template <class T>
class Sequential {
 public:
  Sequential() = default;

  Sequential(Shape input_shape, std::vector<LayerSpec> specs) : specs_(std::move(specs)) {
    shapes_.push_back(std::move(input_shape));
    for (const auto& s : specs_) {
      shapes_.push_back(nn::output_shape(s, shapes_.back()));
      weights_.emplace_back(has_params(s) ? weight_shape(s) : Shape{0});
      biases_.emplace_back(has_params(s) ? bias_shape(s) : Shape{0});
    }
  }

  std::size_t size() const { return specs_.size(); }
  bool empty() const { return specs_.empty(); }
  const std::vector<LayerSpec>& specs() const { return specs_; }
  const LayerSpec& spec(std::size_t i) const { return specs_.at(i); }
  const Shape& input_shape() const { return shapes_.front(); }
  const Shape& output_shape() const { return shapes_.back(); }
  /// shapes()[i] is the input of layer i; shapes().back() is the output.
  const std::vector<Shape>& shapes() const { return shapes_; }

  Tensor<T>& weight(std::size_t i) { return weights_.at(i); }
  const Tensor<T>& weight(std::size_t i) const { return weights_.at(i); }
  Tensor<T>& bias(std::size_t i) { return biases_.at(i); }
  const Tensor<T>& bias(std::size_t i) const { return biases_.at(i); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t i = 0; i < size(); ++i) n += weights_[i].size() + biases_[i].size();
    return n;
  }

  /// Glorot-uniform weights, zero biases.
  void init_glorot(Rng& rng) {
    for (std::size_t i = 0; i < size(); ++i) {
      if (!has_params(specs_[i])) continue;
      const auto [fan_in, fan_out] = fans(specs_[i]);
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (auto& w : weights_[i].values) w = static_cast<T>(dist(rng));
      for (auto& b : biases_[i].values) b = T{};
    }
  }

  /// Parameter views in layer order, weight before bias.
  std::vector<std::span<T>> parameter_views() {
    std::vector<std::span<T>> out;
    for (std::size_t i = 0; i < size(); ++i) {
      if (!has_params(specs_[i])) continue;
      out.push_back(weights_[i].values);
      out.push_back(biases_[i].values);
    }
    return out;
  }

  template <class U>
  Sequential<U> cast() const {
    Sequential<U> out(shapes_.front(), specs_);
    for (std::size_t i = 0; i < size(); ++i) {
      for (std::size_t k = 0; k < weights_[i].size(); ++k) out.weight(i)[k] = static_cast<U>(weights_[i][k]);
      for (std::size_t k = 0; k < biases_[i].size(); ++k) out.bias(i)[k] = static_cast<U>(biases_[i][k]);
    }
    return out;
  }

  bool operator==(const Sequential&) const = default;

 private:
  std::vector<LayerSpec> specs_;
  std::vector<Shape> shapes_;
  std::vector<Tensor<T>> weights_;
  std::vector<Tensor<T>> biases_;
};

template <class T>
struct SequentialGrads {
  std::vector<Tensor<T>> dw;
  std::vector<Tensor<T>> db;

  SequentialGrads() = default;
  explicit SequentialGrads(const Sequential<T>& net) {
    for (std::size_t i = 0; i < net.size(); ++i) {
      dw.emplace_back(net.weight(i).shape);
      db.emplace_back(net.bias(i).shape);
    }
  }

  void zero() {
    for (auto& t : dw) std::fill(t.values.begin(), t.values.end(), T{});
    for (auto& t : db) std::fill(t.values.begin(), t.values.end(), T{});
  }

  std::vector<std::span<T>> views(const Sequential<T>& net) {
    std::vector<std::span<T>> out;
    for (std::size_t i = 0; i < net.size(); ++i) {
      if (!has_params(net.spec(i))) continue;
      out.push_back(dw[i].values);
      out.push_back(db[i].values);
    }
    return out;
  }
};

/// Preallocated activations and deltas for one Sequential.
template <class T>
struct SequentialWorkspace {
  std::vector<std::vector<T>> acts;    // acts[i] = input of layer i, acts.back() = output
  std::vector<std::vector<T>> deltas;  // gradient w.r.t. acts[i]
  bool forward_done = false;

  SequentialWorkspace() = default;
  explicit SequentialWorkspace(const Sequential<T>& net) {
    for (const auto& s : net.shapes()) {
      acts.emplace_back(shape_size(s));
      deltas.emplace_back(shape_size(s));
    }
  }
};

template <class T>
std::span<const T> forward(const Sequential<T>& net, std::span<const T> input, SequentialWorkspace<T>& ws) {
  if (input.size() != ws.acts.front().size())
    throw std::invalid_argument("Sequential: input has " + std::to_string(input.size()) + " values, expected " +
                                std::to_string(ws.acts.front().size()));
  std::copy(input.begin(), input.end(), ws.acts.front().begin());
  const auto& shapes = net.shapes();
  for (std::size_t i = 0; i < net.size(); ++i) {
    layer_forward<T>(net.spec(i), shapes[i], shapes[i + 1], ws.acts[i], net.weight(i).values, net.bias(i).values,
                     ws.acts[i + 1]);
  }
  ws.forward_done = true;
  return ws.acts.back();
}

/// Back-propagates `dout` (gradient w.r.t. the output) through the stack
/// recorded by the last forward(). Parameter gradients accumulate into
/// `grads`; the input gradient is left in ws.deltas.front() and returned.
template <class T>
std::span<const T> backward(const Sequential<T>& net, SequentialWorkspace<T>& ws, std::span<const T> dout,
                            SequentialGrads<T>& grads, bool need_input_grad = true) {
  if (!ws.forward_done) throw std::logic_error("Sequential: backward called before forward");
  if (dout.size() != ws.deltas.back().size()) throw std::invalid_argument("Sequential: upstream gradient size");
  std::copy(dout.begin(), dout.end(), ws.deltas.back().begin());
  const auto& shapes = net.shapes();
  for (std::size_t i = net.size(); i-- > 0;) {
    std::span<T> din = (i > 0 || need_input_grad) ? std::span<T>(ws.deltas[i]) : std::span<T>();
    layer_backward<T>(net.spec(i), shapes[i], shapes[i + 1], ws.acts[i], net.weight(i).values, ws.deltas[i + 1],
                      grads.dw[i].values, grads.db[i].values, din);
  }
  return ws.deltas.front();
}

}  // namespace pgr::nn
