#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "metagen/autodiff/ops.hpp"

namespace metagen::ad {

/// Fully connected layer, weight [out x in], bias [1 x out].
template <typename T>
class Affine {
 public:
  Affine(std::string name, std::size_t in, std::size_t out) {
    weight_.name = name + ".weight";
    bias_.name = name + ".bias";
    weight_.value = Matrix<T>::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(in));
    bias_.value = Matrix<T>::Zero(1, static_cast<Eigen::Index>(out));
  }

  /// weight ~ U[-1/sqrt(in), 1/sqrt(in)], bias = 0.
  template <typename Rng>
  void init(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_features()));
    std::uniform_real_distribution<double> u(-bound, bound);
    for (Eigen::Index i = 0; i < weight_.value.size(); ++i) weight_.value.data()[i] = static_cast<T>(u(rng));
    bias_.value.setZero();
  }

  Var<T> forward(Tape<T>& tape, Var<T> x, Binding binding = Binding::Trainable) {
    return affine(x, tape.param(weight_, binding), tape.param(bias_, binding));
  }

  std::size_t in_features() const noexcept { return static_cast<std::size_t>(weight_.value.cols()); }
  std::size_t out_features() const noexcept { return static_cast<std::size_t>(weight_.value.rows()); }

  Parameter<T>& weight() noexcept { return weight_; }
  Parameter<T>& bias() noexcept { return bias_; }
  const Parameter<T>& weight() const noexcept { return weight_; }
  const Parameter<T>& bias() const noexcept { return bias_; }

 private:
  Parameter<T> weight_;
  Parameter<T> bias_;
};

/// Stack of affine layers with ReLU between them (and after the last one if
/// relu_output is set).
template <typename T>
class Mlp {
 public:
  Mlp() = default;

  Mlp(const std::string& name, const std::vector<std::size_t>& dims, bool relu_output = false)
      : relu_output_(relu_output) {
    if (dims.size() < 2) throw ShapeError("Mlp needs at least input and output sizes");
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
      layers_.emplace_back(name + "." + std::to_string(k), dims[k], dims[k + 1]);
    }
  }

  template <typename Rng>
  void init(Rng& rng) {
    for (auto& l : layers_) l.init(rng);
  }

  Var<T> forward(Tape<T>& tape, Var<T> x, Binding binding = Binding::Trainable) {
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      x = layers_[k].forward(tape, x, binding);
      if (k + 1 < layers_.size() || relu_output_) x = relu(x);
    }
    return x;
  }

  void collect(std::vector<Parameter<T>*>& out) {
    for (auto& l : layers_) {
      out.push_back(&l.weight());
      out.push_back(&l.bias());
    }
  }

  void collect(std::vector<const Parameter<T>*>& out) const {
    for (const auto& l : layers_) {
      out.push_back(&l.weight());
      out.push_back(&l.bias());
    }
  }

  /// Copies weights from a network of identical shape, keeping this network's names.
  void assign_values(const Mlp& other) {
    if (other.layers_.size() != layers_.size()) throw ShapeError("Mlp::assign_values: depth mismatch");
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const auto& src = other.layers_[k];
      auto& dst = layers_[k];
      if (src.in_features() != dst.in_features() || src.out_features() != dst.out_features()) {
        throw ShapeError("Mlp::assign_values: layer shape mismatch");
      }
      dst.weight().value = src.weight().value;
      dst.bias().value = src.bias().value;
    }
  }

  std::size_t in_features() const { return layers_.front().in_features(); }
  std::size_t out_features() const { return layers_.back().out_features(); }
  const std::vector<Affine<T>>& layers() const noexcept { return layers_; }

 private:
  std::vector<Affine<T>> layers_;
  bool relu_output_ = false;
};

}  // namespace metagen::ad
