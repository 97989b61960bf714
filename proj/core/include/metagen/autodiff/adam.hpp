#pragma once

#include <cmath>
#include <cstdint>
#include <vector>

#include "metagen/autodiff/tape.hpp"

namespace metagen::ad {

struct AdamConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  friend bool operator==(const AdamConfig&, const AdamConfig&) = default;
};

/// Bias-corrected Adam over a fixed set of parameters.
template <typename T>
class Adam {
 public:
  Adam(std::vector<Parameter<T>*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
    first_.reserve(params_.size());
    second_.reserve(params_.size());
    for (auto* p : params_) {
      first_.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
      second_.push_back(Matrix<T>::Zero(p->value.rows(), p->value.cols()));
      p->zero_grad();
    }
  }

  void zero_grad() {
    for (auto* p : params_) p->grad.setZero();
  }

  /// theta <- theta - lr * m_hat / (sqrt(v_hat) + eps), using the current gradients.
  void step() {
    ++steps_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(steps_));
    const T b1 = static_cast<T>(cfg_.beta1);
    const T b2 = static_cast<T>(cfg_.beta2);
    const T lr = static_cast<T>(cfg_.lr);
    const T eps = static_cast<T>(cfg_.eps);
    const T inv_bc1 = static_cast<T>(1.0 / bc1);
    const T inv_bc2 = static_cast<T>(1.0 / bc2);
    for (std::size_t k = 0; k < params_.size(); ++k) {
      auto& p = *params_[k];
      auto m = first_[k].array();
      auto v = second_[k].array();
      const auto g = p.grad.array();
      m = b1 * m + (T(1) - b1) * g;
      v = b2 * v + (T(1) - b2) * g.square();
      p.value.array() -= lr * (m * inv_bc1) / ((v * inv_bc2).sqrt() + eps);
    }
  }

  std::uint64_t steps() const noexcept { return steps_; }
  const AdamConfig& config() const noexcept { return cfg_; }
  const std::vector<Matrix<T>>& first_moments() const noexcept { return first_; }
  const std::vector<Matrix<T>>& second_moments() const noexcept { return second_; }

 private:
  std::vector<Parameter<T>*> params_;
  AdamConfig cfg_;
  std::vector<Matrix<T>> first_;
  std::vector<Matrix<T>> second_;
  std::uint64_t steps_ = 0;
};

}  // namespace metagen::ad
