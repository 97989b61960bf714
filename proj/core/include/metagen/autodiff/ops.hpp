#pragma once

#include <cmath>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "metagen/autodiff/tape.hpp"

namespace metagen::ad {

namespace detail {

template <typename T>
void require_same_tape(const Var<T>& a, const Var<T>& b) {
  if (a.tape() != b.tape()) throw PreconditionError("variables live on different tapes");
}

template <typename T>
void require_same_shape(const Var<T>& a, const Var<T>& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError(std::string(op) + ": shape mismatch (" + std::to_string(a.rows()) + "x" +
                     std::to_string(a.cols()) + " vs " + std::to_string(b.rows()) + "x" + std::to_string(b.cols()) +
                     ")");
  }
}

template <typename T>
Matrix<T> scalar(T v) {
  Matrix<T> m(1, 1);
  m(0, 0) = v;
  return m;
}

}  // namespace detail

/// y = x W^T + b, with W of shape [out x in] and b of shape [1 x out].
template <typename T>
Var<T> affine(Var<T> x, Var<T> w, Var<T> b) {
  detail::require_same_tape(x, w);
  detail::require_same_tape(x, b);
  if (x.cols() != w.cols() || b.rows() != 1 || b.cols() != w.rows()) {
    throw ShapeError("affine: input has " + std::to_string(x.cols()) + " features, weight is " +
                     std::to_string(w.rows()) + "x" + std::to_string(w.cols()) + ", bias is " +
                     std::to_string(b.rows()) + "x" + std::to_string(b.cols()));
  }
  Matrix<T> y(x.rows(), w.rows());
  y.noalias() = x.value() * w.value().transpose();
  y.rowwise() += b.value().row(0);
  return x.tape()->record(std::move(y), {x, w, b}, [x, w, b](Tape<T>& t, const Matrix<T>& g) {
    if (t.requires_grad(x)) t.accumulate(x, g * w.value());
    if (t.requires_grad(w)) t.accumulate(w, g.transpose() * x.value());
    if (t.requires_grad(b)) t.accumulate(b, g.colwise().sum());
  });
}

template <typename T>
Var<T> relu(Var<T> x) {
  Matrix<T> y = x.value().cwiseMax(T(0));
  return x.tape()->record(std::move(y), {x}, [x](Tape<T>& t, const Matrix<T>& g) {
    t.accumulate(x, (x.value().array() > T(0)).select(g, T(0)).matrix());
  });
}

/// Column-wise concatenation; all inputs share the row count.
template <typename T>
Var<T> concat(std::span<const Var<T>> xs) {
  if (xs.empty()) throw ShapeError("concat: no inputs");
  const Eigen::Index rows = xs.front().rows();
  Eigen::Index cols = 0;
  for (const auto& v : xs) {
    detail::require_same_tape(xs.front(), v);
    if (v.rows() != rows) throw ShapeError("concat: row counts differ");
    cols += v.cols();
  }
  Matrix<T> y(rows, cols);
  Eigen::Index at = 0;
  for (const auto& v : xs) {
    y.middleCols(at, v.cols()) = v.value();
    at += v.cols();
  }
  std::vector<Var<T>> parts(xs.begin(), xs.end());
  return xs.front().tape()->record(std::move(y), parts, [parts](Tape<T>& t, const Matrix<T>& g) {
    Eigen::Index offset = 0;
    for (const auto& v : parts) {
      if (t.requires_grad(v)) t.accumulate(v, g.middleCols(offset, v.cols()));
      offset += v.cols();
    }
  });
}

template <typename T>
Var<T> concat(std::initializer_list<Var<T>> xs) {
  return concat<T>(std::span<const Var<T>>(xs.begin(), xs.size()));
}

template <typename T>
Var<T> slice_cols(Var<T> x, Eigen::Index begin, Eigen::Index count) {
  if (begin < 0 || count < 0 || begin + count > x.cols()) throw ShapeError("slice_cols: range out of bounds");
  Matrix<T> y = x.value().middleCols(begin, count);
  return x.tape()->record(std::move(y), {x}, [x, begin, count](Tape<T>& t, const Matrix<T>& g) {
    Matrix<T> full = Matrix<T>::Zero(x.rows(), x.cols());
    full.middleCols(begin, count) = g;
    t.accumulate(x, full);
  });
}

template <typename T>
Var<T> add(Var<T> a, Var<T> b) {
  detail::require_same_tape(a, b);
  detail::require_same_shape(a, b, "add");
  Matrix<T> y = a.value() + b.value();
  return a.tape()->record(std::move(y), {a, b}, [a, b](Tape<T>& t, const Matrix<T>& g) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

template <typename T>
Var<T> scale(Var<T> x, T factor) {
  Matrix<T> y = x.value() * factor;
  return x.tape()->record(std::move(y), {x}, [x, factor](Tape<T>& t, const Matrix<T>& g) { t.accumulate(x, g * factor); });
}

/// Elementwise clamp; the gradient is passed only where lo < x < hi.
template <typename T>
Var<T> clamp(Var<T> x, T lo, T hi) {
  Matrix<T> y = x.value().cwiseMax(lo).cwiseMin(hi);
  return x.tape()->record(std::move(y), {x}, [x, lo, hi](Tape<T>& t, const Matrix<T>& g) {
    const auto& v = x.value().array();
    t.accumulate(x, ((v > lo) && (v < hi)).select(g, T(0)).matrix());
  });
}

/// Mean over every element of (pred - target)^2.
template <typename T>
Var<T> mse(Var<T> pred, Var<T> target) {
  detail::require_same_tape(pred, target);
  detail::require_same_shape(pred, target, "mse");
  const T n = static_cast<T>(pred.value().size());
  Matrix<T> diff = pred.value() - target.value();
  const T loss = diff.squaredNorm() / n;
  return pred.tape()->record(detail::scalar(loss), {pred, target},
                             [pred, target, diff = std::move(diff), n](Tape<T>& t, const Matrix<T>& g) {
                               const T k = g(0, 0) * T(2) / n;
                               if (t.requires_grad(pred)) t.accumulate(pred, diff * k);
                               if (t.requires_grad(target)) t.accumulate(target, diff * (-k));
                             });
}

/// KL(N(mu, exp(logvar)) || N(0, I)): summed over columns, averaged over rows.
template <typename T>
Var<T> gaussian_kl(Var<T> mu, Var<T> logvar) {
  detail::require_same_tape(mu, logvar);
  detail::require_same_shape(mu, logvar, "gaussian_kl");
  if (!mu.value().allFinite() || !logvar.value().allFinite()) throw DomainError("gaussian_kl: non-finite input");
  const T batch = static_cast<T>(mu.rows());
  const auto& m = mu.value().array();
  const auto& lv = logvar.value().array();
  const T kl = T(0.5) * (m.square() + lv.exp() - T(1) - lv).sum() / batch;
  return mu.tape()->record(detail::scalar(kl), {mu, logvar}, [mu, logvar, batch](Tape<T>& t, const Matrix<T>& g) {
    const T k = g(0, 0) / batch;
    if (t.requires_grad(mu)) t.accumulate(mu, mu.value() * k);
    if (t.requires_grad(logvar)) {
      t.accumulate(logvar, ((logvar.value().array().exp() - T(1)) * (T(0.5) * k)).matrix());
    }
  });
}

/// mu + exp(logvar / 2) * eps; eps is a constant of the graph.
template <typename T>
Var<T> reparameterize(Var<T> mu, Var<T> logvar, const Matrix<T>& eps) {
  detail::require_same_tape(mu, logvar);
  detail::require_same_shape(mu, logvar, "reparameterize");
  if (eps.rows() != mu.rows() || eps.cols() != mu.cols()) throw ShapeError("reparameterize: noise shape mismatch");
  Matrix<T> sigma = (logvar.value().array() * T(0.5)).exp().matrix();
  Matrix<T> z = mu.value() + sigma.cwiseProduct(eps);
  return mu.tape()->record(std::move(z), {mu, logvar},
                           [mu, logvar, eps, sigma = std::move(sigma)](Tape<T>& t, const Matrix<T>& g) {
                             t.accumulate(mu, g);
                             if (t.requires_grad(logvar)) {
                               t.accumulate(logvar, (g.array() * eps.array() * sigma.array() * T(0.5)).matrix());
                             }
                           });
}

/// rows x cols i.i.d. N(0, 1) draws, consumed row-major from rng.
template <typename T, typename Rng>
Matrix<T> standard_normal(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix<T> m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<T>(normal(rng));
  return m;
}

template <typename T, typename Rng>
Var<T> reparameterize(Var<T> mu, Var<T> logvar, Rng& rng) {
  return reparameterize(mu, logvar, standard_normal<T>(mu.rows(), mu.cols(), rng));
}

/// Mean binary cross-entropy between sigmoid(logit) and 0/1 labels, computed
/// from the logits without forming the sigmoid.
template <typename T>
Var<T> bce_with_logits(Var<T> logit, const Matrix<T>& labels) {
  if (labels.rows() != logit.rows() || labels.cols() != logit.cols()) throw ShapeError("bce: label shape mismatch");
  const auto& z = logit.value().array();
  const auto& y = labels.array();
  const T n = static_cast<T>(z.size());
  const T loss = (z.max(T(0)) - z * y + (-z.abs()).exp().log1p()).sum() / n;
  return logit.tape()->record(detail::scalar(loss), {logit}, [logit, labels, n](Tape<T>& t, const Matrix<T>& g) {
    const auto& zz = logit.value().array();
    const auto sig = (T(1) / (T(1) + (-zz).exp()));
    t.accumulate(logit, ((sig - labels.array()) * (g(0, 0) / n)).matrix());
  });
}

template <typename T>
Var<T> bce_with_logits(Var<T> logit, T label) {
  return bce_with_logits(logit, Matrix<T>::Constant(logit.rows(), logit.cols(), label).eval());
}

}  // namespace metagen::ad
