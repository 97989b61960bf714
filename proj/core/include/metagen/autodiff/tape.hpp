#pragma once

#include <cstddef>
#include <deque>
#include <functional>
#include <string>
#include <utility>

#include <Eigen/Core>

#include "metagen/error.hpp"

namespace metagen::ad {

/// Row-major dense matrix; rows index batch samples, columns features.
template <typename T>
using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// A trainable tensor living outside any tape.
template <typename T>
struct Parameter {
  std::string name;
  Matrix<T> value;
  Matrix<T> grad;

  void zero_grad() { grad.setZero(value.rows(), value.cols()); }
};

/// How a Parameter enters a tape: Trainable leaves send gradients back to the
/// Parameter, Frozen leaves are read-only constants.
enum class Binding { Trainable, Frozen };

template <typename T>
class Tape;

/// Handle to a node on a Tape. Cheap to copy; valid as long as the tape lives.
template <typename T>
class Var {
 public:
  Var() = default;

  const Matrix<T>& value() const { return tape_->value(*this); }
  const Matrix<T>& grad() const { return tape_->grad(*this); }
  Eigen::Index rows() const { return value().rows(); }
  Eigen::Index cols() const { return value().cols(); }
  Tape<T>* tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }

 private:
  friend class Tape<T>;
  Var(Tape<T>* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape<T>* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Reverse-mode recording of one forward pass. Nodes are appended in creation
/// order, which is a topological order, so backward is a single reverse sweep.
/// A tape supports exactly one backward call; build a new tape per step.
template <typename T>
class Tape {
 public:
  using BackwardFn = std::function<void(Tape&, const Matrix<T>& grad_out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var<T> constant(Matrix<T> v) {
    Node& n = nodes_.emplace_back();
    n.value = std::move(v);
    return {this, nodes_.size() - 1};
  }

  /// Leaf that aliases p.value; p must outlive the tape.
  Var<T> param(Parameter<T>& p, Binding binding = Binding::Trainable) {
    Node& n = nodes_.emplace_back();
    n.ref = &p.value;
    if (binding == Binding::Trainable) {
      n.sink = &p;
      n.requires_grad = true;
    }
    return {this, nodes_.size() - 1};
  }

  /// Appends an op node; it requires a gradient iff any parent does.
  template <typename Parents>
  Var<T> record(Matrix<T> value, const Parents& parents, BackwardFn fn) {
    bool needs = false;
    for (const Var<T>& p : parents) {
      check_owner(p);
      needs = needs || nodes_[p.id()].requires_grad;
    }
    Node& n = nodes_.emplace_back();
    n.value = std::move(value);
    n.requires_grad = needs;
    if (needs) n.backward = std::move(fn);
    return {this, nodes_.size() - 1};
  }

  Var<T> record(Matrix<T> value, std::initializer_list<Var<T>> parents, BackwardFn fn) {
    return record<std::initializer_list<Var<T>>>(std::move(value), parents, std::move(fn));
  }

  const Matrix<T>& value(Var<T> v) const {
    const Node& n = nodes_.at(v.id());
    return n.ref != nullptr ? *n.ref : n.value;
  }

  /// Gradient of the last backward() target w.r.t. v (empty if v was not reached).
  const Matrix<T>& grad(Var<T> v) const { return nodes_.at(v.id()).grad; }

  bool requires_grad(Var<T> v) const { return nodes_.at(v.id()).requires_grad; }

  template <typename Derived>
  void accumulate(Var<T> v, const Eigen::MatrixBase<Derived>& g) {
    Node& n = nodes_[v.id()];
    if (!n.requires_grad) return;
    if (n.grad.size() == 0) {
      n.grad = g;
    } else {
      n.grad += g;
    }
  }

  /// Propagates d(loss)/d(node) to every node and adds parameter gradients into
  /// Parameter::grad. Throws ShapeError for a non-scalar loss and
  /// PreconditionError when called twice on the same tape.
  void backward(Var<T> loss) {
    check_owner(loss);
    if (backward_done_) throw PreconditionError("backward() already ran on this tape");
    const Matrix<T>& lv = value(loss);
    if (lv.rows() != 1 || lv.cols() != 1) throw ShapeError("backward() needs a scalar loss");
    backward_done_ = true;
    Node& root = nodes_[loss.id()];
    if (!root.requires_grad) return;
    root.grad = Matrix<T>::Ones(1, 1);
    for (std::size_t k = loss.id() + 1; k-- > 0;) {
      Node& n = nodes_[k];
      if (!n.requires_grad || n.grad.size() == 0) continue;
      if (n.backward) n.backward(*this, n.grad);
      if (n.sink != nullptr) {
        Parameter<T>& p = *n.sink;
        if (p.grad.rows() != p.value.rows() || p.grad.cols() != p.value.cols()) p.zero_grad();
        p.grad += n.grad;
      }
    }
  }

  std::size_t size() const noexcept { return nodes_.size(); }

 private:
  struct Node {
    Matrix<T> value;
    const Matrix<T>* ref = nullptr;
    Matrix<T> grad;
    Parameter<T>* sink = nullptr;
    bool requires_grad = false;
    BackwardFn backward;
  };

  void check_owner(const Var<T>& v) const {
    if (v.tape() != this || v.id() >= nodes_.size()) throw PreconditionError("variable belongs to another tape");
  }

  std::deque<Node> nodes_;
  bool backward_done_ = false;
};

}  // namespace metagen::ad
