#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dmchan/nn/tensor.hpp"

namespace dmchan::nn {

/// Trainable tensor with its accumulated gradient.
template <typename T>
class Parameter {
 public:
  Parameter() : id_(next_id()) {}
  Parameter(std::string name, Tensor<T> value)
      : name_(std::move(name)), value_(std::move(value)), grad_(value_.shape()), id_(next_id()) {}

  // Copies are distinct parameters.
  Parameter(const Parameter& o)
      : name_(o.name_), value_(o.value_), grad_(o.grad_), requires_grad_(o.requires_grad_), id_(next_id()) {}
  Parameter& operator=(const Parameter& o) {
    name_ = o.name_;
    value_ = o.value_;
    grad_ = o.grad_;
    requires_grad_ = o.requires_grad_;
    return *this;
  }
  Parameter(Parameter&&) noexcept = default;
  Parameter& operator=(Parameter&&) noexcept = default;

  const std::string& name() const { return name_; }
  std::uint64_t id() const { return id_; }

  /// Frozen parameters bind as constants: no gradient is computed or accumulated.
  bool requires_grad() const { return requires_grad_; }
  void set_requires_grad(bool on) { requires_grad_ = on; }

  Tensor<T>& value() { return value_; }
  const Tensor<T>& value() const { return value_; }
  Tensor<T>& grad() { return grad_; }
  const Tensor<T>& grad() const { return grad_; }

  void set_value(Tensor<T> v) {
    if (v.shape() != value_.shape())
      throw ShapeError("parameter " + name_ + ": expected shape " + shape_string(value_.shape()) + ", got " +
                       shape_string(v.shape()));
    value_ = std::move(v);
  }

  void zero_grad() {
    if (grad_.shape() != value_.shape()) grad_ = Tensor<T>(value_.shape());
    grad_.fill(T{0});
  }

  template <typename U>
  Parameter<U> cast() const {
    Parameter<U> p(name_, value_.template cast<U>());
    p.grad() = grad_.template cast<U>();
    p.set_requires_grad(requires_grad_);
    return p;
  }

 private:
  static std::uint64_t next_id() {
    static std::atomic<std::uint64_t> counter{1};
    return counter.fetch_add(1, std::memory_order_relaxed);
  }

  std::string name_;
  Tensor<T> value_;
  Tensor<T> grad_;
  bool requires_grad_ = true;
  std::uint64_t id_;
};

template <typename T>
class Tape;

/// Handle to a node recorded on a Tape.
template <typename T>
struct Var {
  Tape<T>* tape = nullptr;
  std::size_t id = 0;

  const Tensor<T>& value() const { return tape->value(id); }
  const Tensor<T>& grad() const { return tape->grad(id); }
  const Shape& shape() const { return value().shape(); }
};

/**
 * Reverse-mode autodiff tape.
 *
 * Nodes are appended in evaluation order, so the node vector is already a
 * topological order and backward() is a single reverse sweep. A tape is built
 * for one forward pass and discarded afterwards. With recording disabled the
 * tape only evaluates values; no closures are stored and backward() throws.
 */
template <typename T>
class Tape {
 public:
  using Backprop = std::function<void(Tape&, std::size_t self)>;

  explicit Tape(bool record = true) : record_(record) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  bool recording() const { return record_; }
  std::size_t size() const { return nodes_.size(); }

  Var<T> constant(Tensor<T> v) { return append(std::move(v), false, nullptr); }

  /// Leaf whose gradient is wanted (e.g. the channel input c).
  Var<T> variable(Tensor<T> v) { return append(std::move(v), record_, nullptr); }

  /// Binds a parameter; repeated binds on the same tape share one node.
  Var<T> param(Parameter<T>& p) {
    if (auto it = bound_.find(&p); it != bound_.end()) return Var<T>{this, it->second};
    const bool track = record_ && p.requires_grad();
    Var<T> v = append(p.value(), track, track ? &p : nullptr);
    bound_.emplace(&p, v.id);
    return v;
  }

  const Tensor<T>& value(std::size_t id) const { return nodes_.at(id).value; }

  const Tensor<T>& grad(std::size_t id) const {
    const Node& n = nodes_.at(id);
    if (!n.has_grad) {
      if (zero_cache_.shape() != n.value.shape()) zero_cache_ = Tensor<T>(n.value.shape());
      return zero_cache_;
    }
    return n.grad;
  }

  bool needs_grad(std::size_t id) const { return nodes_[id].needs_grad; }

  /// Appends an op result. The closure is kept only if some parent needs a gradient.
  Var<T> push(Tensor<T> value, std::initializer_list<Var<T>> parents, Backprop fn) {
    bool any = false;
    const std::size_t next = nodes_.size();
    for (const auto& p : parents) {
      if (p.tape != this) throw std::invalid_argument("operands recorded on different tapes");
      if (p.id >= next) throw std::logic_error("graph cycle: operand recorded after its consumer");
      any = any || nodes_[p.id].needs_grad;
    }
    Var<T> v = append(std::move(value), any && record_, nullptr);
    if (any && record_) nodes_.back().backprop = std::move(fn);
    return v;
  }

  /// Gradient accumulator for a node, zero-initialised on first use.
  Tensor<T>& grad_slot(std::size_t id) {
    Node& n = nodes_[id];
    if (!n.has_grad) {
      n.grad = Tensor<T>(n.value.shape());
      n.has_grad = true;
    }
    return n.grad;
  }

  /// Seeds d(loss)/d(loss) = 1 and propagates to every reachable node.
  /// Bound parameters receive their gradient added onto Parameter::grad().
  void backward(Var<T> loss) {
    if (!record_) throw std::logic_error("backward on a non-recording tape");
    if (loss.tape != this) throw std::invalid_argument("loss recorded on a different tape");
    if (value(loss.id).size() != 1)
      throw ShapeError("backward: loss must be scalar, got shape " + shape_string(value(loss.id).shape()));
    if (consumed_) throw std::logic_error("backward called twice on the same tape");
    consumed_ = true;
    if (!nodes_[loss.id].needs_grad) return;
    grad_slot(loss.id)[0] = T{1};
    for (std::size_t i = loss.id + 1; i-- > 0;) {
      Node& n = nodes_[i];
      if (!n.has_grad || !n.backprop) continue;
      n.backprop(*this, i);
    }
    for (Node& n : nodes_) {
      if (!n.param || !n.has_grad) continue;
      Tensor<T>& g = n.param->grad();
      if (g.shape() != n.value.shape()) g = Tensor<T>(n.value.shape());
      for (std::size_t k = 0; k < g.size(); ++k) g[k] += n.grad[k];
    }
  }

 private:
  struct Node {
    Tensor<T> value;
    Tensor<T> grad;
    bool needs_grad = false;
    bool has_grad = false;
    Backprop backprop;
    Parameter<T>* param = nullptr;
  };

  Var<T> append(Tensor<T> v, bool needs_grad, Parameter<T>* p) {
    Node n;
    n.value = std::move(v);
    n.needs_grad = needs_grad;
    n.param = p;
    nodes_.push_back(std::move(n));
    return Var<T>{this, nodes_.size() - 1};
  }

  bool record_;
  bool consumed_ = false;
  std::vector<Node> nodes_;
  std::unordered_map<const Parameter<T>*, std::size_t> bound_;
  mutable Tensor<T> zero_cache_;
};

}  // namespace dmchan::nn
