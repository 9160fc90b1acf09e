#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "dmchan/nn/ops.hpp"
#include "dmchan/nn/rng.hpp"

namespace dmchan::nn {

/// x·W + b for x [batch, in], W [in, out], b [out].
template <typename T>
Var<T> dense_forward(Var<T> w, Var<T> b, Var<T> x) {
  return add_bias(matmul(x, w), b);
}

/// Fully connected layer. Weights start uniform in ±1/sqrt(fan_in), biases at zero.
template <typename T>
class Dense {
 public:
  Dense() = default;
  Dense(std::string name, std::size_t in, std::size_t out)
      : weight_(name + ".weight", Tensor<T>({in, out})), bias_(name + ".bias", Tensor<T>({out})) {}

  Dense(std::string name, std::size_t in, std::size_t out, Rng& rng) : Dense(std::move(name), in, out) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    for (auto& v : weight_.value().data()) v = static_cast<T>(rng.uniform(-bound, bound));
  }

  std::size_t in() const { return weight_.value().rows(); }
  std::size_t out() const { return weight_.value().cols(); }

  Var<T> operator()(Var<T> x) {
    Tape<T>& tape = *x.tape;
    return dense_forward(tape.param(weight_), tape.param(bias_), x);
  }

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }
  const Parameter<T>& weight() const { return weight_; }
  const Parameter<T>& bias() const { return bias_; }

  template <typename U>
  Dense<U> cast() const {
    Dense<U> d;
    d.weight() = weight_.template cast<U>();
    d.bias() = bias_.template cast<U>();
    return d;
  }

 private:
  Parameter<T> weight_;
  Parameter<T> bias_;
};

template <typename T>
void zero_grads(const std::vector<Parameter<T>*>& params) {
  for (auto* p : params) p->zero_grad();
}

template <typename T>
void set_requires_grad(const std::vector<Parameter<T>*>& params, bool on) {
  for (auto* p : params) p->set_requires_grad(on);
}

template <typename T>
std::size_t parameter_count(const std::vector<Parameter<T>*>& params) {
  std::size_t n = 0;
  for (auto* p : params) n += p->value().size();
  return n;
}

}  // namespace dmchan::nn
