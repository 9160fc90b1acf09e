#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "dmchan/nn/tape.hpp"

namespace testing_support {

using dmchan::nn::Parameter;
using dmchan::nn::Tape;
using dmchan::nn::Tensor;
using dmchan::nn::Var;

struct GradReport {
  double max_rel = 0.0;         ///< worst per-element relative error
  double max_tensor_rel = 0.0;  ///< worst ||a − n|| / max(||a||, ||n||) over the checked tensors
  double max_abs = 0.0;
  std::size_t checked = 0;
};

/// Norm-wise relative error of one tensor's analytic vs numeric gradient.
inline void accumulate_tensor(GradReport& r, const std::vector<double>& analytic, const std::vector<double>& numeric) {
  double diff = 0.0, na = 0.0, nn = 0.0;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    diff += (analytic[i] - numeric[i]) * (analytic[i] - numeric[i]);
    na += analytic[i] * analytic[i];
    nn += numeric[i] * numeric[i];
  }
  const double denom = std::sqrt(std::max(na, nn));
  if (denom > 0.0) r.max_tensor_rel = std::max(r.max_tensor_rel, std::sqrt(diff) / denom);
}

/// |a − n| / max(|a|, |n|, floor); floor keeps near-zero entries from dominating.
inline void accumulate(GradReport& r, double analytic, double numeric, double floor) {
  const double diff = std::abs(analytic - numeric);
  const double denom = std::max({std::abs(analytic), std::abs(numeric), floor});
  r.max_rel = std::max(r.max_rel, diff / denom);
  r.max_abs = std::max(r.max_abs, diff);
  ++r.checked;
}

/**
 * Central-difference check of d loss / d inputs. `loss` builds a scalar from
 * tape variables holding the inputs; the same function is re-evaluated on a
 * non-recording tape for every perturbation.
 */
template <typename T>
GradReport check_inputs(const std::function<Var<T>(Tape<T>&, const std::vector<Var<T>>&)>& loss,
                        std::vector<Tensor<T>> inputs, double h, double floor_fraction = 1e-3) {
  std::vector<Tensor<T>> analytic;
  {
    Tape<T> tape;
    std::vector<Var<T>> vars;
    for (const auto& x : inputs) vars.push_back(tape.variable(x));
    Var<T> l = loss(tape, vars);
    tape.backward(l);
    for (const auto& v : vars) analytic.push_back(v.grad());
  }
  auto eval = [&] {
    Tape<T> tape(false);
    std::vector<Var<T>> vars;
    for (const auto& x : inputs) vars.push_back(tape.constant(x));
    return static_cast<double>(loss(tape, vars).value().item());
  };
  double scale = 0.0;
  for (const auto& g : analytic)
    for (T v : g.data()) scale = std::max(scale, std::abs(static_cast<double>(v)));
  GradReport r;
  for (std::size_t k = 0; k < inputs.size(); ++k) {
    std::vector<double> a, n;
    for (std::size_t i = 0; i < inputs[k].size(); ++i) {
      const T saved = inputs[k][i];
      inputs[k][i] = static_cast<T>(saved + h);
      const double up = eval();
      inputs[k][i] = static_cast<T>(saved - h);
      const double down = eval();
      inputs[k][i] = saved;
      a.push_back(static_cast<double>(analytic[k][i]));
      n.push_back((up - down) / (2.0 * h));
      accumulate(r, a.back(), n.back(), floor_fraction * scale);
    }
    accumulate_tensor(r, a, n);
  }
  return r;
}

/// Same check against parameters read through tape.param.
template <typename T>
GradReport check_params(const std::function<Var<T>(Tape<T>&)>& loss, const std::vector<Parameter<T>*>& params,
                        double h, double floor_fraction = 1e-3) {
  for (auto* p : params) p->zero_grad();
  {
    Tape<T> tape;
    tape.backward(loss(tape));
  }
  std::vector<Tensor<T>> analytic;
  double scale = 0.0;
  for (auto* p : params) {
    analytic.push_back(p->grad());
    for (T v : p->grad().data()) scale = std::max(scale, std::abs(static_cast<double>(v)));
  }
  auto eval = [&] {
    Tape<T> tape(false);
    return static_cast<double>(loss(tape).value().item());
  };
  GradReport r;
  for (std::size_t k = 0; k < params.size(); ++k) {
    Tensor<T>& w = params[k]->value();
    std::vector<double> a, n;
    for (std::size_t i = 0; i < w.size(); ++i) {
      const T saved = w[i];
      w[i] = static_cast<T>(saved + h);
      const double up = eval();
      w[i] = static_cast<T>(saved - h);
      const double down = eval();
      w[i] = saved;
      a.push_back(static_cast<double>(analytic[k][i]));
      n.push_back((up - down) / (2.0 * h));
      accumulate(r, a.back(), n.back(), floor_fraction * scale);
    }
    accumulate_tensor(r, a, n);
  }
  return r;
}

template <typename T>
Tensor<T> random_tensor(dmchan::nn::Shape shape, dmchan::nn::Rng& rng, double scale = 1.0) {
  Tensor<T> t(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(scale * rng.normal());
  return t;
}

}  // namespace testing_support
