#pragma once

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "dmchan/nn/layers.hpp"

namespace dmchan::diffusion {

using nn::Parameter;
using nn::Rng;
using nn::Tape;
using nn::Tensor;
using nn::Var;

enum class PredictionMode { Epsilon, V };

inline std::string_view to_string(PredictionMode m) { return m == PredictionMode::Epsilon ? "epsilon" : "v"; }

inline PredictionMode mode_from_string(std::string_view s) {
  if (s == "epsilon" || s == "eps") return PredictionMode::Epsilon;
  if (s == "v") return PredictionMode::V;
  throw std::invalid_argument("unknown prediction mode '" + std::string(s) + "'");
}

/**
 * Conditional noise (or velocity) predictor.
 *
 *   h1  = Softplus(Dense_in([x_t | c]) ∘ E1[t])
 *   h2  = Softplus(Dense_hidden(h1) ∘ E2[t])
 *   out = Dense_out(h2)
 *
 * E1, E2 are learned [T, N_hl] tables, initialised to ones so the untrained
 * network is a plain MLP.
 */
template <typename T>
class Denoiser {
 public:
  Denoiser() = default;

  Denoiser(std::size_t n, std::size_t hidden, std::size_t steps, Rng& rng)
      : n_(n),
        hidden_(hidden),
        steps_(steps),
        input_("dense_in", 2 * n, hidden, rng),
        middle_("dense_hidden", hidden, hidden, rng),
        output_("dense_out", hidden, n, rng),
        embed1_("embed1", Tensor<T>({steps, hidden}, T{1})),
        embed2_("embed2", Tensor<T>({steps, hidden}, T{1})) {
    if (n < 1 || hidden < 1 || steps < 1) throw std::invalid_argument("Denoiser: sizes must be >= 1");
  }

  std::size_t dim() const { return n_; }
  std::size_t hidden() const { return hidden_; }
  std::size_t steps() const { return steps_; }

  /// Prediction for a batch; t holds one time index (1..T) per row.
  Var<T> forward(Var<T> x_t, std::span<const std::size_t> t, Var<T> c) {
    const auto& xs = x_t.shape();
    if (xs.size() != 2 || xs[1] != n_ || c.shape() != xs)
      throw ShapeError("Denoiser: expected x_t and c of shape [batch, " + std::to_string(n_) + "], got " +
                       nn::shape_string(xs) + " and " + nn::shape_string(c.shape()));
    if (t.size() != xs[0]) throw ShapeError("Denoiser: one time index per row required");
    std::vector<std::size_t> rows(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) {
      if (t[i] < 1 || t[i] > steps_)
        throw std::out_of_range("Denoiser: time index " + std::to_string(t[i]) + " outside 1.." +
                                std::to_string(steps_));
      rows[i] = t[i] - 1;
    }
    Tape<T>& tape = *x_t.tape;
    const auto softplus = nn::Activation::Softplus;
    Var<T> h = input_(nn::concat_cols(x_t, c));
    h = nn::activation(softplus, nn::mul(h, nn::gather_rows(tape.param(embed1_), rows)));
    h = middle_(h);
    h = nn::activation(softplus, nn::mul(h, nn::gather_rows(tape.param(embed2_), rows)));
    return output_(h);
  }

  /// Same time index for every row.
  Var<T> forward(Var<T> x_t, std::size_t t, Var<T> c) {
    std::vector<std::size_t> ts(x_t.shape().at(0), t);
    return forward(x_t, ts, c);
  }

  /// Evaluation without gradient bookkeeping.
  Tensor<T> predict(const Tensor<T>& x_t, std::size_t t, const Tensor<T>& c) {
    Tape<T> tape(false);
    return forward(tape.constant(x_t), t, tape.constant(c)).value();
  }

  std::vector<Parameter<T>*> parameters() {
    return {&input_.weight(), &input_.bias(), &embed1_, &middle_.weight(), &middle_.bias(),
            &embed2_, &output_.weight(), &output_.bias()};
  }

  std::vector<const Parameter<T>*> parameters() const {
    auto* self = const_cast<Denoiser*>(this);
    auto ps = self->parameters();
    return {ps.begin(), ps.end()};
  }

  template <typename U>
  Denoiser<U> cast() const {
    Denoiser<U> d;
    d.n_ = n_;
    d.hidden_ = hidden_;
    d.steps_ = steps_;
    d.input_ = input_.template cast<U>();
    d.middle_ = middle_.template cast<U>();
    d.output_ = output_.template cast<U>();
    d.embed1_ = embed1_.template cast<U>();
    d.embed2_ = embed2_.template cast<U>();
    return d;
  }

 private:
  template <typename>
  friend class Denoiser;

  std::size_t n_ = 0;
  std::size_t hidden_ = 0;
  std::size_t steps_ = 0;
  nn::Dense<T> input_;
  nn::Dense<T> middle_;
  nn::Dense<T> output_;
  Parameter<T> embed1_;
  Parameter<T> embed2_;
};

}  // namespace dmchan::diffusion
