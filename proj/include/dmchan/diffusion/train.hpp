#pragma once

#include <cmath>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "dmchan/diffusion/process.hpp"
#include "dmchan/diffusion/sampler.hpp"
#include "dmchan/nn/optim.hpp"

namespace dmchan::diffusion {

/// Paired channel samples: x0 = channel output, c = channel input.
template <typename T>
struct Dataset {
  Tensor<T> x0;
  Tensor<T> c;

  std::size_t size() const { return x0.rows(); }
  std::size_t dim() const { return x0.cols(); }

  void validate() const {
    if (x0.rank() != 2 || x0.shape() != c.shape())
      throw ShapeError("dataset: x0 " + nn::shape_string(x0.shape()) + " and c " + nn::shape_string(c.shape()) +
                       " must both be [N, n]");
    if (size() == 0) throw std::invalid_argument("dataset: empty");
  }
};

/// Loss with caller-supplied time indices and noise (one t per row).
template <typename T, typename Model>
  requires DenoisingModel<Model, T>
Var<T> loss_conditional(Tape<T>& tape, Model& net, const NoiseSchedule& sched, PredictionMode mode,
                        const Tensor<T>& x0, Var<T> c, std::span<const std::size_t> t, const Tensor<T>& eps) {
  if (x0.rank() != 2 || x0.shape() != eps.shape() || x0.shape() != c.shape())
    throw ShapeError("loss_conditional: x0, eps and c must share shape [batch, n]");
  if (x0.rows() == 0) throw std::invalid_argument("loss_conditional: empty batch");
  if (t.size() != x0.rows()) throw ShapeError("loss_conditional: one time index per row required");
  const std::size_t n = x0.cols();
  Tensor<T> x_t(x0.shape()), target(x0.shape());
  for (std::size_t r = 0; r < x0.rows(); ++r) {
    if (t[r] < 1 || t[r] > sched.steps()) throw std::out_of_range("loss_conditional: t outside 1..T");
    const double ab = sched.alpha_bar(t[r]);
    const T a = static_cast<T>(std::sqrt(ab)), b = static_cast<T>(std::sqrt(1.0 - ab));
    for (std::size_t j = 0; j < n; ++j) {
      const T x = x0(r, j), e = eps(r, j);
      x_t(r, j) = a * x + b * e;
      target(r, j) = mode == PredictionMode::Epsilon ? e : a * e - b * x;
    }
  }
  Var<T> pred = net.forward(tape.constant(std::move(x_t)), t, c);
  return nn::mean_squared_norm(pred, tape.constant(std::move(target)));
}

/// Draws t ~ U{1..T} for every row, then ε ~ N(0, I), and evaluates the loss.
template <typename T, typename Model>
  requires DenoisingModel<Model, T>
Var<T> loss_conditional(Tape<T>& tape, Model& net, const NoiseSchedule& sched, PredictionMode mode,
                        const Tensor<T>& x0, Var<T> c, Rng& rng) {
  std::vector<std::size_t> t(x0.rows());
  for (auto& v : t) v = 1 + rng.index(sched.steps());
  const Tensor<T> eps = standard_normal<T>(x0.shape(), rng);
  return loss_conditional(tape, net, sched, mode, x0, c, t, eps);
}

struct LrStage {
  double lr = 1e-3;
  std::size_t epochs = 1;
};

struct DmTrainOptions {
  std::vector<LrStage> stages{{1e-3, 10}};
  std::size_t batch_size = 100;
  nn::OptimizerKind optimizer = nn::OptimizerKind::Adam;
  std::function<void(std::size_t epoch, double loss)> on_epoch;
};

inline std::size_t total_epochs(const std::vector<LrStage>& stages) {
  return std::accumulate(stages.begin(), stages.end(), std::size_t{0},
                         [](std::size_t s, const LrStage& st) { return s + st.epochs; });
}

/// Fisher–Yates permutation of 0..n-1.
inline std::vector<std::size_t> permutation(std::size_t n, Rng& rng) {
  std::vector<std::size_t> p(n);
  std::iota(p.begin(), p.end(), std::size_t{0});
  for (std::size_t i = n; i > 1; --i) std::swap(p[i - 1], p[rng.index(i)]);
  return p;
}

/**
 * Minibatch training on the conditional loss. Rows are reshuffled every
 * epoch. Returns the mean loss of each epoch.
 */
template <typename T>
std::vector<double> train_dm(Denoiser<T>& net, const NoiseSchedule& sched, PredictionMode mode,
                             const Dataset<T>& data, const DmTrainOptions& opts, Rng& rng) {
  data.validate();
  if (data.dim() != net.dim())
    throw ShapeError("train_dm: dataset dimension " + std::to_string(data.dim()) + " != network dimension " +
                     std::to_string(net.dim()));
  if (net.steps() != sched.steps()) throw std::invalid_argument("train_dm: network and schedule disagree on T");
  if (mode == PredictionMode::Epsilon && sched.zero_snr())
    throw std::invalid_argument("train_dm: epsilon prediction is incompatible with a zero-SNR schedule");
  if (opts.batch_size < 1 || opts.stages.empty()) throw std::invalid_argument("train_dm: empty training recipe");

  auto params = net.parameters();
  nn::Optimizer<T> optimizer({opts.optimizer, opts.stages.front().lr}, params);
  std::vector<double> history;
  const std::size_t N = data.size();
  std::size_t epoch = 0;
  for (const LrStage& stage : opts.stages) {
    optimizer.set_lr(stage.lr);
    for (std::size_t e = 0; e < stage.epochs; ++e, ++epoch) {
      const auto order = permutation(N, rng);
      double total = 0.0;
      std::size_t batches = 0;
      for (std::size_t begin = 0; begin < N; begin += opts.batch_size) {
        const std::size_t end = std::min(N, begin + opts.batch_size);
        const std::span<const std::size_t> idx(order.data() + begin, end - begin);
        const Tensor<T> x0 = data.x0.gather_rows(idx);
        nn::zero_grads(params);
        Tape<T> tape;
        Var<T> loss = loss_conditional(tape, net, sched, mode, x0, tape.constant(data.c.gather_rows(idx)), rng);
        const double value = static_cast<double>(loss.value().item());
        if (!std::isfinite(value))
          throw NumericalError("train_dm: non-finite loss at epoch " + std::to_string(epoch + 1) + ", batch " +
                               std::to_string(batches + 1) + " (lr " + std::to_string(stage.lr) + ")");
        tape.backward(loss);
        optimizer.step();
        total += value;
        ++batches;
      }
      history.push_back(total / static_cast<double>(batches));
      if (opts.on_epoch) opts.on_epoch(epoch + 1, history.back());
    }
  }
  return history;
}

}  // namespace dmchan::diffusion
