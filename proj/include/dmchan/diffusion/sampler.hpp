#pragma once

#include <algorithm>
#include <cmath>
#include <concepts>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dmchan/diffusion/denoiser.hpp"
#include "dmchan/diffusion/schedule.hpp"

namespace dmchan::diffusion {

/// Anything that maps (x_t, per-row t, c) to a prediction on the same tape.
template <typename M, typename T>
concept DenoisingModel = requires(M& m, Var<T> x, std::span<const std::size_t> t, Var<T> c) {
  { m.forward(x, t, c) } -> std::same_as<Var<T>>;
};

enum class Sampler { DDPM, DDIM };

inline std::string_view to_string(Sampler s) { return s == Sampler::DDPM ? "ddpm" : "ddim"; }

inline Sampler sampler_from_string(std::string_view s) {
  if (s == "ddpm") return Sampler::DDPM;
  if (s == "ddim") return Sampler::DDIM;
  throw std::invalid_argument("unknown sampler '" + std::string(s) + "'");
}

/// Increasing time steps τ_1 < … < τ_S = T visited by the reverse process; τ_0 = 0 implied.
struct Trajectory {
  std::size_t T = 0;
  std::vector<std::size_t> tau;

  std::size_t length() const { return tau.size(); }
  bool full() const { return tau.size() == T; }
};

/// Uniformly spaced τ_i = round(i·T/S), with τ_S = T.
inline Trajectory make_trajectory(std::size_t T, std::size_t S) {
  if (S < 1) throw std::invalid_argument("make_trajectory: S must be >= 1");
  if (S > T) throw std::invalid_argument("make_trajectory: S = " + std::to_string(S) + " exceeds T = " + std::to_string(T));
  Trajectory traj{T, {}};
  for (std::size_t i = 1; i <= S; ++i) {
    const auto tau = static_cast<std::size_t>(std::llround(static_cast<double>(i) * static_cast<double>(T) /
                                                           static_cast<double>(S)));
    if (traj.tau.empty() || tau > traj.tau.back()) traj.tau.push_back(tau);
  }
  traj.tau.back() = T;
  return traj;
}

/// x_prev = x·x_t + pred·prediction + noise·ε.
struct StepCoefficients {
  double x = 0.0;
  double pred = 0.0;
  double noise = 0.0;
};

inline void require_mode_compatible(const NoiseSchedule& sched, PredictionMode mode, std::size_t t) {
  if (mode == PredictionMode::Epsilon && sched.alpha_bar(t) == 0.0)
    throw std::invalid_argument("epsilon prediction cannot recover x0 at t = " + std::to_string(t) +
                                " (alpha_bar = 0); use v prediction with a zero-SNR schedule");
}

/**
 * Ancestral DDPM step t → t−1 using the posterior-mean form
 *   ε: x_{t−1} = x_t/√α_t − (1−α_t)/(√(1−ᾱ_t)·√α_t)·ε̂ + σ_t·ε
 *   v: x_{t−1} = √α_t·x_t − √ᾱ_{t−1}(1−α_t)/√(1−ᾱ_t)·v̂ + σ_t·ε
 * The noise term is dropped at t = 1.
 */
inline StepCoefficients ddpm_coefficients(const NoiseSchedule& sched, PredictionMode mode, std::size_t t) {
  if (t < 1 || t > sched.steps()) throw std::out_of_range("ddpm step: t out of range");
  const double a = sched.alpha(t), ab = sched.alpha_bar(t), ab_prev = sched.alpha_bar(t - 1), b = sched.beta(t);
  StepCoefficients k;
  k.noise = t == 1 ? 0.0 : sched.sigma(t);
  if (b == 0.0) {
    k.x = 1.0;
    return k;
  }
  if (mode == PredictionMode::Epsilon) {
    require_mode_compatible(sched, mode, t);
    k.x = 1.0 / std::sqrt(a);
    k.pred = -b / (std::sqrt(1.0 - ab) * std::sqrt(a));
  } else {
    k.x = std::sqrt(a);
    k.pred = -std::sqrt(ab_prev) * b / std::sqrt(1.0 - ab);
  }
  return k;
}

/**
 * Generalised (non-Markovian) step from t to t_prev with explicit noise std σ:
 *   x_prev = √ᾱ_prev·x̂ + √(1−ᾱ_prev−σ²)·ε̂ + σ·ε
 * where x̂ and ε̂ are recovered from the prediction. σ = 0 is the
 * deterministic step; with σ from the posterior variance and t_prev = t−1 it
 * coincides with ddpm_coefficients.
 */
inline StepCoefficients generalized_coefficients(const NoiseSchedule& sched, PredictionMode mode, std::size_t t,
                                                 std::size_t t_prev, double sigma) {
  if (t < 1 || t > sched.steps() || t_prev >= t) throw std::out_of_range("generalized step: need 0 <= t_prev < t <= T");
  const double ab = sched.alpha_bar(t), ab_prev = sched.alpha_bar(t_prev);
  const double residual = 1.0 - ab_prev - sigma * sigma;
  if (residual < -1e-12) throw std::invalid_argument("generalized step: sigma too large for the target step");
  const double keep = std::sqrt(std::max(residual, 0.0));
  StepCoefficients k;
  k.noise = sigma;
  if (mode == PredictionMode::Epsilon) {
    require_mode_compatible(sched, mode, t);
    // x̂ = (x − √(1−ᾱ)ε̂)/√ᾱ
    k.x = std::sqrt(ab_prev) / std::sqrt(ab);
    k.pred = -std::sqrt(ab_prev) * std::sqrt(1.0 - ab) / std::sqrt(ab) + keep;
  } else {
    // x̂ = √ᾱ·x − √(1−ᾱ)·v̂,  ε̂ = √(1−ᾱ)·x + √ᾱ·v̂
    k.x = std::sqrt(ab_prev) * std::sqrt(ab) + keep * std::sqrt(1.0 - ab);
    k.pred = -std::sqrt(ab_prev) * std::sqrt(1.0 - ab) + keep * std::sqrt(ab);
  }
  return k;
}

/**
 * Deterministic DDIM step τ_i → τ_{i−1}:
 *   ε: x_prev = √ᾱ_p/√ᾱ·x − (√ᾱ_p·√(1−ᾱ)/√ᾱ − √(1−ᾱ_p))·ε̂
 *   v: x_prev = (√(ᾱ_p·ᾱ) + √((1−ᾱ_p)(1−ᾱ)))·x + (√(ᾱ(1−ᾱ_p)) − √(ᾱ_p(1−ᾱ)))·v̂
 */
inline StepCoefficients ddim_coefficients(const NoiseSchedule& sched, PredictionMode mode, std::size_t t,
                                          std::size_t t_prev) {
  if (t < 1 || t > sched.steps() || t_prev >= t) throw std::out_of_range("ddim step: need 0 <= t_prev < t <= T");
  const double ab = sched.alpha_bar(t), ab_p = sched.alpha_bar(t_prev);
  StepCoefficients k;
  if (mode == PredictionMode::Epsilon) {
    require_mode_compatible(sched, mode, t);
    k.x = std::sqrt(ab_p) / std::sqrt(ab);
    k.pred = -(std::sqrt(ab_p) * std::sqrt(1.0 - ab) / std::sqrt(ab) - std::sqrt(1.0 - ab_p));
  } else {
    k.x = std::sqrt(ab_p * ab) + std::sqrt((1.0 - ab_p) * (1.0 - ab));
    k.pred = std::sqrt(ab * (1.0 - ab_p)) - std::sqrt(ab_p * (1.0 - ab));
  }
  return k;
}

/// Combines x, prediction and (optional) noise with the step coefficients.
template <typename T>
Tensor<T> apply_step(const StepCoefficients& k, const Tensor<T>& x, const Tensor<T>& pred, const Tensor<T>* eps) {
  if (x.shape() != pred.shape()) throw ShapeError("apply_step: prediction shape mismatch");
  const T cx = static_cast<T>(k.x), cp = static_cast<T>(k.pred);
  Tensor<T> y(x.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = cx * x[i] + cp * pred[i];
  if (eps) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += static_cast<T>(k.noise * static_cast<double>((*eps)[i]));
  }
  return y;
}

template <typename T>
Tensor<T> standard_normal(const nn::Shape& shape, Rng& rng) {
  Tensor<T> z(shape);
  for (auto& v : z.data()) v = static_cast<T>(rng.normal());
  return z;
}

/// One DDPM step with a plain-value predictor `pred(x_t, t, c) -> Tensor`.
template <typename T, typename Predict>
Tensor<T> ddpm_step(const NoiseSchedule& sched, Predict&& pred, PredictionMode mode, const Tensor<T>& x_t,
                    std::size_t t, const Tensor<T>& c, Rng& rng) {
  const StepCoefficients k = ddpm_coefficients(sched, mode, t);
  const Tensor<T> p = pred(x_t, t, c);
  if (k.noise == 0.0) return apply_step<T>(k, x_t, p, nullptr);
  const Tensor<T> eps = standard_normal<T>(x_t.shape(), rng);
  return apply_step<T>(k, x_t, p, &eps);
}

/// One deterministic DDIM step τ_i → τ_{i−1}.
template <typename T, typename Predict>
Tensor<T> ddim_step(const NoiseSchedule& sched, Predict&& pred, PredictionMode mode, const Tensor<T>& x,
                    std::size_t t, std::size_t t_prev, const Tensor<T>& c) {
  const StepCoefficients k = ddim_coefficients(sched, mode, t, t_prev);
  return apply_step<T>(k, x, pred(x, t, c), nullptr);
}

/// What the reverse process runs.
struct SamplingPlan {
  Sampler sampler = Sampler::DDPM;
  Trajectory trajectory;
  bool ddpm_deterministic = false;  ///< DDPM with σ_t forced to 0 (generalised form)
};

inline SamplingPlan make_plan(Sampler sampler, std::size_t T, std::size_t S = 0) {
  return SamplingPlan{sampler, make_trajectory(T, sampler == Sampler::DDPM || S == 0 ? T : S), false};
}

/// (t, t_prev, coefficients) for every step of the plan, in execution order.
struct PlannedStep {
  std::size_t t;
  std::size_t t_prev;
  StepCoefficients k;
};

inline std::vector<PlannedStep> plan_steps(const NoiseSchedule& sched, PredictionMode mode, const SamplingPlan& plan) {
  const auto& tau = plan.trajectory.tau;
  if (plan.trajectory.T != sched.steps())
    throw std::invalid_argument("sampling plan built for T = " + std::to_string(plan.trajectory.T) +
                                " but schedule has T = " + std::to_string(sched.steps()));
  if (tau.empty()) throw std::invalid_argument("sampling plan: empty trajectory");
  if (plan.sampler == Sampler::DDPM && !plan.trajectory.full())
    throw std::invalid_argument("DDPM sampling requires the full trajectory (S = T)");
  std::vector<PlannedStep> steps;
  for (std::size_t i = tau.size(); i-- > 0;) {
    const std::size_t t = tau[i];
    const std::size_t t_prev = i == 0 ? 0 : tau[i - 1];
    StepCoefficients k;
    if (plan.sampler == Sampler::DDIM) {
      k = ddim_coefficients(sched, mode, t, t_prev);
    } else if (plan.ddpm_deterministic) {
      k = generalized_coefficients(sched, mode, t, t_prev, 0.0);
    } else {
      k = ddpm_coefficients(sched, mode, t);
    }
    steps.push_back({t, t_prev, k});
  }
  return steps;
}

/**
 * Differentiable reverse chain on an existing tape: x_T ~ N(0, I) (constant),
 * then every prediction is recorded, so gradients reach c and the network.
 */
template <typename T, typename Model>
  requires DenoisingModel<Model, T>
Var<T> sample(const NoiseSchedule& sched, Model& net, PredictionMode mode, const SamplingPlan& plan, Var<T> c,
              Rng& rng) {
  const auto steps = plan_steps(sched, mode, plan);
  Tape<T>& tape = *c.tape;
  Var<T> x = tape.constant(standard_normal<T>(c.shape(), rng));
  const std::vector<std::size_t> dummy(c.shape().at(0));
  std::vector<std::size_t> ts(c.shape().at(0));
  for (const auto& s : steps) {
    std::fill(ts.begin(), ts.end(), s.t);
    Var<T> p = net.forward(x, ts, c);
    x = nn::lincomb(static_cast<T>(s.k.x), x, static_cast<T>(s.k.pred), p);
    if (s.k.noise != 0.0) {
      Tensor<T> eps = standard_normal<T>(c.shape(), rng);
      for (auto& v : eps.data()) v = static_cast<T>(s.k.noise * static_cast<double>(v));
      x = nn::add(x, tape.constant(std::move(eps)));
    }
  }
  return x;
}

/// Value-only reverse chain; a fresh non-recording tape per step keeps memory flat.
template <typename T, typename Model>
  requires DenoisingModel<Model, T>
Tensor<T> sample(const NoiseSchedule& sched, Model& net, PredictionMode mode, const SamplingPlan& plan,
                 const Tensor<T>& c, Rng& rng) {
  const auto steps = plan_steps(sched, mode, plan);
  Tensor<T> x = standard_normal<T>(c.shape(), rng);
  std::vector<std::size_t> ts(c.rows());
  for (const auto& s : steps) {
    std::fill(ts.begin(), ts.end(), s.t);
    Tensor<T> p;
    {
      Tape<T> tape(false);
      p = net.forward(tape.constant(x), ts, tape.constant(c)).value();
    }
    const T cx = static_cast<T>(s.k.x), cp = static_cast<T>(s.k.pred);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = cx * x[i] + cp * p[i];
    if (s.k.noise != 0.0) {
      for (std::size_t i = 0; i < x.size(); ++i) x[i] += static_cast<T>(s.k.noise * rng.normal());
    }
  }
  return x;
}

/**
 * Chunked, optionally multi-threaded value sampling. Chunk k draws from
 * Rng(seed).split(k), so the result does not depend on the thread count.
 */
template <typename T, typename Model>
  requires DenoisingModel<Model, T>
Tensor<T> sample_chunked(const NoiseSchedule& sched, Model& net, PredictionMode mode, const SamplingPlan& plan,
                         const Tensor<T>& c, std::uint64_t seed, std::size_t chunk = 4096, unsigned threads = 0) {
  plan_steps(sched, mode, plan);  // validate before spawning workers
  const std::size_t rows = c.rows();
  const std::size_t chunks = (rows + chunk - 1) / chunk;
  std::vector<Tensor<T>> parts(chunks);
  auto work = [&](std::size_t k) {
    Rng rng = Rng(seed).split(k);
    const std::size_t begin = k * chunk, end = std::min(rows, begin + chunk);
    parts[k] = sample<T>(sched, net, mode, plan, c.slice_rows(begin, end), rng);
  };
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  if (threads <= 1 || chunks <= 1) {
    for (std::size_t k = 0; k < chunks; ++k) work(k);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t k = w; k < chunks; k += threads) work(k);
      });
    for (auto& th : pool) th.join();
  }
  return nn::concat_rows<T>(parts);
}

}  // namespace dmchan::diffusion
