#pragma once

#include <cmath>
#include <stdexcept>

#include "dmchan/diffusion/schedule.hpp"
#include "dmchan/nn/tensor.hpp"

namespace dmchan::diffusion {

namespace detail {

template <typename T, typename F>
nn::Tensor<T> zip(const nn::Tensor<T>& a, const nn::Tensor<T>& b, const char* what, F f) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(what) + ": shape mismatch " + nn::shape_string(a.shape()) + " vs " +
                     nn::shape_string(b.shape()));
  nn::Tensor<T> y(a.shape());
  for (std::size_t i = 0; i < y.size(); ++i) y[i] = f(a[i], b[i]);
  return y;
}

inline void check_t(const NoiseSchedule& sched, std::size_t t, const char* what) {
  if (t < 1 || t > sched.steps()) throw std::out_of_range(std::string(what) + ": t outside 1..T");
}

}  // namespace detail

/// x_t = √ᾱ_t·x0 + √(1−ᾱ_t)·ε.
template <typename T>
nn::Tensor<T> forward_sample(const NoiseSchedule& sched, const nn::Tensor<T>& x0, std::size_t t,
                             const nn::Tensor<T>& eps) {
  detail::check_t(sched, t, "forward_sample");
  const double ab = sched.alpha_bar(t);
  const T a = static_cast<T>(std::sqrt(ab)), b = static_cast<T>(std::sqrt(1.0 - ab));
  return detail::zip(x0, eps, "forward_sample", [a, b](T x, T e) { return a * x + b * e; });
}

/// v = √ᾱ·ε − √(1−ᾱ)·x0.
template <typename T>
nn::Tensor<T> velocity(double alpha_bar, const nn::Tensor<T>& x0, const nn::Tensor<T>& eps) {
  const T a = static_cast<T>(std::sqrt(alpha_bar)), b = static_cast<T>(std::sqrt(1.0 - alpha_bar));
  return detail::zip(x0, eps, "velocity", [a, b](T x, T e) { return a * e - b * x; });
}

/// x̂ = √ᾱ·x_t − √(1−ᾱ)·v̂.
template <typename T>
nn::Tensor<T> x0_from_v(double alpha_bar, const nn::Tensor<T>& x_t, const nn::Tensor<T>& v) {
  const T a = static_cast<T>(std::sqrt(alpha_bar)), b = static_cast<T>(std::sqrt(1.0 - alpha_bar));
  return detail::zip(x_t, v, "x0_from_v", [a, b](T x, T vv) { return a * x - b * vv; });
}

/// ε̂ = √(1−ᾱ)·x_t + √ᾱ·v̂.
template <typename T>
nn::Tensor<T> eps_from_v(double alpha_bar, const nn::Tensor<T>& x_t, const nn::Tensor<T>& v) {
  const T a = static_cast<T>(std::sqrt(alpha_bar)), b = static_cast<T>(std::sqrt(1.0 - alpha_bar));
  return detail::zip(x_t, v, "eps_from_v", [a, b](T x, T vv) { return b * x + a * vv; });
}

/// x̂ = (x_t − √(1−ᾱ)·ε̂)/√ᾱ; undefined at ᾱ = 0.
template <typename T>
nn::Tensor<T> x0_from_eps(double alpha_bar, const nn::Tensor<T>& x_t, const nn::Tensor<T>& eps) {
  if (alpha_bar == 0.0) throw std::invalid_argument("x0_from_eps: alpha_bar = 0");
  const double a = std::sqrt(alpha_bar), b = std::sqrt(1.0 - alpha_bar);
  return detail::zip(x_t, eps, "x0_from_eps",
                     [a, b](T x, T e) { return static_cast<T>((static_cast<double>(x) - b * e) / a); });
}

}  // namespace dmchan::diffusion
