#pragma once

#include <cmath>
#include <complex>
#include <iostream>
#include <numbers>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "dmchan/channels/bessel.hpp"
#include "dmchan/nn/ops.hpp"
#include "dmchan/nn/rng.hpp"

namespace dmchan::channels {

using nn::Rng;
using nn::Tensor;
using nn::Var;

/// y = x + z, z ~ N(0, σ²I).
struct Awgn {
  double sigma = 1.0;
};

/// y = h∘x + z with i.i.d. Rayleigh(σ_R) gains per real coefficient.
struct Rayleigh {
  double sigma_r = 1.0;
  double sigma = 1.0;
};

/// Rapp solid-state amplifier on interleaved complex symbols, then CN(0, σ²) noise.
struct Sspa {
  double p = 3.0;
  double a0 = 1.5;
  double v0 = 5.0;
  double sigma = 1.0;
  std::size_t n_c = 1;
};

/// Correlated complex fading h ~ CN(0, Σ) with Σ from the J0 autocorrelation, CN(0, σ²) noise.
struct Clarke {
  std::size_t n_c = 1;
  double fd_ts = 0.0;
  double sigma = 1.0;
};

using ChannelModel = std::variant<Awgn, Rayleigh, Sspa, Clarke>;

inline std::string channel_name(const ChannelModel& m) {
  struct {
    std::string operator()(const Awgn&) const { return "awgn"; }
    std::string operator()(const Rayleigh&) const { return "rayleigh"; }
    std::string operator()(const Sspa&) const { return "sspa"; }
    std::string operator()(const Clarke&) const { return "clarke"; }
  } v;
  return std::visit(v, m);
}

inline double noise_sigma(const ChannelModel& m) {
  return std::visit([](const auto& c) { return c.sigma; }, m);
}

inline ChannelModel with_sigma(ChannelModel m, double sigma) {
  std::visit([sigma](auto& c) { c.sigma = sigma; }, m);
  return m;
}

/// Real block length fixed by the model, or 0 when any length is accepted.
inline std::size_t required_dim(const ChannelModel& m) {
  if (const auto* s = std::get_if<Sspa>(&m)) return 2 * s->n_c;
  if (const auto* c = std::get_if<Clarke>(&m)) return 2 * c->n_c;
  return 0;
}

inline void validate(const ChannelModel& m) {
  auto fail = [](const std::string& what) { throw std::invalid_argument("channel: " + what); };
  // σ = 0 is accepted for the noiseless test limit.
  if (!(noise_sigma(m) >= 0.0) || !std::isfinite(noise_sigma(m))) fail("sigma must be finite and >= 0");
  if (const auto* r = std::get_if<Rayleigh>(&m); r && !(r->sigma_r > 0.0)) fail("sigma_r must be > 0");
  if (const auto* s = std::get_if<Sspa>(&m)) {
    if (!(s->p > 0.0)) fail("p must be > 0");
    if (!(s->a0 >= 0.0)) fail("A0 must be >= 0");
    if (!(s->v0 >= 0.0)) fail("v0 must be >= 0");
    if (s->n_c < 1) fail("n_c must be >= 1");
  }
  if (const auto* c = std::get_if<Clarke>(&m)) {
    if (c->n_c < 1) fail("n_c must be >= 1");
    if (!(c->fd_ts >= 0.0)) fail("fD_Ts must be >= 0");
  }
}

/**
 * Noise standard deviation per real dimension for a target Eb/N0.
 *
 * Convention: unit average signal power per real dimension and rate
 * R = log2(M)/n bits per real channel use, so σ² = 1 / (2·R·Eb/N0).
 */
inline double ebn0_to_sigma(double ebn0_db, std::size_t m, std::size_t n) {
  if (m < 2) throw std::invalid_argument("ebn0_to_sigma: M must be >= 2");
  if (n < 1) throw std::invalid_argument("ebn0_to_sigma: n must be >= 1");
  if ((m & (m - 1)) != 0)
    std::clog << "warning: M = " << m << " is not a power of two; rate uses fractional bits\n";
  const double rate = std::log2(static_cast<double>(m)) / static_cast<double>(n);
  return std::sqrt(1.0 / (2.0 * rate * std::pow(10.0, ebn0_db / 10.0)));
}

/// The model's own σ for a target Eb/N0: per real dimension for AWGN and
/// Rayleigh, per complex symbol (√2 × the real-dimension value) for SSPA and Clarke.
inline double model_sigma_for_ebn0(const ChannelModel& model, double ebn0_db, std::size_t m, std::size_t n) {
  const double sigma = ebn0_to_sigma(ebn0_db, m, n);
  return required_dim(model) != 0 ? sigma * std::numbers::sqrt2 : sigma;
}

/// Rapp amplitude gain v0 / (1 + (v0·a/A0)^{2p})^{1/(2p)}. A0 = 0 saturates fully (gain 0 for a > 0).
inline double sspa_gain(double a, double p, double a0, double v0) {
  if (a < 0.0) throw std::invalid_argument("sspa_gain: amplitude must be >= 0");
  if (a == 0.0) return v0;
  if (a0 == 0.0 || v0 == 0.0) return 0.0;
  const double r = v0 * a / a0;
  if (r <= 1.0) return v0 / std::pow(1.0 + std::pow(r, 2.0 * p), 1.0 / (2.0 * p));
  // Above the knee: (1 + r^{2p})^{1/(2p)} = r·(1 + r^{-2p})^{1/(2p)}.
  return (a0 / a) * std::exp(-std::log1p(std::pow(r, -2.0 * p)) / (2.0 * p));
}

/// (v0·a/A0)^{2p} / (1 + (v0·a/A0)^{2p}), the factor in the gain's derivative.
inline double sspa_saturation(double a, double p, double a0, double v0) {
  if (a == 0.0 || a0 == 0.0 || v0 == 0.0) return a == 0.0 ? 0.0 : 1.0;
  const double r = v0 * a / a0;
  if (r <= 1.0) {
    const double u = std::pow(r, 2.0 * p);
    return u / (1.0 + u);
  }
  return 1.0 / (1.0 + std::pow(r, -2.0 * p));
}

/// Applies the SSPA gain per interleaved complex symbol; differentiable in x.
template <typename T>
Var<T> sspa_amplify(Var<T> x, const Sspa& s) {
  const Tensor<T>& xv = x.value();
  if (xv.size() % 2 != 0) throw ShapeError("sspa: odd number of real components");
  Tensor<T> y(xv.shape());
  for (std::size_t i = 0; i < xv.size(); i += 2) {
    const double re = xv[i], im = xv[i + 1];
    const double g = sspa_gain(std::hypot(re, im), s.p, s.a0, s.v0);
    y[i] = static_cast<T>(g * re);
    y[i + 1] = static_cast<T>(g * im);
  }
  return x.tape->push(std::move(y), {x}, [x, s](nn::Tape<T>& tape, std::size_t self) {
    if (!tape.needs_grad(x.id)) return;
    const Tensor<T>& g = tape.grad(self);
    const Tensor<T>& xv = tape.value(x.id);
    Tensor<T>& gx = tape.grad_slot(x.id);
    for (std::size_t i = 0; i < g.size(); i += 2) {
      const double re = xv[i], im = xv[i + 1];
      const double r = std::hypot(re, im);
      const double gain = sspa_gain(r, s.p, s.a0, s.v0);
      // J = gain·I + (gain'(r)/r)·x xᵀ with gain'(r)/r = −gain·w/r².
      double radial = 0.0;
      if (r > 0.0) radial = -gain * sspa_saturation(r, s.p, s.a0, s.v0) / (r * r);
      const double dot = g[i] * re + g[i + 1] * im;
      gx[i] += static_cast<T>(gain * g[i] + radial * dot * re);
      gx[i + 1] += static_cast<T>(gain * g[i + 1] + radial * dot * im);
    }
  });
}

/// Symmetric Toeplitz autocorrelation matrix, row-major.
struct CovarianceMatrix {
  std::size_t n = 0;
  std::vector<double> data;

  double operator()(std::size_t i, std::size_t j) const { return data[i * n + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data[i * n + j]; }
};

/// Σ(i, j) = J0(2π·fD_Ts·|i − j|).
inline CovarianceMatrix clarke_covariance(std::size_t n_c, double fd_ts) {
  if (n_c < 1) throw std::invalid_argument("clarke_covariance: n_c must be >= 1");
  CovarianceMatrix c{n_c, std::vector<double>(n_c * n_c)};
  std::vector<double> lag(n_c);
  for (std::size_t l = 0; l < n_c; ++l) lag[l] = bessel_j0(2.0 * std::numbers::pi * fd_ts * static_cast<double>(l));
  for (std::size_t i = 0; i < n_c; ++i)
    for (std::size_t j = 0; j < n_c; ++j) c(i, j) = lag[i > j ? i - j : j - i];
  return c;
}

/// Lower Cholesky factor; returns false if a pivot is not positive.
inline bool cholesky(const CovarianceMatrix& a, std::vector<double>& lower) {
  const std::size_t n = a.n;
  lower.assign(n * n, 0.0);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= lower[j * n + k] * lower[j * n + k];
    if (!(d > 0.0)) return false;
    const double ljj = std::sqrt(d);
    lower[j * n + j] = ljj;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= lower[i * n + k] * lower[j * n + k];
      lower[i * n + j] = s / ljj;
    }
  }
  return true;
}

struct CholeskyFactor {
  std::size_t n = 0;
  std::vector<double> lower;
  double jitter = 0.0;
};

/// Cholesky of a PSD matrix, adding diagonal jitter 1e-12, 1e-11, ... 1e-9 until it succeeds.
inline CholeskyFactor cholesky_with_jitter(const CovarianceMatrix& a) {
  CholeskyFactor f{a.n, {}, 0.0};
  if (cholesky(a, f.lower)) return f;
  for (double jitter = 1e-12; jitter <= 1e-9 * 1.0001; jitter *= 10.0) {
    CovarianceMatrix b = a;
    for (std::size_t i = 0; i < a.n; ++i) b(i, i) += jitter;
    if (cholesky(b, f.lower)) {
      f.jitter = jitter;
      return f;
    }
  }
  throw NumericalError("cholesky_with_jitter: matrix is not positive semi-definite");
}

inline std::vector<double> pack_complex(std::span<const std::complex<double>> z) {
  std::vector<double> out(2 * z.size());
  for (std::size_t i = 0; i < z.size(); ++i) {
    out[2 * i] = z[i].real();
    out[2 * i + 1] = z[i].imag();
  }
  return out;
}

inline std::vector<std::complex<double>> unpack_complex(std::span<const double> v) {
  if (v.size() % 2 != 0) throw std::invalid_argument("unpack_complex: odd-length input");
  std::vector<std::complex<double>> out(v.size() / 2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = {v[2 * i], v[2 * i + 1]};
  return out;
}

namespace detail {

template <typename T>
Tensor<T> gaussian(const nn::Shape& shape, double stddev, Rng& rng) {
  Tensor<T> z(shape);
  if (stddev == 0.0) return z;
  for (auto& v : z.data()) v = static_cast<T>(stddev * rng.normal());
  return z;
}

}  // namespace detail

/**
 * One channel use per row of x [batch, n].
 *
 * Random draws (gains, then noise) are taken from rng in a fixed order and
 * treated as constants, so the output is differentiable in x.
 */
template <typename T>
Var<T> apply_channel(const ChannelModel& model, Var<T> x, Rng& rng) {
  validate(model);
  const Tensor<T>& xv = x.value();
  if (xv.rank() != 2) throw ShapeError("apply_channel: expected [batch, n] input");
  xv.require_finite("apply_channel");
  const std::size_t need = required_dim(model);
  if (need != 0 && xv.cols() != need)
    throw ShapeError("apply_channel: " + channel_name(model) + " expects n = " + std::to_string(need) + ", got " +
                     std::to_string(xv.cols()));
  nn::Tape<T>& tape = *x.tape;
  const nn::Shape shape = xv.shape();

  if (const auto* a = std::get_if<Awgn>(&model)) {
    return nn::add(x, tape.constant(detail::gaussian<T>(shape, a->sigma, rng)));
  }
  if (const auto* r = std::get_if<Rayleigh>(&model)) {
    Tensor<T> h(shape);
    for (auto& v : h.data()) v = static_cast<T>(r->sigma_r * std::sqrt(-2.0 * std::log(rng.uniform_open0())));
    Var<T> faded = nn::mul(x, tape.constant(std::move(h)));
    return nn::add(faded, tape.constant(detail::gaussian<T>(shape, r->sigma, rng)));
  }
  if (const auto* s = std::get_if<Sspa>(&model)) {
    Var<T> amplified = sspa_amplify(x, *s);
    return nn::add(amplified, tape.constant(detail::gaussian<T>(shape, s->sigma / std::numbers::sqrt2, rng)));
  }
  const auto& c = std::get<Clarke>(model);
  const CholeskyFactor chol = cholesky_with_jitter(clarke_covariance(c.n_c, c.fd_ts));
  const std::size_t nc = c.n_c;
  Tensor<T> h(shape);
  std::vector<double> wr(nc), wi(nc);
  for (std::size_t b = 0; b < shape[0]; ++b) {
    for (std::size_t i = 0; i < nc; ++i) {
      wr[i] = rng.normal();
      wi[i] = rng.normal();
    }
    for (std::size_t i = 0; i < nc; ++i) {
      double hr = 0.0, hi = 0.0;
      for (std::size_t k = 0; k <= i; ++k) {
        hr += chol.lower[i * nc + k] * wr[k];
        hi += chol.lower[i * nc + k] * wi[k];
      }
      h(b, 2 * i) = static_cast<T>(hr / std::numbers::sqrt2);
      h(b, 2 * i + 1) = static_cast<T>(hi / std::numbers::sqrt2);
    }
  }
  Var<T> faded = nn::complex_mul(x, h);
  return nn::add(faded, tape.constant(detail::gaussian<T>(shape, c.sigma / std::numbers::sqrt2, rng)));
}

/// Plain-value simulation; same draws as the differentiable overload.
template <typename T>
Tensor<T> apply_channel(const ChannelModel& model, const Tensor<T>& x, Rng& rng) {
  nn::Tape<T> tape(false);
  return apply_channel(model, tape.constant(x), rng).value();
}

}  // namespace dmchan::channels
