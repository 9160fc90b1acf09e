#pragma once

#include <complex>
#include <functional>
#include <stdexcept>
#include <vector>

#include "dmchan/channels/channel.hpp"

namespace dmchan::metrics {

/// Hermitian n×n matrix, row-major.
struct ComplexCovariance {
  std::size_t n = 0;
  std::vector<std::complex<double>> data;

  std::complex<double> operator()(std::size_t i, std::size_t j) const { return data[i * n + j]; }
};

/// Produces channel outputs for a batch of packed complex inputs.
template <typename T>
using Generator = std::function<nn::Tensor<T>(const nn::Tensor<T>&, nn::Rng&)>;

/**
 * Empirical fading covariance: feed x = (1, …, 1) (complex), take the sample
 * covariance of the unpacked outputs and subtract σ²I (σ² per complex symbol).
 */
template <typename T>
ComplexCovariance extract_fading_covariance(const Generator<T>& generator, std::size_t n_c, double sigma,
                                            std::size_t samples, nn::Rng& rng, std::size_t batch = 10000) {
  if (samples < 2) throw std::invalid_argument("extract_fading_covariance: need at least 2 samples");
  if (n_c < 1) throw std::invalid_argument("extract_fading_covariance: n_c must be >= 1");
  std::vector<std::complex<double>> mean(n_c);
  std::vector<std::complex<double>> second(n_c * n_c);
  for (std::size_t done = 0; done < samples; done += batch) {
    const std::size_t rows = std::min(batch, samples - done);
    nn::Tensor<T> x({rows, 2 * n_c});
    for (std::size_t r = 0; r < rows; ++r)
      for (std::size_t i = 0; i < n_c; ++i) x(r, 2 * i) = T{1};
    const nn::Tensor<T> y = generator(x, rng);
    if (y.shape() != x.shape()) throw ShapeError("extract_fading_covariance: generator changed the shape");
    std::vector<std::complex<double>> z(n_c);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < n_c; ++i) z[i] = {static_cast<double>(y(r, 2 * i)), static_cast<double>(y(r, 2 * i + 1))};
      for (std::size_t i = 0; i < n_c; ++i) {
        mean[i] += z[i];
        for (std::size_t j = 0; j < n_c; ++j) second[i * n_c + j] += z[i] * std::conj(z[j]);
      }
    }
  }
  const double N = static_cast<double>(samples);
  ComplexCovariance c{n_c, std::vector<std::complex<double>>(n_c * n_c)};
  for (std::size_t i = 0; i < n_c; ++i)
    for (std::size_t j = 0; j < n_c; ++j) {
      const auto mi = mean[i] / N, mj = mean[j] / N;
      c.data[i * n_c + j] = (second[i * n_c + j] - N * mi * std::conj(mj)) / (N - 1.0);
    }
  for (std::size_t i = 0; i < n_c; ++i) c.data[i * n_c + i] -= sigma * sigma;
  return c;
}

/// Mean over all entries of |Ĉ(i, j) − Σ(i, j)|.
inline double mean_abs_deviation(const ComplexCovariance& c, const channels::CovarianceMatrix& truth) {
  if (c.n != truth.n) throw ShapeError("mean_abs_deviation: size mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < c.n; ++i)
    for (std::size_t j = 0; j < c.n; ++j) s += std::abs(c(i, j) - truth(i, j));
  return s / static_cast<double>(c.n * c.n);
}

}  // namespace dmchan::metrics
