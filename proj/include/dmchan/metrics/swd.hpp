#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "dmchan/nn/rng.hpp"
#include "dmchan/nn/tensor.hpp"

namespace dmchan::metrics {

using nn::Rng;
using nn::Tensor;

/// Exact 1-D Wasserstein-1 between equal-size empirical samples: sort both, mean |x_(j) − y_(j)|.
inline double wasserstein1_1d(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size())
    throw std::invalid_argument("wasserstein1_1d: length mismatch (" + std::to_string(x.size()) + " vs " +
                                std::to_string(y.size()) + ")");
  if (x.empty()) throw std::invalid_argument("wasserstein1_1d: empty samples");
  std::vector<double> a(x.begin(), x.end()), b(y.begin(), y.end());
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s / static_cast<double>(a.size());
}

/// K unit vectors in d dimensions, drawn as normalised isotropic Gaussians.
struct ProjectionSet {
  std::size_t dim = 0;
  std::vector<std::vector<double>> directions;

  std::size_t size() const { return directions.size(); }
};

inline ProjectionSet make_projections(std::size_t dim, std::size_t count, Rng& rng) {
  if (dim < 1 || count < 1) throw std::invalid_argument("make_projections: dim and count must be >= 1");
  ProjectionSet p{dim, {}};
  p.directions.reserve(count);
  while (p.directions.size() < count) {
    std::vector<double> v(dim);
    double norm = 0.0;
    for (auto& x : v) {
      x = rng.normal();
      norm += x * x;
    }
    norm = std::sqrt(norm);
    if (norm < 1e-12) continue;
    for (auto& x : v) x /= norm;
    p.directions.push_back(std::move(v));
  }
  return p;
}

/// Random subset of `count` rows, order preserved.
template <typename T>
Tensor<T> subsample_rows(const Tensor<T>& a, std::size_t count, Rng& rng) {
  if (count >= a.rows()) return a;
  std::vector<std::size_t> idx(a.rows());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  for (std::size_t i = 0; i < count; ++i) std::swap(idx[i], idx[i + rng.index(idx.size() - i)]);
  idx.resize(count);
  std::sort(idx.begin(), idx.end());
  return a.gather_rows(idx);
}

namespace detail {

template <typename T>
std::vector<double> project(const Tensor<T>& a, std::span<const double> theta) {
  std::vector<double> out(a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    auto row = a.row(r);
    double s = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) s += static_cast<double>(row[j]) * theta[j];
    out[r] = s;
  }
  return out;
}

template <typename T>
void check_sets(const Tensor<T>& a, const Tensor<T>& b, std::size_t dim) {
  if (a.rank() != 2 || b.rank() != 2) throw ShapeError("swd: sample sets must be [N, d]");
  if (a.cols() != b.cols() || a.cols() != dim)
    throw ShapeError("swd: dimension mismatch (" + std::to_string(a.cols()) + ", " + std::to_string(b.cols()) +
                     ", projections " + std::to_string(dim) + ")");
  if (a.rows() < 2 || a.rows() != b.rows()) throw std::invalid_argument("swd: need equal N >= 2");
  a.require_finite("swd");
  b.require_finite("swd");
}

}  // namespace detail

/// Sliced W1 between equal-size sets over fixed projections; projections may run on several threads.
template <typename T>
double swd(const Tensor<T>& a, const Tensor<T>& b, const ProjectionSet& proj, unsigned threads = 1) {
  detail::check_sets(a, b, proj.dim);
  std::vector<double> per(proj.size());
  auto work = [&](std::size_t k) {
    per[k] = wasserstein1_1d(detail::project(a, proj.directions[k]), detail::project(b, proj.directions[k]));
  };
  if (threads <= 1) {
    for (std::size_t k = 0; k < per.size(); ++k) work(k);
  } else {
    std::vector<std::thread> pool;
    for (unsigned w = 0; w < threads; ++w)
      pool.emplace_back([&, w] {
        for (std::size_t k = w; k < per.size(); k += threads) work(k);
      });
    for (auto& th : pool) th.join();
  }
  double s = 0.0;
  for (double v : per) s += v;  // fixed summation order keeps the result thread-count independent
  return s / static_cast<double>(per.size());
}

/**
 * Sliced W1 with K fresh projections. The larger set is subsampled to the
 * size of the smaller; projections are drawn before subsampling.
 */
template <typename T>
double swd(const Tensor<T>& a, const Tensor<T>& b, std::size_t projections, Rng& rng, unsigned threads = 1) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.cols())
    throw ShapeError("swd: dimension mismatch " + nn::shape_string(a.shape()) + " vs " + nn::shape_string(b.shape()));
  const ProjectionSet proj = make_projections(a.cols(), projections, rng);
  const std::size_t n = std::min(a.rows(), b.rows());
  return swd(subsample_rows(a, n, rng), subsample_rows(b, n, rng), proj, threads);
}

}  // namespace dmchan::metrics
