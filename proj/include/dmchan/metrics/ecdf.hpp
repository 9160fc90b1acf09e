#pragma once

#include <algorithm>
#include <cmath>
#include <span>
#include <stdexcept>
#include <vector>

#include "dmchan/nn/tensor.hpp"

namespace dmchan::metrics {

/// Step CDF: F(values[i]) = cdf[i] over sorted values.
struct Ecdf {
  std::vector<double> values;
  std::vector<double> cdf;

  /// Fraction of samples <= x.
  double operator()(double x) const {
    const auto it = std::upper_bound(values.begin(), values.end(), x);
    return static_cast<double>(it - values.begin()) / static_cast<double>(values.size());
  }
};

/// Equal-width bins over [lo, hi]; the last bin is closed on the right.
struct Histogram {
  double lo = 0.0;
  double hi = 0.0;
  std::vector<std::size_t> counts;

  double width() const { return counts.empty() ? 0.0 : (hi - lo) / static_cast<double>(counts.size()); }
};

struct EcdfAndHistogram {
  Ecdf ecdf;
  Histogram histogram;
};

inline EcdfAndHistogram empirical_cdf_and_hist(std::span<const double> values, std::size_t bins) {
  if (values.empty()) throw std::invalid_argument("empirical_cdf_and_hist: no samples");
  if (bins < 1) throw std::invalid_argument("empirical_cdf_and_hist: bins must be >= 1");
  EcdfAndHistogram out;
  auto& e = out.ecdf;
  e.values.assign(values.begin(), values.end());
  std::sort(e.values.begin(), e.values.end());
  const double n = static_cast<double>(e.values.size());
  e.cdf.resize(e.values.size());
  // Ties share the CDF value of their last occurrence.
  for (std::size_t i = e.values.size(); i-- > 0;)
    e.cdf[i] = (i + 1 < e.values.size() && e.values[i + 1] == e.values[i]) ? e.cdf[i + 1] : static_cast<double>(i + 1) / n;

  auto& h = out.histogram;
  h.lo = e.values.front();
  h.hi = e.values.back();
  h.counts.assign(bins, 0);
  const double span = h.hi - h.lo;
  for (double v : e.values) {
    std::size_t k = 0;
    if (span > 0.0) k = std::min(bins - 1, static_cast<std::size_t>((v - h.lo) / span * static_cast<double>(bins)));
    ++h.counts[k];
  }
  return out;
}

/// Euclidean norm of every row, e.g. channel-output magnitudes.
template <typename T>
std::vector<double> row_norms(const nn::Tensor<T>& a) {
  std::vector<double> out(a.rows());
  for (std::size_t r = 0; r < a.rows(); ++r) {
    double s = 0.0;
    for (T v : a.row(r)) s += static_cast<double>(v) * static_cast<double>(v);
    out[r] = std::sqrt(s);
  }
  return out;
}

}  // namespace dmchan::metrics
