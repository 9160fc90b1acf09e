#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace dmchan {

/// Thrown when operand shapes are incompatible.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a NaN or Inf shows up where a finite value is required.
struct NumericalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

namespace nn {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
}

inline std::string shape_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? ", " : "") << shape[i];
  os << ']';
  return os.str();
}

/**
 * Dense row-major array tagged with its shape.
 *
 * Scalars have an empty shape and one element. Most of the library works on
 * rank-2 tensors laid out as [batch, features]; rank-1 tensors are used for
 * bias vectors.
 */
template <typename T>
class Tensor {
 public:
  using value_type = T;

  Tensor() : shape_{0}, data_{} {}

  explicit Tensor(Shape shape, T fill = T{0}) : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

  Tensor(Shape shape, std::vector<T> data) : shape_(std::move(shape)), data_(std::move(data)) {
    if (shape_size(shape_) != data_.size())
      throw ShapeError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                       shape_string(shape_));
  }

  static Tensor scalar(T v) { return Tensor(Shape{}, std::vector<T>{v}); }

  static Tensor matrix(std::size_t rows, std::size_t cols, std::initializer_list<T> values) {
    return Tensor({rows, cols}, std::vector<T>(values));
  }

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }

  // Rank 0 and rank 1 tensors read as a single row.
  std::size_t rows() const { return shape_.size() < 2 ? 1 : shape_[0]; }
  std::size_t cols() const {
    if (shape_.empty()) return 1;
    return shape_.size() == 1 ? shape_[0] : shape_[1];
  }

  std::span<T> data() { return data_; }
  std::span<const T> data() const { return data_; }
  const std::vector<T>& vec() const { return data_; }
  std::vector<T>& vec() { return data_; }

  T& operator[](std::size_t i) { return data_[i]; }
  const T& operator[](std::size_t i) const { return data_[i]; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * shape_[1] + c]; }
  const T& operator()(std::size_t r, std::size_t c) const { return data_[r * shape_[1] + c]; }

  std::span<T> row(std::size_t r) { return std::span<T>(data_).subspan(r * cols(), cols()); }
  std::span<const T> row(std::size_t r) const { return std::span<const T>(data_).subspan(r * cols(), cols()); }

  T item() const {
    if (data_.size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape_));
    return data_[0];
  }

  bool all_finite() const {
    return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
  }

  void require_finite(const char* what) const {
    if (!all_finite()) throw NumericalError(std::string(what) + ": non-finite value in tensor");
  }

  void fill(T v) { std::fill(data_.begin(), data_.end(), v); }

  template <typename U>
  Tensor<U> cast() const {
    std::vector<U> out(data_.begin(), data_.end());
    return Tensor<U>(shape_, std::move(out));
  }

  /// Rows [begin, end) of a rank-2 tensor.
  Tensor slice_rows(std::size_t begin, std::size_t end) const {
    const std::size_t c = cols();
    return Tensor({end - begin, c}, std::vector<T>(data_.begin() + begin * c, data_.begin() + end * c));
  }

  /// Rows picked by index, in order.
  Tensor gather_rows(std::span<const std::size_t> idx) const {
    const std::size_t c = cols();
    std::vector<T> out(idx.size() * c);
    for (std::size_t i = 0; i < idx.size(); ++i)
      std::copy_n(data_.begin() + idx[i] * c, c, out.begin() + i * c);
    return Tensor({idx.size(), c}, std::move(out));
  }

  friend bool operator==(const Tensor& a, const Tensor& b) { return a.shape_ == b.shape_ && a.data_ == b.data_; }

 private:
  Shape shape_;
  std::vector<T> data_;
};

/// Stacks rank-2 tensors with equal column count.
template <typename T>
Tensor<T> concat_rows(std::span<const Tensor<T>> parts) {
  if (parts.empty()) return Tensor<T>({0, 0});
  const std::size_t c = parts.front().cols();
  std::vector<T> out;
  std::size_t rows = 0;
  for (const auto& p : parts) {
    if (p.cols() != c) throw ShapeError("concat_rows: column mismatch");
    out.insert(out.end(), p.vec().begin(), p.vec().end());
    rows += p.rows();
  }
  return Tensor<T>({rows, c}, std::move(out));
}

}  // namespace nn
}  // namespace dmchan
