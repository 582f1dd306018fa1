#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "pasa/error.hpp"

namespace pasa {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         std::multiplies<>{});
}

inline std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ')';
  return os.str();
}

// Dense row-major array of doubles. Every dimension is positive and
// size() == product(shape) at all times.
class Tensor {
 public:
  Tensor() = default;

  explicit Tensor(Shape shape, double fill = 0.0)
      : shape_(std::move(shape)), data_(checked_size(shape_), fill) {}

  Tensor(Shape shape, std::vector<double> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (checked_size(shape_) != data_.size()) {
      throw ShapeError("tensor: shape " + to_string(shape_) + " holds " +
                       std::to_string(shape_size(shape_)) +
                       " elements but data has " + std::to_string(data_.size()));
    }
  }

  // 1-D tensor from a list of values.
  static Tensor vector(std::vector<double> values) {
    Shape s{values.size()};
    return Tensor(std::move(s), std::move(values));
  }

  static Tensor matrix(std::size_t rows, std::size_t cols,
                       std::vector<double> values) {
    return Tensor(Shape{rows, cols}, std::move(values));
  }

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  const std::vector<double>& values() const noexcept { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }

  // Number of elements per leading-axis slice.
  std::size_t row_size() const {
    return rank() == 0 ? 0 : size() / shape_.front();
  }
  std::span<double> row(std::size_t i) {
    const std::size_t n = row_size();
    return std::span<double>(data_).subspan(i * n, n);
  }
  std::span<const double> row(std::size_t i) const {
    const std::size_t n = row_size();
    return std::span<const double>(data_).subspan(i * n, n);
  }

  Tensor reshaped(Shape shape) const {
    return Tensor(std::move(shape), data_);
  }

  bool all_finite() const noexcept {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v); });
  }

  double min() const { return *std::min_element(data_.begin(), data_.end()); }
  double max() const { return *std::max_element(data_.begin(), data_.end()); }

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  static std::size_t checked_size(const Shape& shape) {
    for (auto d : shape) {
      if (d == 0) throw ShapeError("tensor: zero-length dimension in " + to_string(shape));
    }
    return shape_size(shape);
  }

  Shape shape_;
  std::vector<double> data_;
};

// Prepends a batch axis of n to a per-sample shape.
inline Shape batched(std::size_t n, const Shape& sample) {
  Shape s;
  s.reserve(sample.size() + 1);
  s.push_back(n);
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

// Stacks equally shaped samples into a batch.
inline Tensor stack(std::span<const Tensor> samples) {
  if (samples.empty()) throw ShapeError("stack: no samples");
  const Shape& s = samples.front().shape();
  std::vector<double> data;
  data.reserve(samples.size() * samples.front().size());
  for (const auto& t : samples) {
    if (t.shape() != s) throw ShapeError("stack: mixed sample shapes");
    data.insert(data.end(), t.data().begin(), t.data().end());
  }
  return Tensor(batched(samples.size(), s), std::move(data));
}

// Copies row i of a batch out as a standalone sample.
inline Tensor slice_row(const Tensor& batch, std::size_t i) {
  Shape s(batch.shape().begin() + 1, batch.shape().end());
  if (s.empty()) s.push_back(1);
  auto r = batch.row(i);
  return Tensor(std::move(s), std::vector<double>(r.begin(), r.end()));
}

// Gathers the listed rows of a batch.
inline Tensor gather_rows(const Tensor& batch, std::span<const std::size_t> idx) {
  if (idx.empty()) throw ShapeError("gather_rows: empty index list");
  Shape s = batch.shape();
  s[0] = idx.size();
  const std::size_t n = batch.row_size();
  std::vector<double> data;
  data.reserve(idx.size() * n);
  for (auto i : idx) {
    auto r = batch.row(i);
    data.insert(data.end(), r.begin(), r.end());
  }
  return Tensor(std::move(s), std::move(data));
}

inline double l1_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

inline double l2_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
  return std::sqrt(s);
}

inline double linf_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s = std::max(s, std::abs(a[i] - b[i]));
  return s;
}

}  // namespace pasa
