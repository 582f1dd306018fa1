#pragma once

// Integrated Gradients: midpoint-rule path integral, the exact closed form
// for single-layer models F(x) = H(<w,x>), completeness checking and a
// leave-one-out alternative.

#include <cmath>
#include <functional>
#include <ostream>
#include <string>
#include <vector>

#include "pasa/error.hpp"
#include "pasa/graph.hpp"
#include "pasa/tensor.hpp"

namespace pasa {

inline constexpr std::size_t default_ig_steps = 64;

struct AttributionMap {
  Tensor scores;  // shaped like the input
  std::size_t target = 0;
  std::string baseline_id;
  std::size_t steps = 0;

  double total() const {
    double s = 0.0;
    for (double v : scores.data()) s += v;
    return s;
  }
};

namespace detail {

inline std::string baseline_tag(const Tensor& u) {
  for (double v : u.data()) {
    if (v != 0.0) return "custom";
  }
  return "zeros";
}

inline constexpr std::size_t ig_chunk = 128;

}  // namespace detail

// Mean of dZ_target/dx over the midpoints u + ((j-0.5)/m)(x-u), j = 1..m.
inline Tensor path_gradient_mean(const Graph& g, const Tensor& x, const Tensor& u,
                                 std::size_t target, std::size_t m) {
  const std::size_t d = x.size();
  Tensor mean_grad(x.shape(), 0.0);
  for (std::size_t start = 0; start < m; start += detail::ig_chunk) {
    const std::size_t len = std::min(detail::ig_chunk, m - start);
    Tensor path(batched(len, g.input_shape()));
    for (std::size_t j = 0; j < len; ++j) {
      const double alpha = (static_cast<double>(start + j) + 0.5) / static_cast<double>(m);
      auto row = path.row(j);
      for (std::size_t i = 0; i < d; ++i) row[i] = u[i] + alpha * (x[i] - u[i]);
    }
    Tensor grads = input_gradient(g, path, target);
    for (std::size_t j = 0; j < len; ++j) {
      auto row = grads.row(j);
      for (std::size_t i = 0; i < d; ++i) mean_grad[i] += row[i];
    }
  }
  for (auto& v : mean_grad.data()) v /= static_cast<double>(m);
  return mean_grad;
}

// IG_i = (x_i - u_i) * (1/m) sum_j dZ_target/dx_i at the j-th path midpoint.
inline AttributionMap ig_numeric(const Graph& g, const Tensor& x, const Tensor& u,
                                 std::size_t target, std::size_t m = default_ig_steps) {
  if (x.shape() != u.shape()) {
    throw ShapeError("ig_numeric: input " + to_string(x.shape()) + " and baseline " +
                     to_string(u.shape()) + " differ");
  }
  if (x.shape() != g.input_shape()) {
    throw ShapeError("ig_numeric: input " + to_string(x.shape()) + " does not match model input " +
                     to_string(g.input_shape()));
  }
  if (m < 1) throw ArgumentError("ig_numeric: step count must be at least 1");
  if (target >= g.output_size()) throw ArgumentError("ig_numeric: target out of range");
  Tensor scores = path_gradient_mean(g, x, u, target, m);
  for (std::size_t i = 0; i < scores.size(); ++i) scores[i] *= x[i] - u[i];
  return AttributionMap{std::move(scores), target, detail::baseline_tag(u), m};
}

// Zero-baseline convenience overload.
inline AttributionMap ig_numeric(const Graph& g, const Tensor& x, std::size_t target,
                                 std::size_t m = default_ig_steps) {
  return ig_numeric(g, x, Tensor(x.shape(), 0.0), target, m);
}

// Exact IG for F(x) = H(<w,x>):
//   IG = [F(x) - F(u)] * ((x-u) ⊙ w) / <x-u, w>
inline AttributionMap ig_closed_form(const Tensor& w, const std::function<double(double)>& h,
                                     const Tensor& x, const Tensor& u) {
  if (w.size() != x.size() || x.shape() != u.shape()) {
    throw ShapeError("ig_closed_form: w, x and u must have the same number of features");
  }
  double dot = 0.0, fx = 0.0, fu = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot += (x[i] - u[i]) * w[i];
    fx += w[i] * x[i];
    fu += w[i] * u[i];
  }
  if (std::abs(dot) < 1e-12) {
    throw SingularityError("ig_closed_form: <x-u, w> = " + std::to_string(dot) + " is singular");
  }
  const double scale = (h(fx) - h(fu)) / dot;
  Tensor scores(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) scores[i] = scale * (x[i] - u[i]) * w[i];
  return AttributionMap{std::move(scores), 0, detail::baseline_tag(u), 0};
}

// |sum_i scores_i - (Z_t(x) - Z_t(u))|
inline double completeness_gap(const Graph& g, const AttributionMap& map, const Tensor& x,
                               const Tensor& u) {
  const Tensor zx = forward(g, x), zu = forward(g, u);
  return std::abs(map.total() - (zx[map.target] - zu[map.target]));
}

// scores_i = Z_t(x) - Z_t(x with feature i set to 0).
inline AttributionMap leave_one_out(const Graph& g, const Tensor& x, std::size_t target) {
  if (target >= g.output_size()) throw ArgumentError("leave_one_out: target out of range");
  const double base = forward(g, x)[target];
  const std::size_t d = x.size(), k = g.output_size();
  Tensor scores(x.shape(), 0.0);
  for (std::size_t start = 0; start < d; start += detail::ig_chunk) {
    const std::size_t len = std::min(detail::ig_chunk, d - start);
    Tensor batch(batched(len, g.input_shape()));
    for (std::size_t j = 0; j < len; ++j) {
      auto row = batch.row(j);
      std::copy(x.data().begin(), x.data().end(), row.begin());
      row[start + j] = 0.0;
    }
    Tensor z = g.evaluate(batch).output();
    for (std::size_t j = 0; j < len; ++j) scores[start + j] = base - z[j * k + target];
  }
  return AttributionMap{std::move(scores), target, "zeros", 0};
}

// feature,score rows with round-trip precision.
inline void write_csv(std::ostream& os, const AttributionMap& map) {
  const auto old = os.precision(17);
  os << "feature,score\n";
  for (std::size_t i = 0; i < map.scores.size(); ++i) os << i << ',' << map.scores[i] << '\n';
  os.precision(old);
}

}  // namespace pasa
