#pragma once

// Order statistics shared by the detectors and the evaluation code.
//
// Quantiles follow the nearest-rank rule: the q-quantile of n sorted values
// is the element at 1-based rank ceil(q*n) (rank 1 for q = 0).

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <vector>

#include "pasa/error.hpp"

namespace pasa {

namespace detail {
// Absorbs representation error in q*n (0.95*100 must give rank 95).
inline constexpr double rank_slack = 1e-9;
}

inline std::size_t nearest_rank(double q, std::size_t n) {
  if (n == 0) throw InsufficientSamplesError("quantile: no samples");
  if (!(q >= 0.0 && q <= 1.0)) throw ArgumentError("quantile: q must lie in [0,1]");
  const double r = std::ceil(q * static_cast<double>(n) - detail::rank_slack);
  return std::clamp<std::size_t>(static_cast<std::size_t>(std::max(r, 1.0)), 1, n);
}

inline double quantile_sorted(std::span<const double> sorted, double q) {
  return sorted[nearest_rank(q, sorted.size()) - 1];
}

inline double quantile(std::vector<double> values, double q) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, q);
}

// Interquartile range under the nearest-rank rule.
inline double iqr(std::vector<double> values) {
  std::sort(values.begin(), values.end());
  return quantile_sorted(values, 0.75) - quantile_sorted(values, 0.25);
}

inline double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

// Sample standard deviation; zero for fewer than two values.
inline double stddev(std::span<const double> v) {
  if (v.size() < 2) return 0.0;
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

// Fractional ranks (1-based, ties share their average rank).
inline std::vector<double> average_ranks(std::span<const double> v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && v[order[j]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) ranks[order[t]] = r;
    i = j;
  }
  return ranks;
}

inline double pearson(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size() || a.size() < 2) throw ArgumentError("pearson: need two equal-length series");
  const double ma = mean(a), mb = mean(b);
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (a[i] - ma) * (b[i] - mb);
    saa += (a[i] - ma) * (a[i] - ma);
    sbb += (b[i] - mb) * (b[i] - mb);
  }
  if (saa == 0 || sbb == 0) return 0.0;
  return sab / std::sqrt(saa * sbb);
}

inline double spearman(std::span<const double> a, std::span<const double> b) {
  auto ra = average_ranks(a);
  auto rb = average_ranks(b);
  return pearson(ra, rb);
}

// Mann-Whitney AUC of adversarial over benign, ties counted half.
inline double rank_auc(std::span<const double> benign, std::span<const double> adversarial) {
  if (benign.empty() || adversarial.empty()) throw InsufficientSamplesError("auc: empty score set");
  std::vector<double> all(benign.begin(), benign.end());
  all.insert(all.end(), adversarial.begin(), adversarial.end());
  const auto ranks = average_ranks(all);
  double r = 0.0;
  for (std::size_t i = benign.size(); i < all.size(); ++i) r += ranks[i];
  const double na = static_cast<double>(adversarial.size()), nb = static_cast<double>(benign.size());
  return (r - na * (na + 1) / 2) / (na * nb);
}

}  // namespace pasa
