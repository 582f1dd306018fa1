#pragma once

// PASA: probe each input with Gaussian noise, measure the L1 change in
// logits (PS) and in the IG attribution map (AS), and reject the sample if
// either change leaves an interval calibrated on benign data.
//
// Also the unsupervised baselines TWS (softmax change under the same noise),
// U-LOO (interquartile range of the attribution map) and Feature Squeezing.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <limits>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "pasa/attribution.hpp"
#include "pasa/error.hpp"
#include "pasa/json_enum.hpp"
#include "pasa/graph.hpp"
#include "pasa/models.hpp"
#include "pasa/random.hpp"
#include "pasa/stats.hpp"
#include "pasa/tensor.hpp"

namespace pasa {

struct NoiseProbe {
  double spread = 0.005;
  std::uint64_t seed = 0;
  std::size_t draws = 1;
  std::size_t ig_steps = default_ig_steps;
  bool zero_noise = false;  // force eta = 0 (x' = x)
};

inline void to_json(nlohmann::json& j, const NoiseProbe& p) {
  j = {{"spread", p.spread}, {"seed", p.seed}, {"draws", p.draws}, {"ig_steps", p.ig_steps},
       {"zero_noise", p.zero_noise}};
}

inline void from_json(const nlohmann::json& j, NoiseProbe& p) {
  NoiseProbe d;
  p.spread = j.value("spread", d.spread);
  p.seed = j.value("seed", d.seed);
  p.draws = j.value("draws", d.draws);
  p.ig_steps = j.value("ig_steps", d.ig_steps);
  p.zero_noise = j.value("zero_noise", d.zero_noise);
}

inline void validate(const NoiseProbe& p) {
  if (!(p.spread > 0.0) || !std::isfinite(p.spread)) throw ArgumentError("probe: spread must be positive");
  if (p.draws < 1) throw ArgumentError("probe: draws must be at least 1");
  if (p.ig_steps < 1) throw ArgumentError("probe: ig_steps must be at least 1");
}

struct SensitivityPair {
  double ps = 0.0;
  double as_ = 0.0;
  bool degenerate = false;  // constant input, sigma = 0
};

// Everything the probe yields for one sample; the baselines reuse the same
// noise draw and the clean attribution map.
struct ProbeScores {
  SensitivityPair pair;
  double tws = 0.0;
  double uloo = 0.0;
};

namespace detail {

inline double l1_norm_diff(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += std::abs(a[i] - b[i]);
  return s;
}

inline std::vector<double> softmax_vec(std::span<const double> z) {
  std::vector<double> p(z.size());
  softmax_row(z, p);
  return p;
}

inline Tensor ig_zero(const Graph& g, const Tensor& x, std::size_t target, std::size_t m) {
  return ig_numeric(g, x, Tensor(x.shape(), 0.0), target, m).scores;
}

}  // namespace detail

namespace detail {

struct CleanReference {
  Tensor z;
  std::size_t target = 0;
  Tensor ig;
  std::vector<double> p;
};

inline CleanReference clean_reference(const Graph& g, const Tensor& x, std::size_t ig_steps) {
  if (x.shape() != g.input_shape()) {
    throw ShapeError("probe: input " + to_string(x.shape()) + " does not match model input " +
                     to_string(g.input_shape()));
  }
  CleanReference r;
  r.z = forward(g, x);
  r.target = argmax(r.z.values());
  r.ig = ig_zero(g, x, r.target, ig_steps);
  r.p = softmax_vec(r.z.values());
  return r;
}

// Adds one draw's PS, AS and TWS for the noisy input xn.
inline void accumulate_draw(const Graph& g, const CleanReference& ref, const Tensor& xn, std::size_t ig_steps,
                            ProbeScores& out) {
  const Tensor zn = forward(g, xn);
  const Tensor ign = ig_zero(g, xn, ref.target, ig_steps);
  out.pair.ps += l1_norm_diff(zn.values(), ref.z.values());
  out.pair.as_ += l1_norm_diff(ign.values(), ref.ig.values());
  out.tws += l1_norm_diff(softmax_vec(zn.values()), ref.p);
}

inline double attribution_iqr(const Tensor& ig) { return iqr(std::vector<double>(ig.values().begin(), ig.values().end())); }

}  // namespace detail

// Probes one sample with an explicit noise tensor (x' = x + eta, unclipped).
inline ProbeScores probe_with_noise(const Graph& g, const Tensor& x, const Tensor& eta,
                                    std::size_t ig_steps = default_ig_steps) {
  if (eta.shape() != x.shape()) throw ShapeError("probe: noise shape differs from input shape");
  const auto ref = detail::clean_reference(g, x, ig_steps);
  ProbeScores out;
  out.uloo = detail::attribution_iqr(ref.ig);
  Tensor xn = x;
  for (std::size_t i = 0; i < xn.size(); ++i) xn[i] += eta[i];
  detail::accumulate_draw(g, ref, xn, ig_steps, out);
  return out;
}

// Probes one sample. `index` selects the per-sample noise stream.
inline ProbeScores probe_sample(const Graph& g, const Tensor& x, const NoiseProbe& probe,
                                std::uint64_t index = 0) {
  validate(probe);
  const auto ref = detail::clean_reference(g, x, probe.ig_steps);
  ProbeScores out;
  out.uloo = detail::attribution_iqr(ref.ig);
  const double sigma = (x.max() - x.min()) * probe.spread;
  if (sigma == 0.0) {
    out.pair.degenerate = true;
    return out;
  }
  Rng rng(derive_seed(probe.seed, index));
  std::normal_distribution<double> noise(0.0, sigma);
  for (std::size_t draw = 0; draw < probe.draws; ++draw) {
    Tensor xn = x;
    if (!probe.zero_noise) {
      for (auto& v : xn.data()) v += noise(rng);
    }
    detail::accumulate_draw(g, ref, xn, probe.ig_steps, out);
  }
  const double k = static_cast<double>(probe.draws);
  out.pair.ps /= k;
  out.pair.as_ /= k;
  out.tws /= k;
  return out;
}

inline SensitivityPair sensitivity(const Graph& g, const Tensor& x, const NoiseProbe& probe,
                                   std::uint64_t index = 0) {
  return probe_sample(g, x, probe, index).pair;
}

// Probes every row of a batch; row i uses noise stream first_index + i.
inline std::vector<ProbeScores> probe_batch(const Graph& g, const Tensor& batch, const NoiseProbe& probe,
                                            std::uint64_t first_index = 0) {
  const auto [n, single] = g.batch_of(batch);
  if (single) return {probe_sample(g, batch, probe, first_index)};
  std::vector<ProbeScores> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(probe_sample(g, slice_row(batch, i), probe, first_index + i));
  return out;
}

inline std::vector<SensitivityPair> sensitivities(const Graph& g, const Tensor& batch, const NoiseProbe& probe,
                                                  std::uint64_t first_index = 0) {
  std::vector<SensitivityPair> out;
  for (const auto& s : probe_batch(g, batch, probe, first_index)) out.push_back(s.pair);
  return out;
}

// ---------------------------------------------------------------- thresholds

enum class Side { above, below, two_sided };

PASA_JSON_ENUM(Side, {{Side::above, "above"}, {Side::below, "below"}, {Side::two_sided, "two_sided"}})

// Acceptance interval for one metric; scores outside are rejected.
struct MetricInterval {
  double lower = -std::numeric_limits<double>::infinity();
  double upper = std::numeric_limits<double>::infinity();
  Side side = Side::above;

  bool accepts(double s) const noexcept { return s >= lower && s <= upper; }
  double midpoint() const {
    const double lo = std::isfinite(lower) ? lower : (std::isfinite(upper) ? std::min(0.0, upper) : 0.0);
    const double hi = std::isfinite(upper) ? upper : lo + 1.0;
    return 0.5 * (lo + hi);
  }
};

namespace detail {

inline void check_resolution(std::size_t n, double fpr) {
  if (!(fpr > 0.0 && fpr < 1.0)) throw ArgumentError("fpr target must lie in (0,1)");
  if (n == 0) throw InsufficientSamplesError("no benign scores for threshold");
  if (static_cast<double>(n) * fpr < 1.0 - rank_slack) {
    throw InsufficientSamplesError("resolution insufficient: " + std::to_string(n) + " samples cannot resolve FPR " +
                                   std::to_string(fpr) + " (need n * fpr >= 1)");
  }
}

// Largest value such that the fraction of scores strictly above it is at
// most fpr, under nearest rank: the element at rank ceil((1-fpr) n).
inline double upper_threshold(std::span<const double> sorted, double fpr) {
  return quantile_sorted(sorted, 1.0 - fpr);
}

// Mirror of upper_threshold: the element at 0-based position floor(fpr n),
// so exactly floor(fpr n) distinct-valued scores lie strictly below it.
inline double lower_threshold(std::span<const double> sorted, double fpr) {
  const auto pos = static_cast<std::size_t>(std::floor(fpr * static_cast<double>(sorted.size()) + rank_slack));
  return sorted[std::min(pos, sorted.size() - 1)];
}

}  // namespace detail

// Nearest-rank acceptance interval for benign `scores` at the given FPR.
inline MetricInterval fit_interval(std::vector<double> scores, double fpr, Side side) {
  detail::check_resolution(scores.size(), side == Side::two_sided ? fpr / 2 : fpr);
  std::sort(scores.begin(), scores.end());
  if (scores.front() == scores.back()) {
    throw InsufficientSamplesError("degenerate score distribution: every benign score equals " +
                                   std::to_string(scores.front()));
  }
  MetricInterval m;
  m.side = side;
  switch (side) {
    case Side::above: m.upper = detail::upper_threshold(scores, fpr); break;
    case Side::below: m.lower = detail::lower_threshold(scores, fpr); break;
    case Side::two_sided:
      m.lower = detail::lower_threshold(scores, fpr / 2);
      m.upper = detail::upper_threshold(scores, fpr / 2);
      break;
  }
  return m;
}

inline double rejection_rate(std::span<const double> scores, const MetricInterval& m) {
  if (scores.empty()) return 0.0;
  std::size_t r = 0;
  for (double s : scores) r += !m.accepts(s);
  return static_cast<double>(r) / static_cast<double>(scores.size());
}

// ---------------------------------------------------------------- calibration

// Piecewise-linear empirical CDF through 101 benign quantiles, extended
// linearly past both ends so that scores beyond the benign range keep
// their order.
struct QuantileSketch {
  std::vector<double> points;

  static QuantileSketch fit(std::vector<double> scores) {
    if (scores.empty()) throw InsufficientSamplesError("sketch: no scores");
    std::sort(scores.begin(), scores.end());
    QuantileSketch s;
    for (int i = 0; i <= 100; ++i) s.points.push_back(quantile_sorted(scores, i / 100.0));
    return s;
  }

  double cdf(double v) const {
    const auto& p = points;
    const double n = static_cast<double>(p.size() - 1);
    const double range = std::max(p.back() - p.front(), 1e-300);
    if (v < p.front()) return -(p.front() - v) / range;
    if (v >= p.back()) return 1.0 + (v - p.back()) / range;
    const auto hi = static_cast<std::size_t>(std::upper_bound(p.begin(), p.end(), v) - p.begin());
    const std::size_t lo = hi - 1;
    const double t = p[hi] > p[lo] ? (v - p[lo]) / (p[hi] - p[lo]) : 0.0;
    return (static_cast<double>(lo) + t) / n;
  }

  // Orientation so that larger means more anomalous.
  double tail(double v, Side side) const {
    const double c = cdf(v);
    switch (side) {
      case Side::above: return c;
      case Side::below: return 1.0 - c;
      case Side::two_sided: return std::abs(c - 0.5) + 0.5;
    }
    return c;
  }
};

struct DetectorCalibration {
  NoiseProbe probe;
  double fpr_target = 0.05;
  MetricInterval ps;
  MetricInterval as_;
  std::string rule = "or-reject";
  QuantileSketch ps_sketch;
  QuantileSketch as_sketch;
  std::string fingerprint;
  std::size_t n_calibrate = 0;
  std::size_t n_holdout = 0;
  double holdout_fpr_ps = 0.0;
  double holdout_fpr_as = 0.0;
  double holdout_fpr_combined = 0.0;

  bool rejects(const SensitivityPair& p) const { return !ps.accepts(p.ps) || !as_.accepts(p.as_); }

  // Threshold-free score for ranking (AUC): the larger of the two metrics'
  // oriented benign-CDF positions.
  double combined_score(const SensitivityPair& p) const {
    return std::max(ps_sketch.tail(p.ps, ps.side), as_sketch.tail(p.as_, as_.side));
  }
};

namespace detail {

inline nlohmann::json bound_json(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

inline double bound_from(const nlohmann::json& j, double inf) { return j.is_null() ? inf : j.get<double>(); }

inline nlohmann::json interval_json(const MetricInterval& m) {
  return {{"lower", bound_json(m.lower)}, {"upper", bound_json(m.upper)}, {"side", m.side}};
}

inline MetricInterval interval_from(const nlohmann::json& j) {
  MetricInterval m;
  const double inf = std::numeric_limits<double>::infinity();
  m.lower = bound_from(j.at("lower"), -inf);
  m.upper = bound_from(j.at("upper"), inf);
  m.side = j.at("side").get<Side>();
  if (m.lower > m.upper) throw FormatError("calibration: lower bound exceeds upper bound");
  return m;
}

}  // namespace detail

inline void to_json(nlohmann::json& j, const DetectorCalibration& c) {
  j = {{"probe", c.probe},
       {"spread", c.probe.spread},
       {"seed", c.probe.seed},
       {"fpr_target", c.fpr_target},
       {"rule", c.rule},
       {"metrics",
        {{"ps", detail::interval_json(c.ps)}, {"as", detail::interval_json(c.as_)}}},
       {"sketch", {{"ps", c.ps_sketch.points}, {"as", c.as_sketch.points}}},
       {"fingerprint", c.fingerprint},
       {"n_calibrate", c.n_calibrate},
       {"n_holdout", c.n_holdout},
       {"holdout_fpr", {{"ps", c.holdout_fpr_ps}, {"as", c.holdout_fpr_as}, {"combined", c.holdout_fpr_combined}}}};
}

inline void from_json(const nlohmann::json& j, DetectorCalibration& c) {
  try {
    c.probe = j.at("probe").get<NoiseProbe>();
    c.fpr_target = j.at("fpr_target").get<double>();
    c.rule = j.value("rule", "or-reject");
    if (c.rule != "or-reject") throw FormatError("calibration: unsupported rule '" + c.rule + "'");
    c.ps = detail::interval_from(j.at("metrics").at("ps"));
    c.as_ = detail::interval_from(j.at("metrics").at("as"));
    c.ps_sketch.points = j.at("sketch").at("ps").get<std::vector<double>>();
    c.as_sketch.points = j.at("sketch").at("as").get<std::vector<double>>();
    if (c.ps_sketch.points.size() < 2 || c.as_sketch.points.size() < 2) throw FormatError("calibration: sketch too short");
    c.fingerprint = j.value("fingerprint", "");
    c.n_calibrate = j.value("n_calibrate", std::size_t{0});
    c.n_holdout = j.value("n_holdout", std::size_t{0});
    if (j.contains("holdout_fpr")) {
      c.holdout_fpr_ps = j["holdout_fpr"].value("ps", 0.0);
      c.holdout_fpr_as = j["holdout_fpr"].value("as", 0.0);
      c.holdout_fpr_combined = j["holdout_fpr"].value("combined", 0.0);
    }
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("calibration: ") + e.what());
  }  catch (const ArgumentError& e) {
    throw FormatError(std::string("calibration: ") + e.what());
  }
}

inline constexpr std::size_t min_calibration_samples = 500;

struct ValidationScores {
  std::vector<SensitivityPair> benign;
  std::vector<SensitivityPair> adversarial;
};

struct CalibrationOptions {
  std::optional<Side> ps_side;  // forced side; otherwise validation or "above"
  std::optional<Side> as_side;
  std::size_t min_samples = min_calibration_samples;
};

namespace detail {

inline std::vector<double> column(std::span<const SensitivityPair> v, bool ps) {
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& p : v) out.push_back(ps ? p.ps : p.as_);
  return out;
}

inline Side pick_side(const ValidationScores* val, bool ps) {
  if (!val) return Side::above;
  const double a = rank_auc(column(val->benign, ps), column(val->adversarial, ps));
  return a >= 0.5 ? Side::above : Side::below;
}

}  // namespace detail

// Calibrates from precomputed benign scores. Thresholds are nearest-rank
// quantiles of the hold-out scores, so the hold-out FPR of each metric
// equals the target whenever scores are distinct. The calibration scores
// supply the CDF sketch used for ranking.
inline DetectorCalibration calibrate_scores(std::span<const SensitivityPair> calibration,
                                            std::span<const SensitivityPair> holdout, const NoiseProbe& probe,
                                            double fpr_target, const ValidationScores* validation = nullptr,
                                            const CalibrationOptions& opts = {}) {
  if (calibration.size() < opts.min_samples) {
    throw InsufficientSamplesError("calibrate: " + std::to_string(calibration.size()) +
                                   " benign calibration samples, need at least " + std::to_string(opts.min_samples));
  }
  DetectorCalibration c;
  c.probe = probe;
  c.fpr_target = fpr_target;
  const Side ps_side = opts.ps_side ? *opts.ps_side : detail::pick_side(validation, true);
  const Side as_side = opts.as_side ? *opts.as_side : detail::pick_side(validation, false);
  const auto hold_ps = detail::column(holdout, true), hold_as = detail::column(holdout, false);
  c.ps = fit_interval(hold_ps, fpr_target, ps_side);
  c.as_ = fit_interval(hold_as, fpr_target, as_side);
  c.ps_sketch = QuantileSketch::fit(detail::column(calibration, true));
  c.as_sketch = QuantileSketch::fit(detail::column(calibration, false));
  c.n_calibrate = calibration.size();
  c.n_holdout = holdout.size();
  c.holdout_fpr_ps = rejection_rate(hold_ps, c.ps);
  c.holdout_fpr_as = rejection_rate(hold_as, c.as_);
  std::size_t r = 0;
  for (const auto& p : holdout) r += c.rejects(p);
  c.holdout_fpr_combined = static_cast<double>(r) / static_cast<double>(holdout.size());
  return c;
}

// Hex FNV-1a digest of a tensor's bytes.
inline std::string fingerprint(const Tensor& t) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (double v : t.data()) {
    unsigned char b[sizeof(double)];
    std::memcpy(b, &v, sizeof b);
    for (unsigned char c : b) {
      h ^= c;
      h *= 0x100000001b3ULL;
    }
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// Index offsets that keep noise streams of the different pools apart.
inline constexpr std::uint64_t holdout_stream = 1ULL << 40;
inline constexpr std::uint64_t validation_stream = 2ULL << 40;

inline DetectorCalibration calibrate(const Graph& g, const Tensor& benign_train, const Tensor& benign_holdout,
                                     const NoiseProbe& probe, double fpr_target,
                                     const ValidationScores* validation = nullptr,
                                     const CalibrationOptions& opts = {}) {
  const auto cal = sensitivities(g, benign_train, probe, 0);
  const auto hold = sensitivities(g, benign_holdout, probe, holdout_stream);
  auto c = calibrate_scores(cal, hold, probe, fpr_target, validation, opts);
  c.fingerprint = fingerprint(benign_train) + ":" + fingerprint(benign_holdout);
  return c;
}

struct Verdict {
  bool adversarial = false;
  SensitivityPair pair;
};

inline Verdict detect(const Graph& g, const Tensor& x, const DetectorCalibration& c, std::uint64_t index = 0) {
  Verdict v;
  v.pair = sensitivity(g, x, c.probe, index);
  v.adversarial = c.rejects(v.pair);
  return v;
}

// ---------------------------------------------------------------- sweep

struct SweepRow {
  double spread = 0.0;
  double auc_ps = 0.0;
  double auc_as = 0.0;
  double auc_combined = 0.0;
};

struct SweepResult {
  double best_spread = 0.0;
  std::vector<SweepRow> curve;
};

inline std::vector<double> spread_grid(double start, double delta, std::size_t count) {
  std::vector<double> g;
  for (std::size_t i = 0; i < count; ++i) g.push_back(start + delta * static_cast<double>(i));
  return g;
}

// Combined-score AUC for validation pairs, with sides picked by the
// validation set itself and the benign validation scores as the sketch.
inline SweepRow score_spread(double spread, const ValidationScores& v) {
  SweepRow row;
  row.spread = spread;
  const auto bps = detail::column(v.benign, true), bas = detail::column(v.benign, false);
  const auto aps = detail::column(v.adversarial, true), aas = detail::column(v.adversarial, false);
  row.auc_ps = rank_auc(bps, aps);
  row.auc_as = rank_auc(bas, aas);
  const Side sps = row.auc_ps >= 0.5 ? Side::above : Side::below;
  const Side sas = row.auc_as >= 0.5 ? Side::above : Side::below;
  const auto kps = QuantileSketch::fit(bps), kas = QuantileSketch::fit(bas);
  auto comb = [&](const std::vector<double>& p, const std::vector<double>& a) {
    std::vector<double> out(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = std::max(kps.tail(p[i], sps), kas.tail(a[i], sas));
    return out;
  };
  row.auc_combined = rank_auc(comb(bps, bas), comb(aps, aas));
  return row;
}

inline SweepResult sweep_spread(const Graph& g, const Tensor& benign, const Tensor& adversarial,
                                std::span<const double> grid, NoiseProbe base = {}) {
  if (grid.empty()) throw ArgumentError("sweep: spread grid is empty");
  SweepResult r;
  double best = -1.0;
  for (double s : grid) {
    base.spread = s;
    ValidationScores v{sensitivities(g, benign, base, validation_stream),
                       sensitivities(g, adversarial, base, validation_stream)};
    r.curve.push_back(score_spread(s, v));
    if (r.curve.back().auc_combined > best) {
      best = r.curve.back().auc_combined;
      r.best_spread = s;
    }
  }
  return r;
}

// ---------------------------------------------------------------- baselines

// ||softmax(Z(x + eta)) - softmax(Z(x))||_1 with the probe's noise.
inline double tws_score(const Graph& g, const Tensor& x, const NoiseProbe& probe, std::uint64_t index = 0) {
  return probe_sample(g, x, probe, index).tws;
}

// Interquartile range of the zero-baseline IG map for the predicted class.
inline double uloo_score(const Graph& g, const Tensor& x, std::size_t ig_steps = default_ig_steps) {
  return detail::attribution_iqr(detail::clean_reference(g, x, ig_steps).ig);
}

struct Squeezers {
  int bit_depth = 1;       // 0 disables
  std::size_t median = 2;  // 0 or 1 disables
};

inline void to_json(nlohmann::json& j, const Squeezers& s) { j = {{"bit_depth", s.bit_depth}, {"median", s.median}}; }

inline void from_json(const nlohmann::json& j, Squeezers& s) {
  s.bit_depth = j.value("bit_depth", 1);
  s.median = j.value("median", std::size_t{2});
}

// Rounds each value to one of 2^bits evenly spaced levels in [0,1].
inline Tensor squeeze_bit_depth(const Tensor& x, int bits) {
  if (bits < 1 || bits > 30) throw ArgumentError("bit depth must lie in [1,30]");
  const double levels = std::ldexp(1.0, bits) - 1.0;
  Tensor out = x;
  for (auto& v : out.data()) v = std::round(v * levels) / levels;
  return out;
}

// k x k median per channel with edge replication. The window covers
// offsets -k/2 .. k-1-k/2; for even k the upper of the two middle values
// is taken.
inline Tensor squeeze_median(const Tensor& x, std::size_t k) {
  if (x.rank() < 2 || x.rank() > 3) throw ArgumentError("median filter: input must be an image (H,W) or (C,H,W)");
  if (k == 0) throw ArgumentError("median filter: window must be positive");
  const std::size_t c = x.rank() == 3 ? x.dim(0) : 1;
  const std::size_t h = x.dim(x.rank() - 2), w = x.dim(x.rank() - 1);
  const auto lo = static_cast<std::ptrdiff_t>(k / 2);
  Tensor out(x.shape());
  std::vector<double> win(k * k);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const double* src = x.data().data() + ch * h * w;
    double* dst = out.data().data() + ch * h * w;
    for (std::size_t i = 0; i < h; ++i) {
      for (std::size_t j = 0; j < w; ++j) {
        std::size_t n = 0;
        for (std::size_t a = 0; a < k; ++a) {
          for (std::size_t b = 0; b < k; ++b) {
            const auto ii = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(i + a) - lo, 0,
                                                       static_cast<std::ptrdiff_t>(h) - 1);
            const auto jj = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(j + b) - lo, 0,
                                                       static_cast<std::ptrdiff_t>(w) - 1);
            win[n++] = src[ii * static_cast<std::ptrdiff_t>(w) + jj];
          }
        }
        std::nth_element(win.begin(), win.begin() + static_cast<std::ptrdiff_t>(n / 2), win.end());
        dst[i * w + j] = win[n / 2];
      }
    }
  }
  return out;
}

// max over squeezers of ||softmax(Z(squeeze(x))) - softmax(Z(x))||_1.
inline double fs_score(const Graph& g, const Tensor& x, const Squeezers& sq = {}) {
  if (x.rank() < 2 || x.rank() > 3) throw ArgumentError("feature squeezing needs image-shaped input (H,W) or (C,H,W)");
  const auto p = detail::softmax_vec(forward(g, x).values());
  double best = 0.0;
  auto consider = [&](const Tensor& xs) {
    best = std::max(best, detail::l1_norm_diff(detail::softmax_vec(forward(g, xs).values()), p));
  };
  if (sq.bit_depth > 0) consider(squeeze_bit_depth(x, sq.bit_depth));
  if (sq.median > 1) consider(squeeze_median(x, sq.median));
  return best;
}

}  // namespace pasa
