#pragma once

// Untargeted L-infinity evasion attacks: FGSM, BIM, PGD, zero-confidence
// Carlini-Wagner, and three adaptive attacks that also try to match the
// benign sample's attribution map and/or logits.
//
// All attacks work row-wise on a batch; rows never interact, so a sample's
// result does not depend on what else is in the batch. Every returned
// sample lies inside the epsilon ball around its original and inside the
// clip range.

#include <chrono>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "json.hpp"
#include "pasa/attribution.hpp"
#include "pasa/error.hpp"
#include "pasa/json_enum.hpp"
#include "pasa/graph.hpp"
#include "pasa/models.hpp"
#include "pasa/random.hpp"
#include "pasa/tensor.hpp"

namespace pasa {

enum class AttackKind { fgsm, bim, pgd, cw, adaptive_ig, adaptive_logit, adaptive_combined };

PASA_JSON_ENUM(AttackKind, {{AttackKind::fgsm, "fgsm"},
                                          {AttackKind::bim, "bim"},
                                          {AttackKind::pgd, "pgd"},
                                          {AttackKind::cw, "cw"},
                                          {AttackKind::adaptive_ig, "adaptive_ig"},
                                          {AttackKind::adaptive_logit, "adaptive_logit"},
                                          {AttackKind::adaptive_combined, "adaptive_combined"}})

inline const std::vector<std::string>& attack_kind_names() {
  static const std::vector<std::string> names{"fgsm", "bim", "pgd", "cw",
                                              "adaptive_ig", "adaptive_logit", "adaptive_combined"};
  return names;
}

inline AttackKind parse_attack_kind(const std::string& name) {
  const nlohmann::json j = name;
  const auto kind = j.get<AttackKind>();
  // nlohmann maps unknown strings to the first enumerator.
  if (name != attack_kind_names()[static_cast<std::size_t>(kind)]) {
    std::string valid;
    for (const auto& n : attack_kind_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw ArgumentError("unknown attack '" + name + "' (valid: " + valid + ")");
  }
  return kind;
}

inline const char* to_string(AttackKind k) {
  return attack_kind_names()[static_cast<std::size_t>(k)].c_str();
}

struct AttackConfig {
  AttackKind kind = AttackKind::fgsm;
  double epsilon = 8.0 / 255.0;
  double alpha = 0.0;      // 0 -> epsilon / 10
  std::size_t steps = 0;   // 0 -> kind default (bim 10, pgd 40, adaptive 100)
  std::uint64_t seed = 0;
  double cw_lr = 0.01;
  std::size_t cw_iters = 400;
  double c = 10.0;                    // attribution-matching weight
  std::size_t warm_start_steps = 20;  // PGD steps before adaptive descent
  std::size_t ig_steps = 16;          // IG resolution inside adaptive losses
  double clip_min = 0.0;
  double clip_max = 1.0;
  bool zero_init = false;  // PGD: start at x instead of a random point

  double step_size() const { return alpha > 0 ? alpha : epsilon / 10.0; }

  std::size_t step_count() const {
    if (steps) return steps;
    switch (kind) {
      case AttackKind::bim: return 10;
      case AttackKind::pgd: return 40;
      case AttackKind::adaptive_ig:
      case AttackKind::adaptive_logit:
      case AttackKind::adaptive_combined: return 100;
      default: return 1;
    }
  }
};

inline void to_json(nlohmann::json& j, const AttackConfig& c) {
  j = {{"kind", c.kind}, {"epsilon", c.epsilon}, {"alpha", c.step_size()},
       {"steps", c.step_count()}, {"seed", c.seed}, {"cw_lr", c.cw_lr},
       {"cw_iters", c.cw_iters}, {"c", c.c}, {"warm_start_steps", c.warm_start_steps},
       {"ig_steps", c.ig_steps}, {"clip_min", c.clip_min}, {"clip_max", c.clip_max},
       {"zero_init", c.zero_init}};
}

inline void from_json(const nlohmann::json& j, AttackConfig& c) {
  AttackConfig d;
  if (j.contains("kind")) {
    c.kind = parse_attack_kind(j.at("kind").get<std::string>());
  }
  c.epsilon = j.value("epsilon", d.epsilon);
  c.alpha = j.value("alpha", d.alpha);
  c.steps = j.value("steps", d.steps);
  c.seed = j.value("seed", d.seed);
  c.cw_lr = j.value("cw_lr", d.cw_lr);
  c.cw_iters = j.value("cw_iters", d.cw_iters);
  c.c = j.value("c", d.c);
  c.warm_start_steps = j.value("warm_start_steps", d.warm_start_steps);
  c.ig_steps = j.value("ig_steps", d.ig_steps);
  c.clip_min = j.value("clip_min", d.clip_min);
  c.clip_max = j.value("clip_max", d.clip_max);
  c.zero_init = j.value("zero_init", d.zero_init);
}

struct AdversarialBatch {
  Tensor originals;
  Tensor perturbed;
  std::vector<std::size_t> original_labels;  // true labels supplied by the caller
  std::vector<std::size_t> adversarial_labels;
  std::vector<std::uint8_t> success_mask;
  double mean_l2 = 0.0;  // over successful samples
  AttackConfig config;
  double wall_seconds = 0.0;  // not persisted

  std::size_t size() const noexcept { return original_labels.size(); }

  std::size_t success_count() const {
    std::size_t n = 0;
    for (auto s : success_mask) n += s;
    return n;
  }

  double success_rate() const {
    return size() ? static_cast<double>(success_count()) / static_cast<double>(size()) : 0.0;
  }

  std::vector<std::size_t> successful_indices() const {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < size(); ++i) {
      if (success_mask[i]) idx.push_back(i);
    }
    return idx;
  }
};

namespace detail {

inline double sign(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

inline void check_attack_inputs(const Graph& g, const Tensor& x, std::span<const std::size_t> y,
                                const AttackConfig& cfg) {
  const auto [n, single] = g.batch_of(x);
  if (single) throw ShapeError("attack: expected a batch (N, ...)");
  if (y.size() != n) throw ShapeError("attack: label count does not match batch");
  for (auto v : y) {
    if (v >= g.output_size()) throw ArgumentError("attack: label out of range");
  }
  if (!(cfg.epsilon >= 0.0)) throw ArgumentError("attack: epsilon must be non-negative");
  if (cfg.clip_min > cfg.clip_max) throw ArgumentError("attack: clip_min exceeds clip_max");
}

// Gradient of each row's own cross-entropy (no 1/N scaling), optionally
// minus the gradient of the mean-square logit gap to `logit_ref`.
// Returns the logits through `logits_out`.
inline Tensor ce_ascent_gradient(const Graph& g, const Tensor& batch, std::span<const std::size_t> y,
                                 Tensor* logits_out = nullptr, const Tensor* logit_ref = nullptr) {
  Evaluation ev = g.evaluate(batch);
  const Tensor& z = ev.output();
  const std::size_t n = ev.batch, k = z.row_size();
  Tensor seed(z.shape(), 0.0);
  std::vector<double> p(k);
  for (std::size_t s = 0; s < n; ++s) {
    softmax_row(z.row(s), p);
    for (std::size_t j = 0; j < k; ++j) {
      double v = p[j] - (j == y[s] ? 1.0 : 0.0);
      if (logit_ref) v -= 2.0 * (z[s * k + j] - (*logit_ref)[s * k + j]) / static_cast<double>(k);
      seed[s * k + j] = v;
    }
  }
  Gradients gr = g.backward(ev, seed, false);
  if (!gr.input.all_finite()) throw NumericError("attack: non-finite gradient");
  if (logits_out) *logits_out = z;
  return gr.input.reshaped(batch.shape());
}

inline void project(std::span<double> xs, std::span<const double> x0, double eps, double lo, double hi) {
  for (std::size_t i = 0; i < xs.size(); ++i) {
    double v = std::clamp(xs[i], x0[i] - eps, x0[i] + eps);
    xs[i] = std::clamp(v, lo, hi);
  }
}

inline AdversarialBatch finish(const Graph& g, const Tensor& x, std::span<const std::size_t> y,
                               Tensor perturbed, const AttackConfig& cfg) {
  AdversarialBatch b;
  b.originals = x;
  b.perturbed = std::move(perturbed);
  b.original_labels.assign(y.begin(), y.end());
  b.adversarial_labels = predict_labels(g, b.perturbed);
  b.success_mask.resize(b.size());
  double l2 = 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < b.size(); ++i) {
    b.success_mask[i] = b.adversarial_labels[i] != b.original_labels[i];
    if (b.success_mask[i]) {
      l2 += l2_distance(b.perturbed.row(i), b.originals.row(i));
      ++hits;
    }
  }
  b.mean_l2 = hits ? l2 / static_cast<double>(hits) : 0.0;
  b.config = cfg;
  return b;
}

inline constexpr std::size_t attack_chunk = 128;

// Runs `body(chunk_x, chunk_y, first_index)` over row chunks and stitches
// the perturbed rows back together.
template <typename Body>
Tensor chunked(const Tensor& x, std::span<const std::size_t> y, Body&& body) {
  const std::size_t n = x.dim(0);
  Tensor out(x.shape());
  for (std::size_t start = 0; start < n; start += attack_chunk) {
    const std::size_t len = std::min(attack_chunk, n - start);
    std::vector<std::size_t> idx(len);
    std::iota(idx.begin(), idx.end(), start);
    Tensor part = body(gather_rows(x, idx), y.subspan(start, len), start);
    std::copy(part.data().begin(), part.data().end(), out.data().begin() + start * x.row_size());
  }
  return out;
}

// Iterated signed-gradient ascent on the cross-entropy, projected each step.
inline void bim_steps(const Graph& g, Tensor& xs, const Tensor& x0, std::span<const std::size_t> y,
                      double eps, double alpha, std::size_t steps, double lo, double hi) {
  const std::size_t n = xs.dim(0);
  for (std::size_t t = 0; t < steps; ++t) {
    Tensor grad = ce_ascent_gradient(g, xs, y);
    for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = xs[i] + alpha * sign(grad[i]);
    for (std::size_t s = 0; s < n; ++s) project(xs.row(s), x0.row(s), eps, lo, hi);
  }
}

inline Tensor pgd_start(const Tensor& x0, double eps, std::uint64_t seed, std::size_t first,
                        bool zero_init, double lo, double hi) {
  Tensor xs = x0;
  if (zero_init || eps == 0.0) return xs;
  for (std::size_t s = 0; s < xs.dim(0); ++s) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(first + s)));
    std::uniform_real_distribution<double> u(-eps, eps);
    auto row = xs.row(s);
    for (auto& v : row) v = v + u(rng);
    project(row, x0.row(s), eps, lo, hi);
  }
  return xs;
}

template <typename F>
AdversarialBatch timed(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  AdversarialBatch b = f();
  b.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return b;
}

}  // namespace detail

// x* = clip(x + eps * sign(grad_x J(x, y))), sign(0) = 0.
inline AdversarialBatch fgsm(const Graph& g, const Tensor& x, std::span<const std::size_t> y, double eps,
                             AttackConfig cfg = {}) {
  cfg.kind = AttackKind::fgsm;
  cfg.epsilon = eps;
  detail::check_attack_inputs(g, x, y, cfg);
  return detail::timed([&] {
    Tensor out = detail::chunked(x, y, [&](Tensor xs, std::span<const std::size_t> ys, std::size_t) {
      Tensor grad = detail::ce_ascent_gradient(g, xs, ys);
      for (std::size_t i = 0; i < xs.size(); ++i) {
        xs[i] = std::clamp(xs[i] + eps * detail::sign(grad[i]), cfg.clip_min, cfg.clip_max);
      }
      return xs;
    });
    return detail::finish(g, x, y, std::move(out), cfg);
  });
}

// Basic iterative method: `steps` FGSM moves of size alpha, each projected
// into the eps ball around x and the clip range.
inline AdversarialBatch bim(const Graph& g, const Tensor& x, std::span<const std::size_t> y, double eps,
                            AttackConfig cfg = {}) {
  cfg.kind = AttackKind::bim;
  cfg.epsilon = eps;
  detail::check_attack_inputs(g, x, y, cfg);
  if (cfg.step_size() > eps && eps > 0) throw ArgumentError("bim: alpha must not exceed epsilon");
  return detail::timed([&] {
    Tensor out = detail::chunked(x, y, [&](const Tensor& x0, std::span<const std::size_t> ys, std::size_t) {
      Tensor xs = x0;
      detail::bim_steps(g, xs, x0, ys, eps, cfg.step_size(), cfg.step_count(), cfg.clip_min, cfg.clip_max);
      return xs;
    });
    return detail::finish(g, x, y, std::move(out), cfg);
  });
}

// PGD: uniform random start in the eps ball (per-sample seed), then BIM steps.
inline AdversarialBatch pgd(const Graph& g, const Tensor& x, std::span<const std::size_t> y, double eps,
                            AttackConfig cfg = {}) {
  cfg.kind = AttackKind::pgd;
  cfg.epsilon = eps;
  detail::check_attack_inputs(g, x, y, cfg);
  if (cfg.step_size() > eps && eps > 0) throw ArgumentError("pgd: alpha must not exceed epsilon");
  return detail::timed([&] {
    Tensor out = detail::chunked(x, y, [&](const Tensor& x0, std::span<const std::size_t> ys, std::size_t first) {
      Tensor xs = detail::pgd_start(x0, eps, cfg.seed, first, cfg.zero_init, cfg.clip_min, cfg.clip_max);
      detail::bim_steps(g, xs, x0, ys, eps, cfg.step_size(), cfg.step_count(), cfg.clip_min, cfg.clip_max);
      return xs;
    });
    return detail::finish(g, x, y, std::move(out), cfg);
  });
}

// Zero-confidence Carlini-Wagner in L-infinity form. Minimises
//   g(x') = max(Z_y(x') - max_{i != y} Z_i(x'), -kappa),  kappa = 0,
// with Adam steps of size cw_lr, projecting every iterate. Keeps the
// misclassified iterate with the smallest L2 distortion; samples that never
// flip return their final iterate.
inline AdversarialBatch cw_linf(const Graph& g, const Tensor& x, std::span<const std::size_t> y, double eps,
                                AttackConfig cfg = {}) {
  cfg.kind = AttackKind::cw;
  cfg.epsilon = eps;
  detail::check_attack_inputs(g, x, y, cfg);
  const double kappa = 0.0;
  return detail::timed([&] {
    Tensor out = detail::chunked(x, y, [&](const Tensor& x0, std::span<const std::size_t> ys, std::size_t) {
      const std::size_t n = x0.dim(0), k = g.output_size();
      Tensor xs = x0, best = x0;
      std::vector<double> best_l2(n, std::numeric_limits<double>::infinity());
      std::vector<double> m1(x0.size(), 0.0), m2(x0.size(), 0.0);
      const double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;
      for (std::size_t it = 0; it <= cfg.cw_iters; ++it) {
        Evaluation ev = g.evaluate(xs);
        const Tensor& z = ev.output();
        Tensor seed(z.shape(), 0.0);
        for (std::size_t s = 0; s < n; ++s) {
          auto zr = z.row(s);
          std::size_t other = ys[s] == 0 ? 1 : 0;
          for (std::size_t j = 0; j < k; ++j) {
            if (j != ys[s] && zr[j] > zr[other]) other = j;
          }
          const double margin = zr[ys[s]] - zr[other];
          if (!std::isfinite(margin)) throw NumericError("cw: non-finite loss");
          if (argmax(zr) != ys[s]) {
            const double l2 = l2_distance(xs.row(s), x0.row(s));
            if (l2 < best_l2[s]) {
              best_l2[s] = l2;
              std::copy(xs.row(s).begin(), xs.row(s).end(), best.row(s).begin());
            }
          }
          if (margin > -kappa) {
            seed[s * k + ys[s]] = 1.0;
            seed[s * k + other] = -1.0;
          }
        }
        if (it == cfg.cw_iters) break;
        Tensor grad = g.backward(ev, seed, false).input;
        if (!grad.all_finite()) throw NumericError("cw: non-finite gradient");
        const double t = static_cast<double>(it + 1);
        const double c1 = 1 - std::pow(b1, t), c2 = 1 - std::pow(b2, t);
        for (std::size_t i = 0; i < xs.size(); ++i) {
          m1[i] = b1 * m1[i] + (1 - b1) * grad[i];
          m2[i] = b2 * m2[i] + (1 - b2) * grad[i] * grad[i];
          xs[i] -= cfg.cw_lr * (m1[i] / c1) / (std::sqrt(m2[i] / c2) + adam_eps);
        }
        for (std::size_t s = 0; s < n; ++s) detail::project(xs.row(s), x0.row(s), eps, cfg.clip_min, cfg.clip_max);
      }
      for (std::size_t s = 0; s < n; ++s) {
        if (std::isfinite(best_l2[s])) {
          std::copy(best.row(s).begin(), best.row(s).end(), xs.row(s).begin());
        }
      }
      return xs;
    });
    return detail::finish(g, x, y, std::move(out), cfg);
  });
}

namespace detail {

// Shared driver for the adaptive attacks. After a PGD warm start it takes
// signed steps that increase the cross-entropy of the true label while
// decreasing
//   c * ||IG(x*) - IG(x)||_2        (with_ig)
//   mean((Z(x*) - Z(x))^2)          (with_logits)
// IG inside the loss uses cfg.ig_steps midpoints and a zero baseline. The
// attribution term's gradient holds the path-averaged input gradient fixed,
// which is exact wherever the network is piecewise linear (relu/max-pool).
inline AdversarialBatch adaptive(const Graph& g, const Tensor& x, std::span<const std::size_t> y,
                                 AttackConfig cfg, bool with_ig, bool with_logits) {
  check_attack_inputs(g, x, y, cfg);
  if (cfg.c < 0) throw ArgumentError("adaptive attack: c must be non-negative");
  if (cfg.step_size() > cfg.epsilon && cfg.epsilon > 0) throw ArgumentError("adaptive attack: alpha must not exceed epsilon");
  const bool use_ig = with_ig && cfg.c > 0;
  return timed([&] {
    Tensor out = chunked(x, y, [&](const Tensor& x0, std::span<const std::size_t> ys, std::size_t first) {
      const std::size_t n = x0.dim(0), d = x0.row_size();
      const double eps = cfg.epsilon, alpha = cfg.step_size();
      Tensor xs = pgd_start(x0, eps, cfg.seed, first, cfg.zero_init, cfg.clip_min, cfg.clip_max);
      bim_steps(g, xs, x0, ys, eps, alpha, cfg.warm_start_steps, cfg.clip_min, cfg.clip_max);

      Tensor ref_logits;
      if (with_logits) ref_logits = g.evaluate(x0).output();
      std::vector<Tensor> ref_ig;
      if (use_ig) {
        const Tensor zero(g.input_shape(), 0.0);
        for (std::size_t s = 0; s < n; ++s) {
          ref_ig.push_back(ig_numeric(g, slice_row(x0, s), zero, ys[s], cfg.ig_steps).scores);
        }
      }
      for (std::size_t t = 0; t < cfg.step_count(); ++t) {
        Tensor logits;
        Tensor dir = ce_ascent_gradient(g, xs, ys, &logits, with_logits ? &ref_logits : nullptr);
        if (use_ig) {
          const Tensor zero(g.input_shape(), 0.0);
          for (std::size_t s = 0; s < n; ++s) {
            const Tensor xr = slice_row(xs, s);
            const std::size_t target = argmax(logits.row(s));
            const Tensor gbar = path_gradient_mean(g, xr, zero, target, cfg.ig_steps);
            std::vector<double> diff(d);
            double norm = 0.0;
            for (std::size_t i = 0; i < d; ++i) {
              diff[i] = xr[i] * gbar[i] - ref_ig[s][i];
              norm += diff[i] * diff[i];
            }
            norm = std::sqrt(norm);
            if (!std::isfinite(norm)) throw NumericError("adaptive attack: non-finite attribution loss");
            if (norm == 0.0) continue;
            auto row = dir.row(s);
            for (std::size_t i = 0; i < d; ++i) row[i] -= cfg.c * diff[i] / norm * gbar[i];
          }
        }
        for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = xs[i] + alpha * sign(dir[i]);
        for (std::size_t s = 0; s < n; ++s) project(xs.row(s), x0.row(s), eps, cfg.clip_min, cfg.clip_max);
      }
      return xs;
    });
    return finish(g, x, y, std::move(out), cfg);
  });
}

}  // namespace detail

inline AdversarialBatch adaptive_ig(const Graph& g, const Tensor& x, std::span<const std::size_t> y,
                                    AttackConfig cfg) {
  cfg.kind = AttackKind::adaptive_ig;
  return detail::adaptive(g, x, y, cfg, true, false);
}

inline AdversarialBatch adaptive_logit(const Graph& g, const Tensor& x, std::span<const std::size_t> y,
                                       AttackConfig cfg) {
  cfg.kind = AttackKind::adaptive_logit;
  return detail::adaptive(g, x, y, cfg, false, true);
}

inline AdversarialBatch adaptive_combined(const Graph& g, const Tensor& x, std::span<const std::size_t> y,
                                          AttackConfig cfg) {
  cfg.kind = AttackKind::adaptive_combined;
  return detail::adaptive(g, x, y, cfg, true, true);
}

inline AdversarialBatch run_attack(const Graph& g, const Tensor& x, std::span<const std::size_t> y,
                                   const AttackConfig& cfg) {
  switch (cfg.kind) {
    case AttackKind::fgsm: return fgsm(g, x, y, cfg.epsilon, cfg);
    case AttackKind::bim: return bim(g, x, y, cfg.epsilon, cfg);
    case AttackKind::pgd: return pgd(g, x, y, cfg.epsilon, cfg);
    case AttackKind::cw: return cw_linf(g, x, y, cfg.epsilon, cfg);
    case AttackKind::adaptive_ig: return adaptive_ig(g, x, y, cfg);
    case AttackKind::adaptive_logit: return adaptive_logit(g, x, y, cfg);
    case AttackKind::adaptive_combined: return adaptive_combined(g, x, y, cfg);
  }
  throw ArgumentError("unknown attack kind");
}

// ---------------------------------------------------------------- container
//
//   8 bytes "PASAADV\0", u32 version, u64 header length, JSON header
//   (config echo, shapes, labels, success mask, mean L2, extra metadata),
//   then f64 originals followed by f64 perturbed.

inline constexpr char adversarial_magic[8] = {'P', 'A', 'S', 'A', 'A', 'D', 'V', '\0'};
inline constexpr std::uint32_t adversarial_format_version = 1;

inline std::string save_adversarial(const AdversarialBatch& b, const nlohmann::json& extra = {}) {
  nlohmann::json h;
  h["config"] = b.config;
  h["shape"] = b.originals.shape();
  h["original_labels"] = b.original_labels;
  h["adversarial_labels"] = b.adversarial_labels;
  h["success_mask"] = b.success_mask;
  h["mean_l2"] = b.mean_l2;
  if (!extra.is_null()) h["meta"] = extra;
  const std::string hs = h.dump();
  std::string out(adversarial_magic, adversarial_magic + 8);
  detail::put_le<std::uint32_t>(out, adversarial_format_version);
  detail::put_le<std::uint64_t>(out, hs.size());
  out += hs;
  for (double v : b.originals.data()) detail::put_le<double>(out, v);
  for (double v : b.perturbed.data()) detail::put_le<double>(out, v);
  return out;
}

inline AdversarialBatch load_adversarial(std::string_view bytes, nlohmann::json* extra = nullptr) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), adversarial_magic, 8) != 0) {
    throw FormatError("adversarial batch: bad magic bytes");
  }
  std::size_t off = 8;
  const auto version = detail::get_le<std::uint32_t>(bytes, off, "version");
  if (version == 0 || version > adversarial_format_version) {
    throw FormatError("adversarial batch: unsupported format version " + std::to_string(version));
  }
  const auto hlen = detail::get_le<std::uint64_t>(bytes, off, "header length");
  if (off + hlen > bytes.size()) throw FormatError("adversarial batch truncated in header");
  AdversarialBatch b;
  try {
    const auto h = nlohmann::json::parse(bytes.substr(off, hlen));
    b.config = h.at("config").get<AttackConfig>();
    const auto shape = h.at("shape").get<Shape>();
    b.original_labels = h.at("original_labels").get<std::vector<std::size_t>>();
    b.adversarial_labels = h.at("adversarial_labels").get<std::vector<std::size_t>>();
    b.success_mask = h.at("success_mask").get<std::vector<std::uint8_t>>();
    b.mean_l2 = h.at("mean_l2").get<double>();
    if (extra && h.contains("meta")) *extra = h.at("meta");
    off += hlen;
    b.originals = Tensor(shape);
    b.perturbed = Tensor(shape);
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("adversarial batch: corrupt header: ") + e.what());
  }
  for (auto& v : b.originals.data()) v = detail::get_le<double>(bytes, off, "originals");
  for (auto& v : b.perturbed.data()) v = detail::get_le<double>(bytes, off, "perturbed");
  if (off != bytes.size()) throw FormatError("adversarial batch: trailing bytes");
  return b;
}

}  // namespace pasa
