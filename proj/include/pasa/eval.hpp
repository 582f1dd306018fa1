#pragma once

// Detector metrics (rank AUC, TPR at a benign-quantile threshold), the
// repeated attack x detector experiment grid, and report emission.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pasa/attacks.hpp"
#include "pasa/data.hpp"
#include "pasa/detectors.hpp"
#include "pasa/models.hpp"
#include "pasa/random.hpp"
#include "pasa/stats.hpp"

namespace pasa {

// Rank AUC of adversarial over benign; for Side::below the scores are
// negated first, so the result is 1 - auc(above).
inline double auc(std::span<const double> benign, std::span<const double> adversarial, Side direction = Side::above) {
  if (direction == Side::two_sided) throw ArgumentError("auc: direction must be above or below");
  if (direction == Side::above) return rank_auc(benign, adversarial);
  std::vector<double> b(benign.size()), a(adversarial.size());
  std::transform(benign.begin(), benign.end(), b.begin(), [](double v) { return -v; });
  std::transform(adversarial.begin(), adversarial.end(), a.begin(), [](double v) { return -v; });
  return rank_auc(b, a);
}

struct TprResult {
  double tpr = 0.0;
  double threshold = 0.0;
};

// Threshold = nearest-rank benign quantile at 1 - fpr ("above") or fpr
// ("below"); tpr = fraction of adversarial scores on the rejected side.
inline TprResult tpr_at_fpr(std::span<const double> benign, std::span<const double> adversarial, double fpr,
                            Side direction = Side::above) {
  if (direction == Side::two_sided) throw ArgumentError("tpr_at_fpr: direction must be above or below");
  if (adversarial.empty()) throw InsufficientSamplesError("tpr_at_fpr: no adversarial scores");
  const auto m = fit_interval(std::vector<double>(benign.begin(), benign.end()), fpr, direction);
  return {rejection_rate(adversarial, m), direction == Side::above ? m.upper : m.lower};
}

// Empirical test FPR of each calibration: combined OR rule and per metric.
struct FprCurveRow {
  double target = 0.0;
  double fpr = 0.0;
  double fpr_ps = 0.0;
  double fpr_as = 0.0;
};

inline std::vector<FprCurveRow> fpr_curve(std::span<const DetectorCalibration> calibrations,
                                          std::span<const SensitivityPair> benign_test) {
  if (benign_test.empty()) throw InsufficientSamplesError("fpr_curve: no benign test scores");
  std::vector<FprCurveRow> rows;
  const double n = static_cast<double>(benign_test.size());
  for (const auto& c : calibrations) {
    FprCurveRow r;
    r.target = c.fpr_target;
    for (const auto& p : benign_test) {
      r.fpr += c.rejects(p);
      r.fpr_ps += !c.ps.accepts(p.ps);
      r.fpr_as += !c.as_.accepts(p.as_);
    }
    r.fpr /= n;
    r.fpr_ps /= n;
    r.fpr_as /= n;
    rows.push_back(r);
  }
  return rows;
}

// ---------------------------------------------------------------- grid

inline const std::vector<std::string>& detector_names() {
  static const std::vector<std::string> names{"pasa", "pasa_ps", "pasa_as", "fs", "tws", "uloo"};
  return names;
}

struct GridAttack {
  std::string name;  // row label; defaults to the attack kind
  AttackConfig config;

  std::string label() const { return name.empty() ? to_string(config.kind) : name; }
};

struct GridConfig {
  std::vector<std::string> detectors{"pasa"};
  std::vector<GridAttack> attacks;
  std::size_t repeats = 10;
  std::size_t samples = 1000;
  std::uint64_t seed = 0;
  Squeezers squeezers;
  // Rejection side for the baselines; unset sides are chosen on the
  // validation set passed to run_grid, or fall back to tws below,
  // uloo/fs above.
  std::map<std::string, Side> sides;
};

inline constexpr std::array<double, 3> report_fprs{0.01, 0.05, 0.10};

struct EvalRow {
  std::string attack;
  double epsilon = 0.0;
  std::string detector;
  double auc = 0.0;
  double auc_std = 0.0;
  double tpr_fpr01 = 0.0;
  double tpr_fpr05 = 0.0;
  double tpr_fpr10 = 0.0;
  double fpr_emp = 0.0;
  std::size_t n_benign = 0;
  std::size_t n_adv = 0;
  double success_rate = 0.0;
  bool flagged = false;  // some repeat produced no successful adversarial sample
  std::vector<double> auc_runs;
};

struct EvalReport {
  std::vector<EvalRow> rows;
  nlohmann::json config;
  nlohmann::json timing;  // wall-clock data, kept apart from reproducible output

  const EvalRow* find(const std::string& attack, const std::string& detector) const {
    for (const auto& r : rows) {
      if (r.attack == attack && r.detector == detector) return &r;
    }
    return nullptr;
  }
};

inline constexpr const char* report_csv_header =
    "attack,epsilon,detector,auc,auc_std,tpr_fpr01,tpr_fpr05,tpr_fpr10,fpr_emp,n_benign,n_adv";

inline void write_csv(std::ostream& os, const EvalReport& r) {
  os << report_csv_header << '\n';
  char buf[512];
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%s,%.6f,%s,%.6f,%.6f,%.6f,%.6f,%.6f,%.6f,%zu,%zu\n", row.attack.c_str(),
                  row.epsilon, row.detector.c_str(), row.auc, row.auc_std, row.tpr_fpr01, row.tpr_fpr05,
                  row.tpr_fpr10, row.fpr_emp, row.n_benign, row.n_adv);
    os << buf;
  }
}

namespace detail {

inline nlohmann::json num(double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); }

}  // namespace detail

// JSON sidecar: config echo plus per-row detail (repeat AUCs, success rate).
inline nlohmann::json report_json(const EvalReport& r) {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& row : r.rows) {
    nlohmann::json runs = nlohmann::json::array();
    for (double a : row.auc_runs) runs.push_back(detail::num(a));
    rows.push_back({{"attack", row.attack}, {"epsilon", row.epsilon}, {"detector", row.detector},
                    {"auc", detail::num(row.auc)}, {"auc_std", detail::num(row.auc_std)},
                    {"tpr_fpr01", detail::num(row.tpr_fpr01)}, {"tpr_fpr05", detail::num(row.tpr_fpr05)},
                    {"tpr_fpr10", detail::num(row.tpr_fpr10)}, {"fpr_emp", detail::num(row.fpr_emp)},
                    {"n_benign", row.n_benign}, {"n_adv", row.n_adv}, {"success_rate", row.success_rate},
                    {"flagged", row.flagged}, {"auc_runs", runs}});
  }
  return {{"config", r.config}, {"rows", rows}};
}

// Scores of every detector for one set of inputs.
struct DetectorScores {
  std::vector<SensitivityPair> pairs;
  std::vector<double> tws, uloo, fs;
};

inline DetectorScores score_detectors(const Graph& g, const Tensor& batch, std::span<const std::uint64_t> ids,
                                      const NoiseProbe& probe, const Squeezers& sq, bool with_fs) {
  DetectorScores s;
  const std::size_t n = ids.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Tensor x = slice_row(batch, i);
    const auto p = probe_sample(g, x, probe, ids[i]);
    s.pairs.push_back(p.pair);
    s.tws.push_back(p.tws);
    s.uloo.push_back(p.uloo);
    if (with_fs) s.fs.push_back(fs_score(g, x, sq));
  }
  return s;
}

struct GridValidation {
  DetectorScores benign;
  DetectorScores adversarial;
};

namespace detail {

inline const std::vector<double>& baseline_column(const DetectorScores& s, const std::string& name) {
  if (name == "tws") return s.tws;
  if (name == "uloo") return s.uloo;
  if (name == "fs") return s.fs;
  throw ArgumentError("unknown baseline detector '" + name + "'");
}

inline Side baseline_side(const GridConfig& cfg, const GridValidation* val, const std::string& name) {
  if (auto it = cfg.sides.find(name); it != cfg.sides.end()) return it->second;
  if (val) {
    return auc(baseline_column(val->benign, name), baseline_column(val->adversarial, name)) >= 0.5 ? Side::above
                                                                                                   : Side::below;
  }
  return name == "tws" ? Side::below : Side::above;
}

struct Cell {
  double auc = 0.0;
  std::array<double, 3> tpr{};
  double fpr = 0.0;
};

inline const DetectorCalibration& calibration_at(const std::vector<DetectorCalibration>& cals, double f) {
  for (const auto& c : cals) {
    if (std::abs(c.fpr_target - f) < 1e-12) return c;
  }
  throw ArgumentError("run_grid: no calibration for FPR target " + std::to_string(f));
}

inline Cell pasa_cell(const std::string& det, const std::vector<DetectorCalibration>& cals,
                      const std::vector<SensitivityPair>& ben, const std::vector<SensitivityPair>& adv) {
  const auto& ref = calibration_at(cals, 0.05);
  auto score = [&](const SensitivityPair& p) {
    if (det == "pasa_ps") return ref.ps_sketch.tail(p.ps, ref.ps.side);
    if (det == "pasa_as") return ref.as_sketch.tail(p.as_, ref.as_.side);
    return ref.combined_score(p);
  };
  auto rejects = [&](const DetectorCalibration& c, const SensitivityPair& p) {
    if (det == "pasa_ps") return !c.ps.accepts(p.ps);
    if (det == "pasa_as") return !c.as_.accepts(p.as_);
    return c.rejects(p);
  };
  std::vector<double> sb, sa;
  for (const auto& p : ben) sb.push_back(score(p));
  for (const auto& p : adv) sa.push_back(score(p));
  Cell cell;
  cell.auc = rank_auc(sb, sa);
  for (std::size_t k = 0; k < report_fprs.size(); ++k) {
    const auto& c = calibration_at(cals, report_fprs[k]);
    std::size_t hit = 0;
    for (const auto& p : adv) hit += rejects(c, p);
    cell.tpr[k] = static_cast<double>(hit) / static_cast<double>(adv.size());
  }
  std::size_t fp = 0;
  for (const auto& p : ben) fp += rejects(ref, p);
  cell.fpr = static_cast<double>(fp) / static_cast<double>(ben.size());
  return cell;
}

// Baseline threshold. A constant benign distribution is allowed here (U-LOO
// on MNIST: most IG entries are exact zeros, so the IQR is 0); the
// constant itself is the threshold.
inline MetricInterval baseline_interval(const std::vector<double>& ben, double fpr, Side side) {
  if (std::adjacent_find(ben.begin(), ben.end(), std::not_equal_to<>()) == ben.end()) {
    check_resolution(ben.size(), fpr);
    MetricInterval m;
    m.side = side;
    (side == Side::below ? m.lower : m.upper) = ben.front();
    return m;
  }
  return fit_interval(ben, fpr, side);
}

inline Cell baseline_cell(const std::vector<double>& ben, const std::vector<double>& adv, Side side) {
  Cell cell;
  cell.auc = auc(ben, adv, side);
  // Targets the benign set cannot resolve are reported as NaN.
  for (std::size_t k = 0; k < report_fprs.size(); ++k) {
    const bool resolvable = static_cast<double>(ben.size()) * report_fprs[k] >= 1.0 - detail::rank_slack;
    cell.tpr[k] = resolvable ? rejection_rate(adv, baseline_interval(ben, report_fprs[k], side))
                             : std::numeric_limits<double>::quiet_NaN();
  }
  cell.fpr = rejection_rate(ben, baseline_interval(ben, 0.05, side));
  return cell;
}

}  // namespace detail

// Noise-stream offset for adversarial inputs (benign inputs use their
// dataset index).
inline constexpr std::uint64_t adversarial_stream = 3ULL << 40;

// Indices of correctly classified samples in `pool`.
inline std::vector<std::size_t> correctly_classified(const Graph& g, const Dataset& pool) {
  const auto pred = predict_labels(g, pool.features);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (pred[i] == pool.labels[i]) idx.push_back(i);
  }
  return idx;
}

// For each repeat: draw up to cfg.samples correctly classified samples
// from `pool` without replacement, attack them with every configured
// attack, and score benign and successful adversarial samples with every
// detector. PASA detectors use `calibrations` (targets 1, 5 and 10%).
inline EvalReport run_grid(const Graph& g, const Dataset& pool, const std::vector<DetectorCalibration>& calibrations,
                           const GridConfig& cfg, const GridValidation* validation = nullptr) {
  if (cfg.detectors.empty()) throw ArgumentError("run_grid: no detectors");
  if (cfg.attacks.empty()) throw ArgumentError("run_grid: no attacks");
  if (cfg.repeats < 1) throw ArgumentError("run_grid: repeats must be at least 1");
  bool any_pasa = false, want_fs = false;
  for (const auto& d : cfg.detectors) {
    if (std::find(detector_names().begin(), detector_names().end(), d) == detector_names().end()) {
      throw ArgumentError("run_grid: unknown detector '" + d + "'");
    }
    any_pasa |= d.rfind("pasa", 0) == 0;
    want_fs |= d == "fs";
  }
  if (any_pasa) {
    for (double f : report_fprs) detail::calibration_at(calibrations, f);
  }
  const NoiseProbe probe = any_pasa ? calibrations.front().probe : NoiseProbe{};

  const auto eligible = correctly_classified(g, pool);
  if (eligible.empty()) throw InsufficientSamplesError("run_grid: no correctly classified samples");

  struct Acc {
    std::vector<detail::Cell> cells;
    std::size_t n_benign = 0, n_adv = 0, attacked = 0;
    bool flagged = false;
  };
  std::map<std::pair<std::size_t, std::size_t>, Acc> acc;
  nlohmann::json timing = nlohmann::json::array();

  for (std::size_t rep = 0; rep < cfg.repeats; ++rep) {
    Rng rng(derive_seed(derive_seed(cfg.seed, "repeat"), static_cast<std::uint64_t>(rep)));
    std::vector<std::size_t> pick = eligible;
    std::shuffle(pick.begin(), pick.end(), rng);
    pick.resize(std::min(cfg.samples, pick.size()));
    std::sort(pick.begin(), pick.end());
    const Dataset benign = pool.subset(pick, "repeat");
    const std::vector<std::uint64_t> ids(pick.begin(), pick.end());
    const auto ben = score_detectors(g, benign.features, ids, probe, cfg.squeezers, want_fs);

    for (std::size_t a = 0; a < cfg.attacks.size(); ++a) {
      AttackConfig ac = cfg.attacks[a].config;
      ac.seed = derive_seed(derive_seed(cfg.seed ^ ac.seed, cfg.attacks[a].label()), static_cast<std::uint64_t>(rep));
      const auto batch = run_attack(g, benign.features, benign.labels, ac);
      timing.push_back({{"repeat", rep}, {"attack", cfg.attacks[a].label()},
                        {"seconds_per_sample", batch.wall_seconds / static_cast<double>(std::max<std::size_t>(1, batch.size()))}});
      const auto hits = batch.successful_indices();
      std::vector<std::uint64_t> adv_ids;
      for (auto i : hits) adv_ids.push_back(adversarial_stream + ids[i]);
      DetectorScores adv;
      if (!hits.empty()) adv = score_detectors(g, gather_rows(batch.perturbed, hits), adv_ids, probe, cfg.squeezers, want_fs);

      for (std::size_t d = 0; d < cfg.detectors.size(); ++d) {
        Acc& cell = acc[{a, d}];
        cell.n_benign += benign.size();
        cell.n_adv += hits.size();
        cell.attacked += batch.size();
        if (hits.empty()) {
          cell.flagged = true;
          continue;
        }
        const auto& name = cfg.detectors[d];
        if (name.rfind("pasa", 0) == 0) {
          cell.cells.push_back(detail::pasa_cell(name, calibrations, ben.pairs, adv.pairs));
        } else {
          cell.cells.push_back(detail::baseline_cell(detail::baseline_column(ben, name), detail::baseline_column(adv, name),
                                                     detail::baseline_side(cfg, validation, name)));
        }
      }
    }
  }

  EvalReport report;
  for (std::size_t a = 0; a < cfg.attacks.size(); ++a) {
    for (std::size_t d = 0; d < cfg.detectors.size(); ++d) {
      const Acc& c = acc[{a, d}];
      EvalRow row;
      row.attack = cfg.attacks[a].label();
      row.epsilon = cfg.attacks[a].config.epsilon;
      row.detector = cfg.detectors[d];
      row.n_benign = c.n_benign / cfg.repeats;
      row.n_adv = c.n_adv / cfg.repeats;
      row.success_rate = c.attacked ? static_cast<double>(c.n_adv) / static_cast<double>(c.attacked) : 0.0;
      row.flagged = c.flagged;
      const double nan = std::numeric_limits<double>::quiet_NaN();
      if (c.cells.empty()) {
        row.auc = row.auc_std = row.tpr_fpr01 = row.tpr_fpr05 = row.tpr_fpr10 = row.fpr_emp = nan;
      } else {
        std::vector<double> aucs, t1, t5, t10, f;
        for (const auto& cell : c.cells) {
          aucs.push_back(cell.auc);
          t1.push_back(cell.tpr[0]);
          t5.push_back(cell.tpr[1]);
          t10.push_back(cell.tpr[2]);
          f.push_back(cell.fpr);
        }
        row.auc = mean(aucs);
        row.auc_std = stddev(aucs);
        row.tpr_fpr01 = mean(t1);
        row.tpr_fpr05 = mean(t5);
        row.tpr_fpr10 = mean(t10);
        row.fpr_emp = mean(f);
        row.auc_runs = aucs;
      }
      report.rows.push_back(std::move(row));
    }
  }
  nlohmann::json attacks = nlohmann::json::array();
  for (const auto& at : cfg.attacks) attacks.push_back({{"name", at.label()}, {"config", at.config}});
  report.config = {{"detectors", cfg.detectors}, {"attacks", attacks}, {"repeats", cfg.repeats},
                   {"samples", cfg.samples}, {"seed", cfg.seed}, {"squeezers", cfg.squeezers},
                   {"probe", probe}, {"eligible", eligible.size()}};
  for (const auto& name : cfg.detectors) {
    if (name.rfind("pasa", 0) != 0) report.config["sides"][name] = detail::baseline_side(cfg, validation, name);
  }
  report.timing = timing;
  return report;
}

}  // namespace pasa
