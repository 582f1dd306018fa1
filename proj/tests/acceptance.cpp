// Acceptance checks. Each criterion prints one line
//   criterion N: PASS|FAIL <measurements>
// and the process exits non-zero when it fails.
//
// The MNIST criteria share fixtures written by two setup stages:
//   --setup model  trains LeNet, sweeps the noise spread and calibrates
//   --setup grid   runs the 10x1000 evaluation grid on the test split

#include <CLI11.hpp>

#include <chrono>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

#include "pasa/attacks.hpp"
#include "pasa/attribution.hpp"
#include "pasa/data.hpp"
#include "pasa/detectors.hpp"
#include "pasa/eval.hpp"
#include "pasa/models.hpp"
#include "support/oracles.hpp"

using namespace pasa;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t run_seed = 2024;
// Noise stream for benign samples that played no part in calibration.
constexpr std::uint64_t fresh_stream = 5ULL << 40;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string format(const char* fmt, ...) {
  char buf[1024];
  va_list ap;
  va_start(ap, fmt);
  std::vsnprintf(buf, sizeof buf, fmt, ap);
  va_end(ap);
  return buf;
}

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count(); }

 private:
  std::chrono::steady_clock::time_point t0_ = std::chrono::steady_clock::now();
};

fs::path fixture_dir = PASA_FIXTURE_DIR;

json read_json(const fs::path& p) {
  std::ifstream in(p);
  if (!in) throw Error("missing fixture " + p.string() + " (run --setup first)");
  return json::parse(in);
}

void write_json(const fs::path& p, const json& j) { std::ofstream(p) << j.dump(2) << "\n"; }

// ---------------------------------------------------------------- MNIST fixtures

Split mnist_split() {
  const std::string root = PASA_DATA_DIR "/mnist5k/";
  Dataset d = load_idx(root + "images-idx3-ubyte.gz", root + "labels-idx1-ubyte.gz");
  return split(d, {0.5, 0.15, 0.1, 0.25}, derive_seed(run_seed, "split"));
}

TrainedModel lenet() { return load_file((fixture_dir / "lenet.bin").string()); }

std::vector<DetectorCalibration> calibrations() {
  return read_json(fixture_dir / "calibrations.json").get<std::vector<DetectorCalibration>>();
}

AttackConfig attack(AttackKind kind, double eps, const char* stage) {
  AttackConfig c;
  c.kind = kind;
  c.epsilon = eps;
  c.seed = derive_seed(run_seed, stage);
  return c;
}

Tensor successful(const AdversarialBatch& b) { return gather_rows(b.perturbed, b.successful_indices()); }

std::vector<std::uint64_t> stream_ids(std::size_t n, std::uint64_t offset) {
  std::vector<std::uint64_t> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = offset + i;
  return ids;
}

// Spread/side validation set: correctly classified hold-out samples and the
// successful PGD (eps 0.15) attacks on them.
struct ValidationSet {
  Tensor benign;
  Tensor adversarial;
};

ValidationSet validation_set(const Graph& g, const Split& s) {
  auto idx = correctly_classified(g, s.holdout);
  idx.resize(std::min<std::size_t>(idx.size(), 200));
  const Dataset ben = s.holdout.subset(idx, "validation");
  const auto b = run_attack(g, ben.features, ben.labels, attack(AttackKind::pgd, 0.15, "validation"));
  return {ben.features, successful(b)};
}

const std::vector<double> mnist_spreads{0.001, 0.005, 0.01, 0.02, 0.05, 0.0707, 0.1};

NoiseProbe mnist_probe(double spread) {
  NoiseProbe p;
  p.spread = spread;
  p.seed = derive_seed(run_seed, "probe");
  return p;
}

void setup_model() {
  const Split s = mnist_split();
  TrainConfig tc;  // Adam, lr 0.001, 60 epochs, batch 64
  tc.seed = derive_seed(run_seed, "train");
  Stopwatch train_clock;
  const TrainedModel m = train(ModelSpec::lenet(Shape{28, 28}), s.train, s.test, tc);
  const double train_seconds = train_clock.seconds();
  save_file(m, (fixture_dir / "lenet.bin").string());
  std::printf("setup model: trained in %.1fs, test accuracy %.4f\n", train_seconds, m.record.accuracy);

  Stopwatch sweep_clock;
  const auto v = validation_set(m.graph, s);
  const auto sweep = sweep_spread(m.graph, v.benign, v.adversarial, mnist_spreads, mnist_probe(0));
  const double sweep_seconds = sweep_clock.seconds();
  json curve = json::array();
  for (const auto& r : sweep.curve) {
    curve.push_back({{"spread", r.spread}, {"auc_ps", r.auc_ps}, {"auc_as", r.auc_as}, {"auc_combined", r.auc_combined}});
    std::printf("  spread %-7g ps %.3f as %.3f combined %.3f\n", r.spread, r.auc_ps, r.auc_as, r.auc_combined);
  }

  Stopwatch cal_clock;
  const NoiseProbe probe = mnist_probe(sweep.best_spread);
  const ValidationScores val{sensitivities(m.graph, v.benign, probe, validation_stream),
                             sensitivities(m.graph, v.adversarial, probe, validation_stream)};
  const auto cal = sensitivities(m.graph, s.calibrate.features, probe, 0);
  const auto hold = sensitivities(m.graph, s.holdout.features, probe, holdout_stream);
  std::vector<DetectorCalibration> cals;
  for (double f : report_fprs) {
    cals.push_back(calibrate_scores(cal, hold, probe, f, &val));
    cals.back().fingerprint = fingerprint(s.calibrate.features) + ":" + fingerprint(s.holdout.features);
  }
  write_json(fixture_dir / "calibrations.json", cals);
  write_json(fixture_dir / "fixture.json",
             {{"spread", sweep.best_spread}, {"curve", curve}, {"accuracy", m.record.accuracy},
              {"adversarial_validation", v.adversarial.dim(0)}, {"train_seconds", train_seconds},
              {"sweep_seconds", sweep_seconds}, {"calibrate_seconds", cal_clock.seconds()}});
  std::printf("setup model: spread %g, sides ps=%s as=%s\n", sweep.best_spread, json(cals[0].ps.side).get<std::string>().c_str(),
              json(cals[0].as_.side).get<std::string>().c_str());
}

std::vector<GridAttack> grid_attacks() {
  return {{"fgsm_8", attack(AttackKind::fgsm, 8 / 255.0, "grid")},
          {"fgsm_32", attack(AttackKind::fgsm, 32 / 255.0, "grid")},
          {"pgd_8", attack(AttackKind::pgd, 8 / 255.0, "grid")},
          {"pgd_32", attack(AttackKind::pgd, 32 / 255.0, "grid")},
          {"pgd_0.15", attack(AttackKind::pgd, 0.15, "grid")}};
}

void setup_grid() {
  const Split s = mnist_split();
  const TrainedModel m = lenet();
  const auto cals = calibrations();
  Stopwatch clock;
  GridConfig cfg;
  cfg.detectors = {"pasa", "pasa_ps", "pasa_as", "fs", "tws", "uloo"};
  cfg.attacks = grid_attacks();
  cfg.repeats = 10;
  cfg.samples = 1000;
  cfg.seed = derive_seed(run_seed, "grid");
  const auto v = validation_set(m.graph, s);
  GridValidation val{
      score_detectors(m.graph, v.benign, stream_ids(v.benign.dim(0), validation_stream), cals[0].probe, cfg.squeezers, true),
      score_detectors(m.graph, v.adversarial, stream_ids(v.adversarial.dim(0), validation_stream), cals[0].probe,
                      cfg.squeezers, true)};
  const auto report = run_grid(m.graph, s.test, cals, cfg, &val);
  json j = report_json(report);
  j["wall_seconds"] = clock.seconds();
  j["timing"] = report.timing;
  write_json(fixture_dir / "report.json", j);
  for (const auto& r : report.rows) {
    std::printf("  %-9s %-8s auc %.3f +- %.3f  tpr@5%% %.3f  n_adv %zu\n", r.attack.c_str(), r.detector.c_str(), r.auc,
                r.auc_std, r.tpr_fpr05, r.n_adv);
  }
  std::printf("setup grid: %.1f min\n", clock.seconds() / 60);
}

const json& report_row(const json& report, const std::string& attack_name, const std::string& detector) {
  for (const auto& r : report.at("rows")) {
    if (r.at("attack") == attack_name && r.at("detector") == detector) return r;
  }
  throw Error("report has no row " + attack_name + "/" + detector);
}

double value(const json& row, const char* key) {
  return row.at(key).is_null() ? std::numeric_limits<double>::quiet_NaN() : row.at(key).get<double>();
}

// ---------------------------------------------------------------- criteria

Outcome gradients() {
  Stopwatch clock;
  std::mt19937_64 rng(derive_seed(run_seed, "gradients"));
  double worst = 0.0;
  std::size_t instances = 0;
  auto check = [&](const Graph& g, const Tensor& x) {
    const Evaluation ev = g.evaluate(x);
    const Tensor adj = pasa::testing::random_tensor(ev.output().shape(), rng);
    auto objective = [&](const Tensor& z) {
      double s = 0.0;
      for (std::size_t i = 0; i < z.size(); ++i) s += adj[i] * z[i];
      return s;
    };
    const Gradients grads = g.backward(ev, adj, true, true);
    worst = std::max(worst, pasa::testing::max_abs_diff(grads.input.data(),
                                                        pasa::testing::fd_input_gradient(g, x, objective).data()));
    for (const auto& [name, t] : g.parameters()) {
      worst = std::max(worst, pasa::testing::max_abs_diff(
                                  grads.params.at(name).data(), pasa::testing::fd_param_gradient(g, name, x, objective).data()));
    }
    ++instances;
  };
  for (int i = 0; i < 20; ++i) {
    const Graph g = pasa::testing::random_mlp(rng, 6, 10, 4);
    check(g, pasa::testing::random_tensor({3, 6}, rng));
  }
  for (int i = 0; i < 20; ++i) {
    const std::size_t stride = 1 + i % 2, padding = i % 3 == 0 ? 0 : 1;
    const Graph g = pasa::testing::random_cnn(rng, stride, padding);
    check(g, pasa::testing::random_tensor({2, 2, 7, 7}, rng));
  }
  const double t = clock.seconds();
  return {worst <= 1e-4 && t < 60,
          format("%zu instances, max abs diff %.3g (<= 1e-4), %.1fs (< 60s)", instances, worst, t)};
}

Outcome completeness() {
  Stopwatch clock;
  const Split s = mnist_split();
  const TrainedModel m = lenet();
  const Tensor zero(Shape{28, 28}, 0.0);
  const Tensor zu = forward(m.graph, zero);
  std::size_t violations = 0;
  double worst_ratio = 0.0;
  for (std::size_t i = 0; i < 100; ++i) {
    const Tensor x = slice_row(s.test.features, i);
    const std::size_t t = s.test.labels[i];
    const Tensor zx = forward(m.graph, x);
    const double gap = completeness_gap(m.graph, ig_numeric(m.graph, x, zero, t, 256), x, zero);
    const double bound = std::max(1e-3, 1e-2 * std::abs(zx[t] - zu[t]));
    violations += gap > bound;
    worst_ratio = std::max(worst_ratio, gap / bound);
  }
  const double secs = clock.seconds();
  return {violations == 0 && secs < 120,
          format("100 samples, m=256: %zu over bound, worst gap/bound %.3f, %.1fs (< 120s)", violations, worst_ratio, secs)};
}

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Two-row single-layer model whose row 0 is w.
TrainedModel single_layer(const Tensor& w) {
  std::vector<double> rows(w.values().begin(), w.values().end());
  for (double v : w.values()) rows.push_back(-v);
  return make_single_layer(Tensor::matrix(2, w.size(), rows), Activation::sigmoid);
}

Outcome closed_form() {
  Stopwatch clock;
  std::mt19937_64 rng(derive_seed(run_seed, "closed_form"));
  double worst = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Tensor w = pasa::testing::random_tensor({10}, rng);
    const Tensor x = pasa::testing::random_tensor({10}, rng, 0, 1);
    const Tensor u(Shape{10}, 0.0);
    const auto num = ig_numeric(single_layer(w).graph, x, u, 0, 1024);
    const auto exact = ig_closed_form(w, sigmoid, x, u);
    worst = std::max(worst, pasa::testing::max_abs_diff(num.scores.data(), exact.scores.data()));
  }
  const double t = clock.seconds();
  return {worst <= 1e-3 && t < 60, format("100 models, max abs error %.3g (<= 1e-3), %.1fs (< 60s)", worst, t)};
}

Outcome noise_attribution_link() {
  // Single-layer part: IG(x', x) in closed form against F(x') - F(x).
  std::mt19937_64 rng(derive_seed(run_seed, "link"));
  std::normal_distribution<double> noise(0.0, 0.05);
  double worst_l1 = 0.0, worst_sum = 0.0;
  for (int i = 0; i < 100; ++i) {
    const Tensor w = pasa::testing::random_tensor({10}, rng);
    const Tensor x = pasa::testing::random_tensor({10}, rng, 0, 1);
    Tensor xp = x;
    for (auto& v : xp.data()) v += noise(rng);
    const auto map = ig_closed_form(w, sigmoid, xp, x);
    double fx = 0, fxp = 0, l1 = 0;
    for (std::size_t k = 0; k < 10; ++k) {
      fx += w[k] * x[k];
      fxp += w[k] * xp[k];
      l1 += std::abs(map.scores[k]);
    }
    const double df = sigmoid(fxp) - sigmoid(fx);
    worst_l1 = std::max(worst_l1, std::abs(l1 - std::abs(df)));
    worst_sum = std::max(worst_sum, std::abs(map.total() - df));
  }

  // Trained-MLP part: one noise draw on each of 500 test samples.
  const Split s = mnist_split();
  TrainConfig tc;
  tc.epochs = 10;
  tc.seed = derive_seed(run_seed, "mlp");
  const TrainedModel mlp = train(ModelSpec::mlp(Shape{28, 28}, {128}, 10), s.train, s.test, tc);
  const auto pairs = sensitivities(mlp.graph, s.test.features.reshaped(batched(s.test.size(), Shape{28, 28})),
                                   mnist_probe(0.005), fresh_stream);
  std::vector<double> dz, dig;
  for (std::size_t i = 0; i < 500; ++i) {
    dz.push_back(pairs[i].ps);
    dig.push_back(pairs[i].as_);
  }
  const double rho = spearman(dig, dz);
  return {worst_l1 <= 1e-9 && rho > 0.9,
          format("single-layer | ||IG||_1 - |dF| | max %.3g (<= 1e-9), |sum IG - dF| max %.3g; MLP (acc %.3f) spearman %.3f "
                 "(> 0.9)",
                 worst_l1, worst_sum, mlp.record.accuracy, rho)};
}

Outcome attack_contracts() {
  const Split s = mnist_split();
  const TrainedModel m = lenet();
  auto idx = correctly_classified(m.graph, s.test);
  idx.resize(200);
  const Dataset d = s.test.subset(idx, "attacks");
  std::vector<std::size_t> first(100);
  std::iota(first.begin(), first.end(), 0);
  const Tensor x = gather_rows(d.features, first);
  const std::vector<std::size_t> y(d.labels.begin(), d.labels.begin() + 100);

  std::size_t outside = 0;
  double worst = 0.0;
  const double eps = 16 / 255.0;
  for (AttackKind k : {AttackKind::fgsm, AttackKind::bim, AttackKind::pgd, AttackKind::cw}) {
    const auto b = run_attack(m.graph, x, y, attack(k, eps, "contracts"));
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double v = b.perturbed[i];
      worst = std::max(worst, std::abs(v - x[i]));
      outside += std::abs(v - x[i]) > eps + 1e-12 || v < 0.0 || v > 1.0;
    }
  }
  AttackConfig one = attack(AttackKind::bim, eps, "contracts");
  one.steps = 1;
  one.alpha = eps;
  const bool identical = run_attack(m.graph, x, y, one).perturbed == fgsm(m.graph, x, y, eps).perturbed;

  std::vector<double> rates;
  std::string listing;
  for (double e : {8.0, 16.0, 32.0, 64.0}) {
    rates.push_back(run_attack(m.graph, d.features, d.labels, attack(AttackKind::pgd, e / 255, "monotone")).success_rate());
    listing += format("%s%.3f", listing.empty() ? "" : "/", rates.back());
  }
  const bool monotone = std::is_sorted(rates.begin(), rates.end());
  return {outside == 0 && identical && monotone,
          format("%zu values outside ball/range (max |d| %.5f, eps %.5f); BIM(1,eps)==FGSM %s; PGD success %s on 8/16/32/64 "
                 "(monotone %s)",
                 outside, worst, eps, identical ? "yes" : "no", listing.c_str(), monotone ? "yes" : "no")};
}

Outcome pgd_convergence() {
  const Split s = mnist_split();
  const TrainedModel m = lenet();
  GridConfig cfg;
  cfg.attacks = {{"pgd_40", attack(AttackKind::pgd, 32 / 255.0, "convergence")},
                 {"pgd_100", attack(AttackKind::pgd, 32 / 255.0, "convergence")}};
  cfg.attacks[0].config.steps = 40;
  cfg.attacks[1].config.steps = 100;
  cfg.repeats = 1;
  cfg.samples = 500;
  cfg.seed = derive_seed(run_seed, "convergence");
  const auto r = run_grid(m.graph, s.test, calibrations(), cfg);
  const double a40 = r.find("pgd_40", "pasa")->auc, a100 = r.find("pgd_100", "pasa")->auc;
  return {std::abs(a40 - a100) <= 0.03,
          format("PASA AUC 40 steps %.4f, 100 steps %.4f, |diff| %.4f (<= 0.03)", a40, a100, std::abs(a40 - a100))};
}

Outcome table_reproduction() {
  const json fixture = read_json(fixture_dir / "fixture.json");
  const json report = read_json(fixture_dir / "report.json");
  const double f8 = value(report_row(report, "fgsm_8", "pasa"), "auc");
  const double p32 = value(report_row(report, "pgd_32", "pasa"), "auc");
  const double p15 = value(report_row(report, "pgd_0.15", "pasa"), "auc");
  const double minutes = (fixture.at("train_seconds").get<double>() + fixture.at("sweep_seconds").get<double>() +
                          fixture.at("calibrate_seconds").get<double>() + report.at("wall_seconds").get<double>()) /
                         60;
  const bool pass = f8 >= 0.85 && p32 >= 0.90 && p15 >= 0.90 && minutes < 60;
  return {pass, format("PASA AUC fgsm 8/255 %.3f (>= 0.85), pgd 32/255 %.3f (>= 0.90), pgd 0.15 %.3f (>= 0.90); "
                       "spread %g; full run %.1f min (< 60)",
                       f8, p32, p15, fixture.at("spread").get<double>(), minutes)};
}

Outcome baselines() {
  const json report = read_json(fixture_dir / "report.json");
  const double fs = value(report_row(report, "fgsm_8", "fs"), "auc");
  const double tws = value(report_row(report, "fgsm_32", "tws"), "auc");
  const double uloo = value(report_row(report, "pgd_8", "uloo"), "auc");
  const auto& sides = report.at("config").at("sides");
  return {fs >= 0.80 && tws >= 0.70 && uloo >= 0.80,
          format("FS fgsm 8/255 %.3f (>= 0.80), TWS fgsm 32/255 %.3f (>= 0.70, side %s), U-LOO pgd 8/255 %.3f (>= 0.80)", fs,
                 tws, sides.at("tws").get<std::string>().c_str(), uloo)};
}

Outcome tabular() {
  Stopwatch clock;
  const fs::path csv = fixture_dir / "flows.csv";
  {
    std::ofstream out(csv);
    write_synthetic_flows(out, 10000, derive_seed(run_seed, "flows"));
  }
  const auto t = load_tabular_split(csv.string(), synthetic_flow_schema(), {0.6, 0.15, 0.1, 0.15},
                                    derive_seed(run_seed, "flows_split"));
  const Split& s = t.parts;
  TrainConfig tc;
  tc.learning_rate = 0.01;
  tc.epochs = 1000;
  tc.batch = 64;
  tc.seed = derive_seed(run_seed, "ids_train");
  const TrainedModel m = train(ModelSpec::mlp(s.train.sample_shape(), {64, 64}, 2), s.train, s.test, tc);

  auto rows = [&](const Dataset& d, std::size_t cls, bool correct_only) {
    const auto pred = predict_labels(m.graph, d.features);
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < d.size(); ++i) {
      if (d.labels[i] == cls && (!correct_only || pred[i] == cls)) idx.push_back(i);
    }
    return d.subset(idx, "class");
  };
  // Attack samples pushed across the boundary toward benign.
  auto adversarial = [&](const Dataset& d, const char* stage) {
    const Dataset atk = rows(d, 1, true);
    const auto b = fgsm(m.graph, atk.features, atk.labels, 0.1, attack(AttackKind::fgsm, 0.1, stage));
    return std::pair{successful(b), b.success_rate()};
  };

  const Dataset hold_benign = rows(s.holdout, 0, true);
  const auto [hold_adv, hold_rate] = adversarial(s.holdout, "ids_validation");
  const std::vector<double> grid{0.0001, 0.0005, 0.001, 0.005, 0.01, 0.02, 0.05};
  NoiseProbe probe;
  probe.seed = derive_seed(run_seed, "ids_probe");
  const auto sweep = sweep_spread(m.graph, hold_benign.features, hold_adv, grid, probe);
  probe.spread = sweep.best_spread;
  const ValidationScores val{sensitivities(m.graph, hold_benign.features, probe, validation_stream),
                             sensitivities(m.graph, hold_adv, probe, validation_stream)};
  const auto cal = calibrate(m.graph, rows(s.calibrate, 0, false).features, rows(s.holdout, 0, false).features, probe, 0.05,
                             &val);

  const Dataset test_benign = rows(s.test, 0, true);
  const auto [test_adv, test_rate] = adversarial(s.test, "ids_test");
  std::vector<double> sb, sa;
  for (const auto& p : sensitivities(m.graph, test_benign.features, probe, fresh_stream)) sb.push_back(cal.combined_score(p));
  for (const auto& p : sensitivities(m.graph, test_adv, probe, adversarial_stream)) sa.push_back(cal.combined_score(p));
  const double a = sa.empty() ? std::numeric_limits<double>::quiet_NaN() : rank_auc(sb, sa);
  return {a >= 0.90, format("synthetic flows, MLP 2x64 acc %.4f, FGSM eps 0.1 success %.3f (%zu adv vs %zu benign), spread %g, "
                            "PASA AUC %.3f (>= 0.90), %.0fs",
                            m.record.accuracy, test_rate, sa.size(), sb.size(), sweep.best_spread, a, clock.seconds())};
}

Outcome auc_oracle() {
  std::mt19937_64 rng(derive_seed(run_seed, "auc"));
  std::uniform_int_distribution<int> size(1, 60), level(0, 7);
  std::size_t mismatches = 0;
  for (int k = 0; k < 1000; ++k) {
    std::vector<double> b(size(rng)), a(size(rng));
    for (auto& v : b) v = level(rng) * 0.25;
    for (auto& v : a) v = level(rng) * 0.25 + 0.5;
    std::size_t twice = 0;  // 2 * (#greater + 0.5 * #ties)
    for (double va : a) {
      for (double vb : b) twice += va > vb ? 2 : (va == vb ? 1 : 0);
    }
    const double brute = static_cast<double>(twice) / (2.0 * static_cast<double>(a.size() * b.size()));
    mismatches += rank_auc(b, a) != brute;
  }
  return {mismatches == 0, format("1000 tied score sets, %zu mismatches against pairwise count", mismatches)};
}

Outcome calibration_property() {
  const Split s = mnist_split();
  const TrainedModel m = lenet();
  const auto cals = calibrations();
  const auto ok = correctly_classified(m.graph, s.test);
  const Dataset fresh = s.test.subset(ok, "fresh");
  const auto pairs = sensitivities(m.graph, fresh.features, cals[0].probe, fresh_stream);
  bool pass = true;
  std::string detail = format("%zu fresh benign:", pairs.size());
  for (const auto& r : fpr_curve(cals, pairs)) {
    pass &= std::abs(r.fpr_ps - r.target) <= 0.02 && std::abs(r.fpr_as - r.target) <= 0.02;
    detail += format(" target %.2f ps %.4f as %.4f (or %.4f);", r.target, r.fpr_ps, r.fpr_as, r.fpr);
  }
  const json report = read_json(fixture_dir / "report.json");
  std::size_t sets = 0, violations = 0;
  for (const auto& a : grid_attacks()) {
    const auto& comb = report_row(report, a.name, "pasa");
    const auto& ps = report_row(report, a.name, "pasa_ps");
    const auto& as = report_row(report, a.name, "pasa_as");
    for (const char* key : {"tpr_fpr01", "tpr_fpr05", "tpr_fpr10"}) {
      if (comb.at(key).is_null()) continue;
      ++sets;
      violations += value(comb, key) < std::max(value(ps, key), value(as, key));
    }
  }
  pass &= violations == 0;
  return {pass, detail + format(" OR-TPR below max single-metric TPR in %zu of %zu sets", violations, sets)};
}

Outcome adaptive_direction() {
  const Split s = mnist_split();
  const TrainedModel m = lenet();
  GridConfig cfg;
  cfg.attacks = {{"pgd", attack(AttackKind::pgd, 0.1, "adaptive")},
                 {"adaptive_combined", attack(AttackKind::adaptive_combined, 0.1, "adaptive")}};
  cfg.repeats = 1;
  cfg.samples = 300;
  cfg.seed = derive_seed(run_seed, "adaptive");
  const auto r = run_grid(m.graph, s.test, calibrations(), cfg);
  const double pgd_auc = r.find("pgd", "pasa")->auc, adv_auc = r.find("adaptive_combined", "pasa")->auc;
  double t_pgd = 0, t_adv = 0;
  for (const auto& t : r.timing) (t.at("attack") == "pgd" ? t_pgd : t_adv) = t.at("seconds_per_sample").get<double>();
  const double drop = pgd_auc - adv_auc, ratio = t_adv / t_pgd;
  return {drop >= 0.10 && ratio >= 10,
          format("eps 0.1: PASA AUC pgd %.3f, adaptive_combined %.3f (success %.2f), drop %.3f (>= 0.10); %.4fs vs %.4fs per "
                 "sample, ratio %.1f (>= 10)",
                 pgd_auc, adv_auc, r.find("adaptive_combined", "pasa")->success_rate, drop, t_adv, t_pgd, ratio)};
}

Outcome run(int criterion) {
  switch (criterion) {
    case 1: return gradients();
    case 2: return completeness();
    case 3: return closed_form();
    case 4: return noise_attribution_link();
    case 5: return attack_contracts();
    case 6: return pgd_convergence();
    case 7: return table_reproduction();
    case 8: return baselines();
    case 9: return tabular();
    case 10: return auc_oracle();
    case 11: return calibration_property();
    case 12: return adaptive_direction();
  }
  throw ArgumentError("no criterion " + std::to_string(criterion));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"pasa acceptance checks"};
  std::vector<int> criteria;
  std::string setup, dir = fixture_dir.string();
  app.add_option("--criterion", criteria, "criterion numbers to check (default: all)")->check(CLI::Range(1, 12));
  app.add_option("--setup", setup, "build a fixture stage instead")->check(CLI::IsMember({"model", "grid"}));
  app.add_option("--fixtures", dir, "fixture directory");
  CLI11_PARSE(app, argc, argv);
  fixture_dir = dir;
  fs::create_directories(fixture_dir);

  try {
    if (setup == "model") setup_model();
    if (setup == "grid") setup_grid();
    if (!setup.empty()) return 0;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "setup %s: %s\n", setup.c_str(), e.what());
    return 1;
  }

  if (criteria.empty()) {
    for (int i = 1; i <= 12; ++i) criteria.push_back(i);
  }
  bool all = true;
  for (int c : criteria) {
    Outcome o;
    try {
      o = run(c);
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    std::printf("criterion %d: %s %s\n", c, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    all &= o.pass;
  }
  return all ? 0 : 1;
}
