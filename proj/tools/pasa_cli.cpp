// pasa: train / attack / calibrate / detect / evaluate / sweep.
//
// Exit codes:
//   0  success
//   1  unexpected internal error
//   2  configuration error (bad flag, missing or malformed field, missing input file)
//   3  training diverged
//   4  model or artifact file could not be loaded
//   5  not enough samples for the requested statistic

#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "json.hpp"
#include "pasa/attacks.hpp"
#include "pasa/data.hpp"
#include "pasa/detectors.hpp"
#include "pasa/eval.hpp"
#include "pasa/models.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pasa;

namespace {

enum Exit : int { exit_ok = 0, exit_internal = 1, exit_config = 2, exit_diverged = 3, exit_artifact = 4, exit_samples = 5 };

class ConfigError : public Error {
 public:
  using Error::Error;
};

class ArtifactError : public Error {
 public:
  using Error::Error;
};

constexpr std::uint64_t detect_stream = 4ULL << 40;

std::string fnv_hex(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

struct Run {
  json config;
  std::uint64_t seed = 0;
  std::string hash;
  fs::path base;  // relative input paths resolve against the config file's directory
  fs::path out;

  json stamp() const { return {{"config_hash", hash}, {"seed", seed}}; }
  std::string comment() const { return "# config_hash=" + hash + " seed=" + std::to_string(seed) + "\n"; }
};

// ------------------------------------------------------------ config access

const json* find(const json& j, std::string_view dotted) {
  const json* cur = &j;
  std::size_t start = 0;
  while (start <= dotted.size()) {
    const auto end = std::min(dotted.find('.', start), dotted.size());
    const std::string key(dotted.substr(start, end - start));
    if (!cur->is_object() || !cur->contains(key)) return nullptr;
    cur = &(*cur)[key];
    start = end + 1;
  }
  return cur;
}

template <class T>
T get(const json& cfg, const std::string& field) {
  const json* j = find(cfg, field);
  if (!j) throw ConfigError(field + ": required field is missing");
  try {
    return j->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(field + ": " + e.what());
  } catch (const ArgumentError& e) {
    throw ConfigError(field + ": " + e.what());
  }
}

template <class T>
T get_or(const json& cfg, const std::string& field, T fallback) {
  return find(cfg, field) ? get<T>(cfg, field) : fallback;
}

fs::path input_path(const Run& run, const std::string& field, const fs::path& fallback = {}) {
  fs::path p;
  if (find(run.config, field)) {
    p = get<std::string>(run.config, field);
    if (p.is_relative()) p = run.base / p;
  } else if (!fallback.empty()) {
    p = fallback;
  } else {
    throw ConfigError(field + ": required field is missing");
  }
  if (!fs::exists(p)) throw ConfigError(field + ": file '" + p.string() + "' does not exist");
  return p;
}

// ------------------------------------------------------------ output

void write_bytes(const fs::path& p, std::string_view bytes) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw ConfigError("out: cannot write '" + p.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

void write_json(const fs::path& p, const json& j) { write_bytes(p, j.dump(2) + "\n"); }

std::string utc_now() {
  const std::time_t t = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

// Wall-clock facts live beside the primary output so that one stays
// byte-reproducible.
void write_timing(const Run& run, const std::string& name, json timing) {
  timing["finished_utc"] = utc_now();
  timing["config_hash"] = run.hash;
  write_json(run.out / (name + ".timing.json"), timing);
}

// ------------------------------------------------------------ inputs

Split load_data(const Run& run) {
  const json& cfg = run.config;
  const auto kind = get<std::string>(cfg, "dataset.kind");
  SplitFractions f{get_or(cfg, "split.train", 0.6), get_or(cfg, "split.calibrate", 0.2),
                   get_or(cfg, "split.holdout", 0.1), get_or(cfg, "split.test", 0.1)};
  const std::uint64_t split_seed = derive_seed(run.seed, "split");
  Dataset d;
  if (kind == "blobs") {
    d = synth_blobs(get_or<std::size_t>(cfg, "dataset.classes", 3), get_or<std::size_t>(cfg, "dataset.dims", 10),
                    get<std::size_t>(cfg, "dataset.n"), get_or(cfg, "dataset.separation", 3.0),
                    derive_seed(run.seed, "dataset"));
  } else if (kind == "idx") {
    const auto images = input_path(run, "dataset.images");
    const auto labels = input_path(run, "dataset.labels");
    d = load_idx(images.string(), labels.string());
  } else if (kind == "tabular") {
    const auto csv = input_path(run, "dataset.csv");
    TabularSchema schema;
    try {
      schema = TabularSchema::from_json(get<json>(cfg, "dataset.schema"));
    } catch (const ArgumentError& e) {
      throw ConfigError(std::string("dataset.schema: ") + e.what());
    }
    return load_tabular_split(csv.string(), schema, f, split_seed).parts;
  } else {
    throw ConfigError("dataset.kind: unknown kind '" + kind + "' (valid: blobs, idx, tabular)");
  }
  if (const auto limit = get_or<std::size_t>(cfg, "dataset.limit", 0); limit && limit < d.size()) {
    std::vector<std::size_t> idx(limit);
    std::iota(idx.begin(), idx.end(), 0);
    d = d.subset(idx, d.provenance);
  }
  return split(d, f, split_seed);
}

const Dataset& part(const Split& s, const std::string& name, const std::string& field) {
  if (name == "train") return s.train;
  if (name == "calibrate") return s.calibrate;
  if (name == "holdout") return s.holdout;
  if (name == "test") return s.test;
  throw ConfigError(field + ": unknown split '" + name + "' (valid: train, calibrate, holdout, test)");
}

Dataset head(const Dataset& d, std::size_t n) {
  if (n == 0 || n >= d.size()) return d;
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), 0);
  return d.subset(idx, d.provenance);
}

TrainedModel load_model(const Run& run) {
  const auto p = input_path(run, "model_path", run.out / "model.bin");
  try {
    return load_file(p.string());
  } catch (const Error& e) {
    throw ArtifactError("model_path: " + std::string(e.what()));
  }
}

DetectorCalibration load_calibration(const Run& run) {
  const auto p = input_path(run, "calibration_path", run.out / "calibration.json");
  try {
    std::ifstream in(p);
    return json::parse(in).at("calibration").get<DetectorCalibration>();
  } catch (const std::exception& e) {
    throw ArtifactError("calibration_path: " + std::string(e.what()));
  }
}

void check_input_shape(const TrainedModel& m, const Dataset& d) {
  if (d.size() && d.sample_shape() != m.spec.input_shape) {
    throw ConfigError("model: input shape " + to_string(m.spec.input_shape) + " does not match dataset samples " +
                      to_string(d.sample_shape()));
  }
}

NoiseProbe probe_from(const Run& run) {
  auto p = get_or<NoiseProbe>(run.config, "probe", NoiseProbe{});
  p.seed = derive_seed(run.seed, "probe");
  try {
    validate(p);
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  return p;
}

AttackConfig attack_from(const Run& run, const std::string& field, std::string_view stage) {
  auto a = get<AttackConfig>(run.config, field);
  a.seed = derive_seed(run.seed, stage);
  return a;
}

std::vector<std::size_t> correct_indices(const Graph& g, const Dataset& d) {
  const auto pred = predict_labels(g, d.features);
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < d.size(); ++i) {
    if (pred[i] == d.labels[i]) idx.push_back(i);
  }
  return idx;
}

// ------------------------------------------------------------ subcommands

int cmd_train(const Run& run) {
  const auto t0 = std::chrono::steady_clock::now();
  const Split s = load_data(run);
  const auto spec = get<ModelSpec>(run.config, "model");
  auto tc = get_or<TrainConfig>(run.config, "train", TrainConfig{});
  tc.seed = derive_seed(run.seed, "train");
  if (s.train.size() && s.train.sample_shape() != spec.input_shape) {
    throw ConfigError("model.input_shape: " + to_string(spec.input_shape) + " does not match dataset samples " +
                      to_string(s.train.sample_shape()));
  }
  const Dataset& eval = s.test.size() ? s.test : s.train;
  TrainedModel m;
  try {
    m = train(spec, s.train, eval, tc);
  } catch (const ArgumentError& e) {
    throw ConfigError(e.what());
  }
  save_file(m, (run.out / "model.bin").string(), run.stamp());
  json metrics = run.stamp();
  metrics["accuracy"] = m.record.accuracy;
  metrics["final_loss"] = m.record.final_loss;
  metrics["epochs"] = m.record.epochs;
  metrics["train_seed"] = tc.seed;
  metrics["n_train"] = s.train.size();
  metrics["n_eval"] = eval.size();
  write_json(run.out / "train_metrics.json", metrics);
  write_timing(run, "train", {{"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}});
  std::cout << "train: accuracy " << m.record.accuracy << "\n";
  return exit_ok;
}

int cmd_attack(const Run& run) {
  const auto cfg = attack_from(run, "attack", "attack");
  const TrainedModel m = load_model(run);
  const Split s = load_data(run);
  const auto split_name = get_or<std::string>(run.config, "attack_split", "test");
  const Dataset pool = head(part(s, split_name, "attack_split"), get_or<std::size_t>(run.config, "attack_samples", 0));
  check_input_shape(m, pool);
  if (pool.size() == 0) throw InsufficientSamplesError("attack: split '" + split_name + "' is empty");
  const auto b = run_attack(m.graph, pool.features, pool.labels, cfg);
  json extra = run.stamp();
  extra["split"] = split_name;
  write_bytes(run.out / "adversarial.bin", save_adversarial(b, extra));

  const auto clean = predict_labels(m.graph, pool.features);
  std::size_t wrong = 0;
  for (std::size_t i = 0; i < pool.size(); ++i) wrong += clean[i] != pool.labels[i];
  json summary = run.stamp();
  summary["attack"] = cfg;
  summary["n"] = b.size();
  summary["success_rate"] = b.success_rate();
  summary["clean_error_rate"] = static_cast<double>(wrong) / static_cast<double>(pool.size());
  summary["mean_l2"] = b.mean_l2;
  write_json(run.out / "attack_summary.json", summary);
  write_timing(run, "attack",
               {{"wall_seconds", b.wall_seconds}, {"seconds_per_sample", b.wall_seconds / static_cast<double>(b.size())}});
  std::cout << "attack: " << to_string(cfg.kind) << " success rate " << b.success_rate() << "\n";
  return exit_ok;
}

struct SweepOutcome {
  SweepResult result;
  ValidationScores scores;  // at the chosen spread
};

// Spread sweep on the hold-out split: correctly classified benign samples
// versus successful attacks on them.
SweepOutcome run_sweep(const Run& run, const Graph& g, const Split& s, NoiseProbe probe) {
  if (!find(run.config, "sweep")) throw ConfigError("sweep: required section is missing");
  std::vector<double> grid;
  if (find(run.config, "sweep.spreads")) {
    grid = get<std::vector<double>>(run.config, "sweep.spreads");
  } else {
    grid = spread_grid(get<double>(run.config, "sweep.start"), get<double>(run.config, "sweep.delta"),
                       get<std::size_t>(run.config, "sweep.count"));
  }
  if (grid.empty()) throw ConfigError("sweep: spread grid is empty");
  for (double v : grid) {
    if (!(v > 0.0)) throw ConfigError("sweep: spreads must be positive");
  }
  const auto field = find(run.config, "sweep.attack") ? "sweep.attack" : "attack";
  const auto acfg = attack_from(run, field, "sweep-attack");
  const auto ok = correct_indices(g, s.holdout);
  const Dataset benign = head(s.holdout.subset(ok, "sweep-benign"), get_or<std::size_t>(run.config, "sweep.samples", 200));
  if (benign.size() == 0) throw InsufficientSamplesError("sweep: no correctly classified hold-out samples");
  const auto b = run_attack(g, benign.features, benign.labels, acfg);
  const auto hit = b.successful_indices();
  if (hit.empty()) throw InsufficientSamplesError("sweep: the attack produced no successful adversarial samples");
  Tensor adv(batched(hit.size(), benign.sample_shape()));
  for (std::size_t i = 0; i < hit.size(); ++i) {
    const auto r = b.perturbed.row(hit[i]);
    std::copy(r.begin(), r.end(), adv.row(i).begin());
  }
  SweepOutcome out;
  out.result = sweep_spread(g, benign.features, adv, grid, probe);
  probe.spread = out.result.best_spread;
  out.scores = {sensitivities(g, benign.features, probe, validation_stream),
                sensitivities(g, adv, probe, validation_stream)};

  std::string csv = run.comment() + "spread,auc_ps,auc_as,auc_combined\n";
  char buf[160];
  for (const auto& r : out.result.curve) {
    std::snprintf(buf, sizeof buf, "%.6g,%.6f,%.6f,%.6f\n", r.spread, r.auc_ps, r.auc_as, r.auc_combined);
    csv += buf;
  }
  write_bytes(run.out / "sweep.csv", csv);
  return out;
}

int cmd_sweep(const Run& run) {
  const auto t0 = std::chrono::steady_clock::now();
  const TrainedModel m = load_model(run);
  const Split s = load_data(run);
  check_input_shape(m, s.holdout);
  const auto o = run_sweep(run, m.graph, s, probe_from(run));
  json j = run.stamp();
  j["best_spread"] = o.result.best_spread;
  j["curve"] = json::array();
  for (const auto& r : o.result.curve) {
    j["curve"].push_back(json{{"spread", r.spread}, {"auc_ps", r.auc_ps}, {"auc_as", r.auc_as}, {"auc_combined", r.auc_combined}});
  }
  write_json(run.out / "sweep.json", j);
  write_timing(run, "sweep", {{"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}});
  std::cout << "sweep: best spread " << o.result.best_spread << "\n";
  return exit_ok;
}

std::optional<Side> side_from(const Run& run, const std::string& field) {
  if (!find(run.config, field)) return std::nullopt;
  return get<Side>(run.config, field);
}

int cmd_calibrate(const Run& run) {
  const auto t0 = std::chrono::steady_clock::now();
  const TrainedModel m = load_model(run);
  const Split s = load_data(run);
  check_input_shape(m, s.calibrate);
  NoiseProbe probe = probe_from(run);
  const double fpr = get_or(run.config, "fpr", 0.05);
  if (!(fpr > 0.0 && fpr < 1.0)) throw ConfigError("fpr: must lie in (0, 1)");
  CalibrationOptions opts;
  opts.ps_side = side_from(run, "sides.ps");
  opts.as_side = side_from(run, "sides.as");
  std::optional<SweepOutcome> sweep;
  if (find(run.config, "sweep")) {
    sweep = run_sweep(run, m.graph, s, probe);
    probe.spread = sweep->result.best_spread;
  }
  const auto c = calibrate(m.graph, s.calibrate.features, s.holdout.features, probe, fpr,
                           sweep ? &sweep->scores : nullptr, opts);
  json j = run.stamp();
  j["calibration"] = c;
  if (sweep) j["best_spread"] = sweep->result.best_spread;
  write_json(run.out / "calibration.json", j);
  write_timing(run, "calibrate", {{"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}});
  std::cout << "calibrate: hold-out FPR ps " << c.holdout_fpr_ps << " as " << c.holdout_fpr_as << " combined "
            << c.holdout_fpr_combined << "\n";
  return exit_ok;
}

int cmd_detect(const Run& run) {
  const auto t0 = std::chrono::steady_clock::now();
  const TrainedModel m = load_model(run);
  const DetectorCalibration c = load_calibration(run);
  const auto input = get_or<std::string>(run.config, "detect.input", "adversarial");
  Tensor x;
  std::uint64_t stream = detect_stream;
  if (input == "adversarial") {
    const auto p = input_path(run, "adversarial_path", run.out / "adversarial.bin");
    try {
      std::ifstream in(p, std::ios::binary);
      const std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
      x = load_adversarial(bytes).perturbed;
    } catch (const Error& e) {
      throw ArtifactError("adversarial_path: " + std::string(e.what()));
    }
  } else {
    const Split s = load_data(run);
    x = part(s, input, "detect.input").features;
    // Same noise stream as calibration, so detect on the hold-out repeats it.
    if (input == "holdout") stream = holdout_stream;
  }
  const std::size_t n = x.shape().empty() ? 0 : x.dim(0);
  if (n == 0) throw InsufficientSamplesError("detect: no input samples");
  if (Shape(x.shape().begin() + 1, x.shape().end()) != m.spec.input_shape) {
    throw ConfigError("detect.input: sample shape does not match the model input " + to_string(m.spec.input_shape));
  }

  std::ofstream out(run.out / "verdicts.csv", std::ios::binary);
  if (!out) throw ConfigError("out: cannot write verdicts.csv");
  out << run.comment() << "id,ps,as,verdict\n";
  std::size_t flagged = 0;
  char buf[128];
  for (std::size_t i = 0; i < n; ++i) {
    const auto v = detect(m.graph, slice_row(x, i), c, stream + i);
    flagged += v.adversarial;
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%s\n", i, v.pair.ps, v.pair.as_, v.adversarial ? "adversarial" : "benign");
    out << buf << std::flush;
  }
  json summary = run.stamp();
  summary["input"] = input;
  summary["n"] = n;
  summary["flagged"] = flagged;
  summary["flag_rate"] = static_cast<double>(flagged) / static_cast<double>(n);
  write_json(run.out / "detect_summary.json", summary);
  write_timing(run, "detect", {{"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}});
  std::cout << "detect: flagged " << flagged << " of " << n << "\n";
  return exit_ok;
}

GridConfig grid_from(const Run& run) {
  GridConfig g;
  g.detectors = get_or(run.config, "evaluate.detectors", g.detectors);
  g.repeats = get_or(run.config, "evaluate.repeats", g.repeats);
  g.samples = get_or(run.config, "evaluate.samples", g.samples);
  g.squeezers = get_or(run.config, "evaluate.squeezers", g.squeezers);
  g.sides = get_or(run.config, "evaluate.sides", g.sides);
  g.seed = derive_seed(run.seed, "evaluate");
  const auto attacks = get<json>(run.config, "evaluate.attacks");
  if (!attacks.is_array() || attacks.empty()) throw ConfigError("evaluate.attacks: must be a non-empty array");
  for (std::size_t i = 0; i < attacks.size(); ++i) {
    const std::string field = "evaluate.attacks." + std::to_string(i);
    GridAttack a;
    try {
      a.config = attacks[i].get<AttackConfig>();
      a.name = attacks[i].value("name", std::string());
    } catch (const std::exception& e) {
      throw ConfigError(field + ": " + e.what());
    }
    g.attacks.push_back(a);
  }
  for (const auto& d : g.detectors) {
    if (std::find(detector_names().begin(), detector_names().end(), d) == detector_names().end()) {
      std::string valid;
      for (const auto& n : detector_names()) valid += (valid.empty() ? "" : ", ") + n;
      throw ConfigError("evaluate.detectors: unknown detector '" + d + "' (valid: " + valid + ")");
    }
  }
  return g;
}

int cmd_evaluate(const Run& run) {
  const auto t0 = std::chrono::steady_clock::now();
  const GridConfig grid = grid_from(run);
  const TrainedModel m = load_model(run);
  const Split s = load_data(run);
  check_input_shape(m, s.test);
  const NoiseProbe probe = probe_from(run);
  CalibrationOptions opts;
  opts.ps_side = side_from(run, "sides.ps");
  opts.as_side = side_from(run, "sides.as");
  std::vector<DetectorCalibration> cals;
  for (double f : report_fprs) cals.push_back(calibrate(m.graph, s.calibrate.features, s.holdout.features, probe, f, nullptr, opts));
  const EvalReport r = run_grid(m.graph, s.test, cals, grid);

  std::ostringstream csv;
  write_csv(csv, r);
  write_bytes(run.out / "report.csv", csv.str());
  json j = report_json(r);
  j["config_hash"] = run.hash;
  j["seed"] = run.seed;
  j["probe"] = probe;
  if (get_or(run.config, "evaluate.fpr_curve", true)) {
    const auto ok = correct_indices(m.graph, s.test);
    const Dataset benign = s.test.subset(ok, "fpr-curve");
    j["fpr_curve"] = json::array();
    const auto scores = sensitivities(m.graph, benign.features, probe, detect_stream);
    for (const auto& row : fpr_curve(cals, scores)) {
      j["fpr_curve"].push_back(
          json{{"target", row.target}, {"fpr", row.fpr}, {"fpr_ps", row.fpr_ps}, {"fpr_as", row.fpr_as}});
    }
  }
  write_json(run.out / "report.json", j);
  json timing{{"cells", r.timing}};
  timing["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_timing(run, "report", timing);
  std::cout << "evaluate: " << r.rows.size() << " rows\n";
  return exit_ok;
}

// ------------------------------------------------------------ driver

Run prepare(const std::string& config_path, std::optional<std::uint64_t> seed, const std::string& out_flag) {
  Run run;
  if (config_path.empty()) throw ConfigError("--config: required");
  if (!fs::exists(config_path)) throw ConfigError("--config: file '" + config_path + "' does not exist");
  try {
    std::ifstream in(config_path);
    run.config = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("--config: " + std::string(e.what()));
  }
  if (!run.config.is_object()) throw ConfigError("--config: top level must be a JSON object");
  run.base = fs::absolute(config_path).parent_path();
  if (seed) run.config["seed"] = *seed;
  run.seed = get<std::uint64_t>(run.config, "seed");
  std::string out = out_flag;
  if (out.empty()) {
    if (!find(run.config, "out")) throw ConfigError("out: required (config field or --out)");
    out = get<std::string>(run.config, "out");
    if (fs::path(out).is_relative()) out = (run.base / out).string();
  }
  run.out = out;
  // The output location does not change results, so it stays out of the hash.
  json hashed = run.config;
  hashed.erase("out");
  run.hash = fnv_hex(hashed.dump());
  fs::create_directories(run.out);
  return run;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Noise-probe adversarial input detector"};
  app.require_subcommand(1);
  std::string config_path, out;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config_path, "JSON run configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "global seed (overrides the config)");
  app.add_option("--out", out, "output directory (overrides the config)");
  using Handler = int (*)(const Run&);
  const std::vector<std::pair<std::string, Handler>> commands{
      {"train", cmd_train},         {"attack", cmd_attack}, {"calibrate", cmd_calibrate},
      {"detect", cmd_detect},       {"evaluate", cmd_evaluate}, {"sweep", cmd_sweep}};
  for (const auto& [name, fn] : commands) app.add_subcommand(name)->fallthrough();
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return exit_config;
  }
  const std::string sub = app.get_subcommands().front()->get_name();
  try {
    const Run run = prepare(config_path, seed, out);
    for (const auto& [name, fn] : commands) {
      if (name == sub) return fn(run);
    }
    return exit_internal;
  } catch (const ConfigError& e) {
    std::cerr << "pasa " << sub << ": config error: " << e.what() << "\n";
    return exit_config;
  } catch (const ArtifactError& e) {
    std::cerr << "pasa " << sub << ": cannot load artifact: " << e.what() << "\n";
    return exit_artifact;
  } catch (const NumericError& e) {
    std::cerr << "pasa " << sub << ": " << e.what() << "\n";
    return exit_diverged;
  } catch (const InsufficientSamplesError& e) {
    std::cerr << "pasa " << sub << ": insufficient samples: " << e.what() << "\n";
    return exit_samples;
  } catch (const ArgumentError& e) {
    std::cerr << "pasa " << sub << ": config error: " << e.what() << "\n";
    return exit_config;
  } catch (const ShapeError& e) {
    std::cerr << "pasa " << sub << ": config error: " << e.what() << "\n";
    return exit_config;
  } catch (const FormatError& e) {
    std::cerr << "pasa " << sub << ": config error: " << e.what() << "\n";
    return exit_config;
  } catch (const json::exception& e) {
    std::cerr << "pasa " << sub << ": config error: " << e.what() << "\n";
    return exit_config;
  } catch (const std::exception& e) {
    std::cerr << "pasa " << sub << ": internal error: " << e.what() << "\n";
    return exit_internal;
  }
}
