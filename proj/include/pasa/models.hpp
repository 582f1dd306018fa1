#pragma once

// Reference classifiers (MLP, LeNet-5, single linear layer + activation),
// a seeded minibatch trainer, argmax prediction and a versioned weight file.

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pasa/data.hpp"
#include "pasa/error.hpp"
#include "pasa/json_enum.hpp"
#include "pasa/graph.hpp"
#include "pasa/random.hpp"
#include "pasa/tensor.hpp"

namespace pasa {

enum class Architecture { mlp, lenet, single_layer };
enum class Activation { identity, relu, sigmoid, tanh };

PASA_JSON_ENUM(Architecture, {{Architecture::mlp, "mlp"},
                                            {Architecture::lenet, "lenet"},
                                            {Architecture::single_layer, "single_layer"}})
PASA_JSON_ENUM(Activation, {{Activation::identity, "identity"},
                                          {Activation::relu, "relu"},
                                          {Activation::sigmoid, "sigmoid"},
                                          {Activation::tanh, "tanh"}})

struct ModelSpec {
  Architecture architecture = Architecture::mlp;
  std::vector<std::size_t> hidden;              // mlp only
  Activation activation = Activation::identity;  // single_layer output H
  Shape input_shape;
  std::size_t class_count = 2;

  static ModelSpec mlp(Shape input, std::vector<std::size_t> hidden, std::size_t k) {
    return {Architecture::mlp, std::move(hidden), Activation::identity, std::move(input), k};
  }
  static ModelSpec lenet(Shape input, std::size_t k = 10) {
    return {Architecture::lenet, {}, Activation::identity, std::move(input), k};
  }
  static ModelSpec single_layer(std::size_t dims, std::size_t k, Activation h) {
    return {Architecture::single_layer, {}, h, Shape{dims}, k};
  }

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

inline void to_json(nlohmann::json& j, const ModelSpec& s) {
  j = {{"architecture", s.architecture}, {"hidden", s.hidden}, {"activation", s.activation},
       {"input_shape", s.input_shape}, {"class_count", s.class_count}};
}

inline void from_json(const nlohmann::json& j, ModelSpec& s) {
  s.architecture = j.at("architecture").get<Architecture>();
  s.hidden = j.value("hidden", std::vector<std::size_t>{});
  s.activation = j.value("activation", Activation::identity);
  s.input_shape = j.at("input_shape").get<Shape>();
  s.class_count = j.at("class_count").get<std::size_t>();
}

enum class Optimizer { sgd_momentum, adam };
PASA_JSON_ENUM(Optimizer, {{Optimizer::sgd_momentum, "sgd"}, {Optimizer::adam, "adam"}})

struct TrainConfig {
  Optimizer optimizer = Optimizer::adam;
  double learning_rate = 0.001;
  std::size_t epochs = 60;
  std::size_t batch = 64;
  std::uint64_t seed = 0;
  double momentum = 0.9;
  double weight_decay = 0.0;
};

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"optimizer", c.optimizer}, {"lr", c.learning_rate}, {"epochs", c.epochs},
       {"batch", c.batch}, {"seed", c.seed}, {"momentum", c.momentum},
       {"weight_decay", c.weight_decay}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  TrainConfig d;
  c.optimizer = j.value("optimizer", d.optimizer);
  c.learning_rate = j.value("lr", d.learning_rate);
  c.epochs = j.value("epochs", d.epochs);
  c.batch = j.value("batch", d.batch);
  c.seed = j.value("seed", d.seed);
  c.momentum = j.value("momentum", d.momentum);
  c.weight_decay = j.value("weight_decay", d.weight_decay);
}

struct TrainingRecord {
  std::size_t epochs = 0;
  std::uint64_t seed = 0;
  double accuracy = 0.0;  // on the validation set passed to train()
  double final_loss = 0.0;
};

struct TrainedModel {
  ModelSpec spec;
  Graph graph;
  TrainingRecord record;
};

// ---------------------------------------------------------------- build

namespace detail {

inline Tensor kaiming_uniform(Shape shape, std::size_t fan_in, double gain, Rng& rng) {
  const double bound = gain * std::sqrt(3.0 / static_cast<double>(fan_in));
  std::uniform_real_distribution<double> u(-bound, bound);
  Tensor t(std::move(shape));
  for (auto& v : t.data()) v = u(rng);
  return t;
}

inline void validate(const ModelSpec& s) {
  if (s.class_count < 2) throw ArgumentError("model spec: class_count must be at least 2");
  if (s.input_shape.empty()) throw ArgumentError("model spec: empty input shape");
  for (auto d : s.input_shape) {
    if (d == 0) throw ArgumentError("model spec: zero-length input dimension");
  }
  for (auto h : s.hidden) {
    if (h == 0) throw ArgumentError("model spec: zero-width hidden layer");
  }
}

}  // namespace detail

// Builds the graph for `spec` with Kaiming-uniform weights (gain sqrt 2 for
// layers feeding a relu, 1 otherwise) and zero biases.
inline Graph build_graph(const ModelSpec& spec, std::uint64_t seed) {
  detail::validate(spec);
  Rng rng(derive_seed(seed, "init"));
  const double relu_gain = std::sqrt(2.0);
  Graph g(spec.input_shape);
  const std::size_t k = spec.class_count;
  switch (spec.architecture) {
    case Architecture::mlp: {
      NodeId x = g.input();
      std::size_t width = shape_size(spec.input_shape);
      for (std::size_t i = 0; i < spec.hidden.size(); ++i) {
        const std::string p = "fc" + std::to_string(i + 1);
        g.add_parameter(p + ".weight", detail::kaiming_uniform({spec.hidden[i], width}, width, relu_gain, rng));
        g.add_parameter(p + ".bias", Tensor({spec.hidden[i]}, 0.0));
        x = g.relu(g.affine(x, p + ".weight", p + ".bias"));
        width = spec.hidden[i];
      }
      g.add_parameter("out.weight", detail::kaiming_uniform({k, width}, width, 1.0, rng));
      g.add_parameter("out.bias", Tensor({k}, 0.0));
      g.affine(x, "out.weight", "out.bias");
      break;
    }
    case Architecture::lenet: {
      Shape in = spec.input_shape;
      NodeId x = g.input();
      if (in.size() == 2) {
        in = {1, in[0], in[1]};
        x = g.reshape(x, in);
      }
      if (in.size() != 3) throw ArgumentError("lenet: input must be (H,W) or (C,H,W)");
      const std::size_t c = in[0];
      g.add_parameter("conv1.weight", detail::kaiming_uniform({6, c, 5, 5}, c * 25, relu_gain, rng));
      g.add_parameter("conv1.bias", Tensor({6}, 0.0));
      x = g.max_pool2d(g.relu(g.conv2d(x, "conv1.weight", "conv1.bias")), 2, 2);
      g.add_parameter("conv2.weight", detail::kaiming_uniform({16, 6, 5, 5}, 150, relu_gain, rng));
      g.add_parameter("conv2.bias", Tensor({16}, 0.0));
      x = g.max_pool2d(g.relu(g.conv2d(x, "conv2.weight", "conv2.bias")), 2, 2);
      x = g.flatten(x);
      const std::size_t flat = g.output_size();
      g.add_parameter("fc1.weight", detail::kaiming_uniform({120, flat}, flat, relu_gain, rng));
      g.add_parameter("fc1.bias", Tensor({120}, 0.0));
      x = g.relu(g.affine(x, "fc1.weight", "fc1.bias"));
      g.add_parameter("fc2.weight", detail::kaiming_uniform({84, 120}, 120, relu_gain, rng));
      g.add_parameter("fc2.bias", Tensor({84}, 0.0));
      x = g.relu(g.affine(x, "fc2.weight", "fc2.bias"));
      g.add_parameter("out.weight", detail::kaiming_uniform({k, 84}, 84, 1.0, rng));
      g.add_parameter("out.bias", Tensor({k}, 0.0));
      g.affine(x, "out.weight", "out.bias");
      break;
    }
    case Architecture::single_layer: {
      const std::size_t d = shape_size(spec.input_shape);
      g.add_parameter("w", detail::kaiming_uniform({k, d}, d, 1.0, rng));
      NodeId z = g.affine(g.input(), "w");
      switch (spec.activation) {
        case Activation::identity: break;
        case Activation::relu: g.relu(z); break;
        case Activation::sigmoid: g.sigmoid(z); break;
        case Activation::tanh: g.tanh(z); break;
      }
      break;
    }
  }
  return g;
}

inline TrainedModel make_model(const ModelSpec& spec, std::uint64_t seed) {
  return TrainedModel{spec, build_graph(spec, seed), TrainingRecord{0, seed, 0.0, 0.0}};
}

// Single-layer model F(x) = H(W x) with the given (k,d) weight matrix.
inline TrainedModel make_single_layer(const Tensor& weights, Activation h) {
  if (weights.rank() != 2) throw ShapeError("single layer: weights must be (k,d)");
  ModelSpec spec = ModelSpec::single_layer(weights.dim(1), weights.dim(0), h);
  TrainedModel m = make_model(spec, 0);
  m.graph.parameter("w") = weights;
  return m;
}

// ---------------------------------------------------------------- predict

struct Prediction {
  Tensor logits;  // (N,k)
  std::vector<std::size_t> labels;
};

// First index of the maximum, so ties resolve toward the lowest class.
inline std::size_t argmax(std::span<const double> row) {
  std::size_t best = 0;
  for (std::size_t j = 1; j < row.size(); ++j) {
    if (row[j] > row[best]) best = j;
  }
  return best;
}

inline Prediction predict(const Graph& graph, const Tensor& batch) {
  const auto [n, single] = graph.batch_of(batch);
  Evaluation ev = graph.evaluate(batch);
  Prediction p;
  p.logits = std::move(ev.values.back());
  for (std::size_t s = 0; s < n; ++s) p.labels.push_back(argmax(p.logits.row(s)));
  return p;
}

inline Prediction predict(const TrainedModel& m, const Tensor& batch) { return predict(m.graph, batch); }

// Chunked prediction to bound memory on large sets.
inline std::vector<std::size_t> predict_labels(const Graph& graph, const Tensor& batch,
                                               std::size_t chunk = 256) {
  const auto [n, single] = graph.batch_of(batch);
  if (single) return predict(graph, batch).labels;
  std::vector<std::size_t> out;
  out.reserve(n);
  for (std::size_t s = 0; s < n; s += chunk) {
    std::vector<std::size_t> idx(std::min(chunk, n - s));
    std::iota(idx.begin(), idx.end(), s);
    auto p = predict(graph, gather_rows(batch, idx));
    out.insert(out.end(), p.labels.begin(), p.labels.end());
  }
  return out;
}

inline double accuracy(const Graph& graph, const Dataset& d) {
  if (d.size() == 0) return 0.0;
  auto labels = predict_labels(graph, d.features);
  std::size_t hit = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hit += labels[i] == d.labels[i];
  return static_cast<double>(hit) / static_cast<double>(labels.size());
}

// ---------------------------------------------------------------- train

// Minibatch training with softmax cross-entropy. Bit-reproducible for a
// given seed on one platform; aborts with NumericError on divergence.
inline TrainedModel train(const ModelSpec& spec, const Dataset& train_set, const Dataset& valid_set,
                          const TrainConfig& cfg) {
  TrainedModel m = make_model(spec, cfg.seed);
  if (train_set.sample_shape() != spec.input_shape) {
    throw ShapeError("train: dataset samples are " + to_string(train_set.sample_shape()) +
                     " but the model expects " + to_string(spec.input_shape));
  }
  if (cfg.batch == 0) throw ArgumentError("train: batch size must be positive");
  for (auto y : train_set.labels) {
    if (y >= spec.class_count) throw ArgumentError("train: label " + std::to_string(y) + " out of range");
  }

  auto& params = m.graph.parameters();
  std::map<std::string, Tensor> m1, m2;
  for (const auto& [name, t] : params) {
    m1.emplace(name, Tensor(t.shape(), 0.0));
    m2.emplace(name, Tensor(t.shape(), 0.0));
  }
  Rng rng(derive_seed(cfg.seed, "train"));
  const std::size_t n = train_set.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  const double b1 = 0.9, b2 = 0.999, eps = 1e-8;
  std::size_t step = 0;
  double last_loss = 0.0;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += cfg.batch) {
      const std::size_t len = std::min(cfg.batch, n - start);
      std::span<const std::size_t> idx(order.data() + start, len);
      std::vector<std::size_t> labels;
      labels.reserve(len);
      for (auto i : idx) labels.push_back(train_set.labels[i]);
      LossGradients lg;
      try {
        lg = loss_gradients(m.graph, gather_rows(train_set.features, idx), labels);
      } catch (const NumericError& e) {
        throw NumericError("train: diverged in epoch " + std::to_string(epoch + 1) + " (" + e.what() + ")");
      }
      epoch_loss += lg.loss * static_cast<double>(len);
      ++step;
      for (auto& [name, p] : params) {
        Tensor& g = lg.params.at(name);
        auto& v1 = m1.at(name);
        auto& v2 = m2.at(name);
        for (std::size_t i = 0; i < p.size(); ++i) {
          const double gi = g[i] + cfg.weight_decay * p[i];
          if (cfg.optimizer == Optimizer::adam) {
            v1[i] = b1 * v1[i] + (1 - b1) * gi;
            v2[i] = b2 * v2[i] + (1 - b2) * gi * gi;
            const double mh = v1[i] / (1 - std::pow(b1, static_cast<double>(step)));
            const double vh = v2[i] / (1 - std::pow(b2, static_cast<double>(step)));
            p[i] -= cfg.learning_rate * mh / (std::sqrt(vh) + eps);
          } else {
            v1[i] = cfg.momentum * v1[i] + gi;
            p[i] -= cfg.learning_rate * v1[i];
          }
        }
        if (!p.all_finite()) {
          throw NumericError("train: parameter '" + name + "' became non-finite in epoch " +
                             std::to_string(epoch + 1));
        }
      }
    }
    last_loss = epoch_loss / static_cast<double>(n);
    if (!std::isfinite(last_loss)) {
      throw NumericError("train: loss became non-finite in epoch " + std::to_string(epoch + 1));
    }
  }
  m.record.epochs = cfg.epochs;
  m.record.seed = cfg.seed;
  m.record.final_loss = last_loss;
  m.record.accuracy = valid_set.size() ? accuracy(m.graph, valid_set) : 0.0;
  return m;
}

// ---------------------------------------------------------------- persistence
//
// Layout (little-endian):
//   8 bytes  magic "PASAWGT\0"
//   u32      format version
//   u64      header length L
//   L bytes  JSON header: spec, record, ordered [name, shape] list
//   f64[]    parameter payloads in header order

inline constexpr char weight_magic[8] = {'P', 'A', 'S', 'A', 'W', 'G', 'T', '\0'};
inline constexpr std::uint32_t weight_format_version = 1;

namespace detail {

template <typename T>
void put_le(std::string& out, T v) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  const U bits = std::bit_cast<U>(v);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((bits >> (8 * i)) & 0xff));
}

template <typename T>
T get_le(std::string_view in, std::size_t& off, const char* what) {
  using U = std::conditional_t<sizeof(T) == 8, std::uint64_t, std::uint32_t>;
  if (off + sizeof(U) > in.size()) throw FormatError(std::string("weight file truncated while reading ") + what);
  U bits = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) bits |= U(static_cast<unsigned char>(in[off + i])) << (8 * i);
  off += sizeof(U);
  return std::bit_cast<T>(bits);
}

}  // namespace detail

// `meta` is stored verbatim in the header (the CLI puts its config hash
// there); load() hands it back through `meta_out`.
inline std::string save(const TrainedModel& m, const nlohmann::json& meta = nullptr) {
  nlohmann::json header;
  if (!meta.is_null()) header["meta"] = meta;
  header["spec"] = m.spec;
  header["record"] = {{"epochs", m.record.epochs}, {"seed", m.record.seed},
                      {"accuracy", m.record.accuracy}, {"final_loss", m.record.final_loss}};
  header["params"] = nlohmann::json::array();
  for (const auto& [name, t] : m.graph.parameters()) header["params"].push_back({name, t.shape()});
  const std::string h = header.dump();

  std::string out(weight_magic, weight_magic + 8);
  detail::put_le<std::uint32_t>(out, weight_format_version);
  detail::put_le<std::uint64_t>(out, h.size());
  out += h;
  for (const auto& [name, t] : m.graph.parameters()) {
    for (double v : t.data()) detail::put_le<double>(out, v);
  }
  return out;
}

inline TrainedModel load(std::string_view bytes, nlohmann::json* meta_out = nullptr) {
  if (bytes.size() < 8 || std::memcmp(bytes.data(), weight_magic, 8) != 0) {
    throw FormatError("weight file: bad magic bytes");
  }
  std::size_t off = 8;
  const auto version = detail::get_le<std::uint32_t>(bytes, off, "version");
  if (version > weight_format_version) {
    throw FormatError("weight file: format version " + std::to_string(version) +
                      " is newer than supported version " + std::to_string(weight_format_version));
  }
  if (version == 0) throw FormatError("weight file: invalid format version 0");
  const auto hlen = detail::get_le<std::uint64_t>(bytes, off, "header length");
  if (off + hlen > bytes.size()) throw FormatError("weight file truncated in header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.substr(off, hlen));
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("weight file: corrupt header: ") + e.what());
  }
  off += hlen;
  if (meta_out) *meta_out = header.value("meta", nlohmann::json());

  TrainedModel m;
  try {
    m.spec = header.at("spec").get<ModelSpec>();
    const auto& r = header.at("record");
    m.record = {r.at("epochs").get<std::size_t>(), r.at("seed").get<std::uint64_t>(),
                r.at("accuracy").get<double>(), r.at("final_loss").get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("weight file: bad header field: ") + e.what());
  }  catch (const ArgumentError& e) {
    throw FormatError(std::string("weight file: bad header field: ") + e.what());
  }
  m.graph = build_graph(m.spec, 0);
  if (!header.contains("params") || !header["params"].is_array()) {
    throw FormatError("weight file: header has no parameter list");
  }
  const auto& listed = header["params"];
  if (listed.size() != m.graph.parameters().size()) {
    throw FormatError("weight file: lists " + std::to_string(listed.size()) + " parameters, spec needs " +
                      std::to_string(m.graph.parameters().size()));
  }
  for (const auto& entry : listed) {
    std::string name;
    Shape shape;
    try {
      name = entry.at(0).get<std::string>();
      shape = entry.at(1).get<Shape>();
    } catch (const nlohmann::json::exception& e) {
      throw FormatError(std::string("weight file: bad parameter entry: ") + e.what());
    }
    Tensor* t = nullptr;
    try {
      t = &m.graph.parameter(name);
    } catch (const ArgumentError&) {
      throw FormatError("weight file: unexpected parameter '" + name + "'");
    }
    if (t->shape() != shape) {
      throw FormatError("weight file: parameter '" + name + "' has shape " + to_string(shape) +
                        ", spec expects " + to_string(t->shape()));
    }
    for (auto& v : t->data()) v = detail::get_le<double>(bytes, off, "parameter data");
    if (!t->all_finite()) throw FormatError("weight file: parameter '" + name + "' is not finite");
  }
  if (off != bytes.size()) throw FormatError("weight file: trailing bytes after payload");
  return m;
}

inline void save_file(const TrainedModel& m, const std::string& path, const nlohmann::json& meta = nullptr) {
  const std::string bytes = save(m, meta);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write '" + path + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
}

inline TrainedModel load_file(const std::string& path, nlohmann::json* meta_out = nullptr) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open '" + path + "'");
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return load(bytes, meta_out);
}

}  // namespace pasa
