#pragma once

// Dataset ingestion: MNIST-style IDX files (optionally gzip-compressed),
// seeded Gaussian blobs, schema-driven tabular CSV, and stratified splits.

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iterator>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "pasa/error.hpp"
#include "pasa/random.hpp"
#include "pasa/tensor.hpp"

namespace pasa {

struct Dataset {
  Tensor features;  // (n, sample shape...)
  std::vector<std::size_t> labels;
  std::vector<double> feature_min;  // per feature, over the n samples
  std::vector<double> feature_max;
  std::string provenance;

  std::size_t size() const noexcept { return labels.size(); }

  Shape sample_shape() const {
    return Shape(features.shape().begin() + 1, features.shape().end());
  }

  std::size_t class_count() const {
    return labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  }

  Tensor sample(std::size_t i) const { return slice_row(features, i); }

  Dataset subset(std::span<const std::size_t> idx, std::string tag = {}) const;
};

// Recomputes per-feature min/max from the feature tensor.
inline void record_range(Dataset& d) {
  const std::size_t n = d.features.dim(0), f = d.features.row_size();
  d.feature_min.assign(f, std::numeric_limits<double>::infinity());
  d.feature_max.assign(f, -std::numeric_limits<double>::infinity());
  for (std::size_t s = 0; s < n; ++s) {
    auto r = d.features.row(s);
    for (std::size_t j = 0; j < f; ++j) {
      d.feature_min[j] = std::min(d.feature_min[j], r[j]);
      d.feature_max[j] = std::max(d.feature_max[j], r[j]);
    }
  }
}

inline Dataset make_dataset(Tensor features, std::vector<std::size_t> labels, std::string provenance) {
  if (features.rank() < 2 || features.dim(0) != labels.size()) {
    throw ShapeError("dataset: " + std::to_string(labels.size()) + " labels for features " +
                     to_string(features.shape()));
  }
  Dataset d{std::move(features), std::move(labels), {}, {}, std::move(provenance)};
  record_range(d);
  return d;
}

inline Dataset Dataset::subset(std::span<const std::size_t> idx, std::string tag) const {
  std::vector<std::size_t> lab;
  lab.reserve(idx.size());
  for (auto i : idx) {
    if (i >= size()) throw ArgumentError("dataset: index " + std::to_string(i) + " out of range");
    lab.push_back(labels[i]);
  }
  if (idx.empty()) {
    Dataset d;
    d.provenance = provenance + (tag.empty() ? "" : "/" + tag);
    return d;
  }
  return make_dataset(gather_rows(features, idx), std::move(lab),
                      provenance + (tag.empty() ? "" : "/" + tag));
}

// ---------------------------------------------------------------- IDX

namespace detail {

inline std::vector<unsigned char> read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open '" + path + "'");
  return std::vector<unsigned char>(std::istreambuf_iterator<char>(in), {});
}

inline std::vector<unsigned char> gunzip(const std::vector<unsigned char>& raw, const std::string& path) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw FormatError("zlib init failed");
  zs.next_in = const_cast<Bytef*>(raw.data());
  zs.avail_in = static_cast<uInt>(raw.size());
  std::vector<unsigned char> out;
  std::array<unsigned char, 1 << 16> buf;
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = buf.data();
    zs.avail_out = static_cast<uInt>(buf.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw FormatError("'" + path + "': corrupt or truncated gzip stream");
    }
    out.insert(out.end(), buf.data(), buf.data() + (buf.size() - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw FormatError("'" + path + "': truncated gzip stream");
    }
  }
  inflateEnd(&zs);
  return out;
}

inline std::vector<unsigned char> read_maybe_gzip(const std::string& path) {
  auto raw = read_file(path);
  if (raw.size() >= 2 && raw[0] == 0x1f && raw[1] == 0x8b) return gunzip(raw, path);
  return raw;
}

inline std::uint32_t be32(const std::vector<unsigned char>& b, std::size_t off,
                          const std::string& path, const char* field) {
  if (off + 4 > b.size()) {
    throw FormatError("'" + path + "': truncated header while reading field '" + field + "'");
  }
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

inline std::string hex32(std::uint32_t v) {
  std::ostringstream os;
  os << "0x" << std::hex << std::setw(8) << std::setfill('0') << v;
  return os.str();
}

inline void put_be32(std::vector<unsigned char>& b, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) b.push_back(static_cast<unsigned char>((v >> s) & 0xff));
}

}  // namespace detail

inline constexpr std::uint32_t idx_images_magic = 0x00000803;
inline constexpr std::uint32_t idx_labels_magic = 0x00000801;

// Parses an IDX image/label pair. Pixels are scaled to [0,1] by /255.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  const auto img = detail::read_maybe_gzip(images_path);
  const auto lab = detail::read_maybe_gzip(labels_path);

  const auto im = detail::be32(img, 0, images_path, "magic");
  if (im != idx_images_magic) {
    throw FormatError("'" + images_path + "': field 'magic' is " + detail::hex32(im) +
                      ", expected " + detail::hex32(idx_images_magic));
  }
  const auto lm = detail::be32(lab, 0, labels_path, "magic");
  if (lm != idx_labels_magic) {
    throw FormatError("'" + labels_path + "': field 'magic' is " + detail::hex32(lm) +
                      ", expected " + detail::hex32(idx_labels_magic));
  }
  const std::size_t n = detail::be32(img, 4, images_path, "count");
  const std::size_t rows = detail::be32(img, 8, images_path, "rows");
  const std::size_t cols = detail::be32(img, 12, images_path, "cols");
  const std::size_t nl = detail::be32(lab, 4, labels_path, "count");
  if (n == 0 || rows == 0 || cols == 0) throw FormatError("'" + images_path + "': zero dimension");
  if (n != nl) {
    throw FormatError("image count " + std::to_string(n) + " does not match label count " +
                      std::to_string(nl));
  }
  const std::size_t pixels = n * rows * cols;
  if (img.size() < 16 + pixels) {
    throw FormatError("'" + images_path + "': truncated payload (" + std::to_string(img.size() - 16) +
                      " of " + std::to_string(pixels) + " bytes)");
  }
  if (lab.size() < 8 + n) {
    throw FormatError("'" + labels_path + "': truncated payload (" + std::to_string(lab.size() - 8) +
                      " of " + std::to_string(n) + " bytes)");
  }
  std::vector<double> data(pixels);
  for (std::size_t i = 0; i < pixels; ++i) data[i] = static_cast<double>(img[16 + i]) / 255.0;
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) labels[i] = lab[8 + i];
  return make_dataset(Tensor(Shape{n, rows, cols}, std::move(data)), std::move(labels),
                      "idx:" + images_path);
}

// Writes an uncompressed IDX pair; pixels are quantised with round(x*255).
inline void save_idx(const Dataset& d, const std::string& images_path, const std::string& labels_path) {
  if (d.features.rank() != 3) throw ShapeError("save_idx: features must be (n,rows,cols)");
  std::vector<unsigned char> img, lab;
  detail::put_be32(img, idx_images_magic);
  for (std::size_t a = 0; a < 3; ++a) detail::put_be32(img, static_cast<std::uint32_t>(d.features.dim(a)));
  for (double v : d.features.data()) {
    img.push_back(static_cast<unsigned char>(std::clamp(std::lround(v * 255.0), 0L, 255L)));
  }
  detail::put_be32(lab, idx_labels_magic);
  detail::put_be32(lab, static_cast<std::uint32_t>(d.size()));
  for (auto y : d.labels) lab.push_back(static_cast<unsigned char>(y));
  std::ofstream(images_path, std::ios::binary).write(reinterpret_cast<const char*>(img.data()),
                                                     static_cast<std::streamsize>(img.size()));
  std::ofstream(labels_path, std::ios::binary).write(reinterpret_cast<const char*>(lab.data()),
                                                     static_cast<std::streamsize>(lab.size()));
}

// ---------------------------------------------------------------- blobs

// Isotropic unit-variance Gaussian clusters whose centres sit `separation`
// apart on average, min-max scaled jointly into [0,1]. Labels cycle 0..k-1.
inline Dataset synth_blobs(std::size_t classes, std::size_t dims, std::size_t n,
                           double separation, std::uint64_t seed) {
  if (classes < 2) throw ArgumentError("synth_blobs: need at least 2 classes");
  if (dims == 0 || n == 0) throw ArgumentError("synth_blobs: dims and n must be positive");
  if (separation < 0) throw ArgumentError("synth_blobs: separation must be non-negative");
  Rng rng(derive_seed(seed, "synth_blobs"));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> centres(classes * dims);
  for (std::size_t c = 0; c < classes; ++c) {
    double norm = 0.0;
    for (std::size_t j = 0; j < dims; ++j) {
      centres[c * dims + j] = normal(rng);
      norm += centres[c * dims + j] * centres[c * dims + j];
    }
    // Random directions at radius separation/sqrt(2): expected pairwise gap ~ separation.
    const double scale = norm > 0 ? separation / std::sqrt(2.0 * norm) : 0.0;
    for (std::size_t j = 0; j < dims; ++j) centres[c * dims + j] *= scale;
  }
  std::vector<double> data(n * dims);
  std::vector<std::size_t> labels(n);
  for (std::size_t i = 0; i < n; ++i) {
    labels[i] = i % classes;
    for (std::size_t j = 0; j < dims; ++j) data[i * dims + j] = centres[labels[i] * dims + j] + normal(rng);
  }
  const auto [lo, hi] = std::minmax_element(data.begin(), data.end());
  const double a = *lo, span = *hi - *lo;
  for (auto& v : data) v = span > 0 ? (v - a) / span : 0.0;
  return make_dataset(Tensor(Shape{n, dims}, std::move(data)), std::move(labels),
                      "blobs:k=" + std::to_string(classes) + ",d=" + std::to_string(dims) +
                          ",sep=" + std::to_string(separation) + ",seed=" + std::to_string(seed));
}

// ---------------------------------------------------------------- tabular

struct TabularSchema {
  std::vector<std::string> numeric;
  std::vector<std::string> categorical;
  std::string label;
  // Raw label -> class id. "*" is the fallback for unlisted labels. When
  // empty, distinct labels are numbered in sorted order.
  std::map<std::string, std::size_t> collapse;

  static TabularSchema from_json(const nlohmann::json& j) {
    TabularSchema s;
    s.numeric = j.value("numeric", std::vector<std::string>{});
    s.categorical = j.value("categorical", std::vector<std::string>{});
    if (!j.contains("label")) throw ArgumentError("tabular schema: missing field 'label'");
    s.label = j.at("label").get<std::string>();
    if (j.contains("collapse")) s.collapse = j.at("collapse").get<std::map<std::string, std::size_t>>();
    return s;
  }
};

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(const std::string& name) const {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw ArgumentError("csv: column '" + name + "' not in header");
    return static_cast<std::size_t>(it - header.begin());
  }
};

namespace detail {

inline std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

// Splits one CSV record; double quotes may wrap fields containing commas.
inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace detail

inline CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ArgumentError("cannot open '" + path + "'");
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw FormatError("'" + path + "': missing header row");
  t.header = detail::split_csv_line(line);
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trim(line).empty()) continue;
    auto cells = detail::split_csv_line(line);
    if (cells.size() != t.header.size()) {
      throw FormatError("'" + path + "' line " + std::to_string(lineno) + ": " +
                        std::to_string(cells.size()) + " cells, header has " +
                        std::to_string(t.header.size()));
    }
    t.rows.push_back(std::move(cells));
  }
  return t;
}

// Statistics fitted on a training partition and replayed on every split.
struct TabularEncoder {
  TabularSchema schema;
  std::vector<double> min, max;                      // per numeric column
  std::vector<std::vector<std::string>> categories;  // per categorical column, sorted
  std::map<std::string, std::size_t> label_ids;

  std::size_t width() const {
    std::size_t w = schema.numeric.size();
    for (const auto& c : categories) w += c.size();
    return w;
  }
};

namespace detail {

inline double parse_cell(const std::string& cell, std::size_t row, const std::string& col) {
  try {
    std::size_t used = 0;
    const double v = std::stod(cell, &used);
    if (used != cell.size() || !std::isfinite(v)) throw std::invalid_argument(cell);
    return v;
  } catch (const std::exception&) {
    throw FormatError("tabular: unparseable numeric cell '" + cell + "' at row " +
                      std::to_string(row) + ", column '" + col + "'");
  }
}

}  // namespace detail

// Fits scaling ranges, category vocabularies and label ids on `rows` only.
inline TabularEncoder fit_tabular(const CsvTable& t, const TabularSchema& schema,
                                  std::span<const std::size_t> rows) {
  TabularEncoder enc;
  enc.schema = schema;
  for (const auto& name : schema.numeric) {
    const std::size_t c = t.column(name);
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (auto r : rows) {
      const double v = detail::parse_cell(t.rows.at(r)[c], r + 1, name);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    enc.min.push_back(lo);
    enc.max.push_back(hi);
  }
  for (const auto& name : schema.categorical) {
    const std::size_t c = t.column(name);
    std::set<std::string> vocab;
    for (auto r : rows) vocab.insert(t.rows.at(r)[c]);
    enc.categories.emplace_back(vocab.begin(), vocab.end());
  }
  const std::size_t lc = t.column(schema.label);
  if (schema.collapse.empty()) {
    std::set<std::string> labels;
    for (const auto& row : t.rows) labels.insert(row[lc]);
    std::size_t id = 0;
    for (const auto& l : labels) enc.label_ids[l] = id++;
  }
  return enc;
}

struct TabularEncodeStats {
  std::size_t unseen_categories = 0;
};

// Applies the encoder: min-max numeric columns (zero range -> 0), one-hot
// categoricals (unseen value -> all-zero block), mapped labels.
inline Dataset encode_tabular(const CsvTable& t, const TabularEncoder& enc,
                              TabularEncodeStats* stats = nullptr, std::string provenance = "tabular") {
  const auto& schema = enc.schema;
  const std::size_t w = enc.width(), n = t.rows.size();
  if (n == 0) throw FormatError("tabular: no data rows");
  if (w == 0) throw ArgumentError("tabular: schema selects no feature columns");
  std::vector<std::size_t> num_cols, cat_cols;
  for (const auto& name : schema.numeric) num_cols.push_back(t.column(name));
  for (const auto& name : schema.categorical) cat_cols.push_back(t.column(name));
  const std::size_t lc = t.column(schema.label);

  std::vector<double> data(n * w, 0.0);
  std::vector<std::size_t> labels(n);
  std::size_t unseen = 0;
  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = t.rows[r];
    double* out = data.data() + r * w;
    std::size_t j = 0;
    for (std::size_t k = 0; k < num_cols.size(); ++k, ++j) {
      const double v = detail::parse_cell(row[num_cols[k]], r + 1, schema.numeric[k]);
      const double range = enc.max[k] - enc.min[k];
      out[j] = range > 0 ? (v - enc.min[k]) / range : 0.0;
    }
    for (std::size_t k = 0; k < cat_cols.size(); ++k) {
      const auto& vocab = enc.categories[k];
      auto it = std::lower_bound(vocab.begin(), vocab.end(), row[cat_cols[k]]);
      if (it != vocab.end() && *it == row[cat_cols[k]]) {
        out[j + static_cast<std::size_t>(it - vocab.begin())] = 1.0;
      } else {
        ++unseen;
      }
      j += vocab.size();
    }
    const std::string& raw = row[lc];
    if (!schema.collapse.empty()) {
      auto it = schema.collapse.find(raw);
      if (it == schema.collapse.end()) it = schema.collapse.find("*");
      if (it == schema.collapse.end()) {
        throw FormatError("tabular: label '" + raw + "' at row " + std::to_string(r + 1) +
                          " has no collapse entry and no '*' fallback");
      }
      labels[r] = it->second;
    } else {
      auto it = enc.label_ids.find(raw);
      if (it == enc.label_ids.end()) {
        throw FormatError("tabular: unknown label '" + raw + "' at row " + std::to_string(r + 1));
      }
      labels[r] = it->second;
    }
  }
  if (stats) stats->unseen_categories = unseen;
  return make_dataset(Tensor(Shape{n, w}, std::move(data)), std::move(labels), std::move(provenance));
}

struct TabularDataset {
  Dataset data;
  TabularEncoder encoder;
  TabularEncodeStats stats;
};

// Loads a CSV, fitting the encoder on every row (pass `encoder` to reuse
// training statistics on a test file instead).
inline TabularDataset load_tabular(const std::string& csv_path, const TabularSchema& schema,
                                   const TabularEncoder* encoder = nullptr) {
  CsvTable t = read_csv(csv_path);
  for (const auto& c : schema.numeric) (void)t.column(c);
  for (const auto& c : schema.categorical) (void)t.column(c);
  (void)t.column(schema.label);
  TabularDataset out;
  if (encoder) {
    out.encoder = *encoder;
  } else {
    std::vector<std::size_t> all(t.rows.size());
    std::iota(all.begin(), all.end(), 0);
    out.encoder = fit_tabular(t, schema, all);
  }
  out.data = encode_tabular(t, out.encoder, &out.stats, "csv:" + csv_path);
  return out;
}

// ---------------------------------------------------------------- split

struct SplitFractions {
  double train = 1.0, calibrate = 0.0, holdout = 0.0, test = 0.0;
};

struct Split {
  std::array<std::vector<std::size_t>, 4> index;  // train, calibrate, holdout, test
  Dataset train, calibrate, holdout, test;
};

inline constexpr std::array<const char*, 4> split_names{"train", "calibrate", "holdout", "test"};

// Deterministic stratified split. Within each class the shuffled indices are
// dealt out by largest remainder, so per-class proportions are within one
// sample of the requested fractions.
inline Split split(const Dataset& d, SplitFractions f, std::uint64_t seed) {
  const std::array<double, 4> frac{f.train, f.calibrate, f.holdout, f.test};
  double total = 0.0;
  for (double x : frac) {
    if (!(x >= 0.0)) throw ArgumentError("split: fractions must be non-negative");
    total += x;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ArgumentError("split: fractions sum to " + std::to_string(total) + ", not 1");

  std::map<std::size_t, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < d.size(); ++i) by_class[d.labels[i]].push_back(i);

  Split out;
  Rng rng(derive_seed(seed, "split"));
  for (auto& [cls, idx] : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    const double n = static_cast<double>(idx.size());
    std::array<std::size_t, 4> count{};
    std::array<double, 4> rem{};
    std::size_t used = 0;
    for (std::size_t p = 0; p < 4; ++p) {
      const double exact = frac[p] * n;
      count[p] = static_cast<std::size_t>(std::floor(exact + 1e-9));
      rem[p] = exact - static_cast<double>(count[p]);
      used += count[p];
    }
    std::array<std::size_t, 4> order{0, 1, 2, 3};
    std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return rem[a] > rem[b]; });
    for (std::size_t k = 0; used < idx.size(); ++k, ++used) ++count[order[k % 4]];
    std::size_t pos = 0;
    for (std::size_t p = 0; p < 4; ++p) {
      out.index[p].insert(out.index[p].end(), idx.begin() + pos, idx.begin() + pos + count[p]);
      pos += count[p];
    }
  }
  for (std::size_t p = 0; p < 4; ++p) {
    if (frac[p] > 0 && out.index[p].empty()) {
      throw ArgumentError(std::string("split: fraction for '") + split_names[p] +
                          "' is positive but the dataset is too small to fill it");
    }
    std::sort(out.index[p].begin(), out.index[p].end());
  }
  // The calibration pool must never overlap the attack-evaluation pool.
  for (std::size_t p : {1u, 2u}) {
    std::vector<std::size_t> common;
    std::set_intersection(out.index[p].begin(), out.index[p].end(), out.index[3].begin(),
                          out.index[3].end(), std::back_inserter(common));
    if (!common.empty()) throw Error("split: calibration and test partitions overlap");
  }
  out.train = d.subset(out.index[0], "train");
  out.calibrate = d.subset(out.index[1], "calibrate");
  out.holdout = d.subset(out.index[2], "holdout");
  out.test = d.subset(out.index[3], "test");
  return out;
}

// Splits a tabular CSV and fits the encoder on the training rows only, so
// no scaling statistic or vocabulary leaks from the other partitions.
struct TabularSplit {
  Split parts;
  TabularEncoder encoder;
  TabularEncodeStats stats;
};

inline TabularSplit load_tabular_split(const std::string& csv_path, const TabularSchema& schema,
                                       SplitFractions fractions, std::uint64_t seed) {
  CsvTable t = read_csv(csv_path);
  std::vector<std::size_t> all(t.rows.size());
  std::iota(all.begin(), all.end(), 0);
  // Labels do not depend on the scaling, so a provisional fit is enough to
  // stratify.
  const Dataset provisional = encode_tabular(t, fit_tabular(t, schema, all));
  Split rows = split(provisional, fractions, seed);
  TabularSplit out;
  out.encoder = fit_tabular(t, schema, rows.index[0]);
  const Dataset full = encode_tabular(t, out.encoder, &out.stats, "csv:" + csv_path);
  out.parts.index = rows.index;
  out.parts.train = full.subset(rows.index[0], "train");
  out.parts.calibrate = full.subset(rows.index[1], "calibrate");
  out.parts.holdout = full.subset(rows.index[2], "holdout");
  out.parts.test = full.subset(rows.index[3], "test");
  return out;
}

// ---------------------------------------------------------------- synthetic flows

// IDS-style flow records: numeric traffic statistics, two categorical
// columns and a multi-class traffic label (BENIGN, DoS, PortScan,
// BruteForce). Written as CSV so it goes through the ordinary tabular
// loader; synthetic_flow_schema() collapses the labels to benign/attack.
inline void write_synthetic_flows(std::ostream& os, std::size_t n, std::uint64_t seed) {
  struct Profile {
    const char* label;
    double weight;
    double dur_mu, dur_s, fwd, bwd, len_mu, len_s, iat_mu, iat_s, syn, rst;
    std::array<double, 3> proto;  // tcp, udp, icmp
    std::array<double, 3> port;   // well_known, registered, dynamic
  };
  static constexpr std::array<Profile, 4> profiles{{
      {"BENIGN", 0.6, 1.0, 0.8, 12, 10, 500, 150, 0.0, 0.7, 0.3, 0.05, {0.7, 0.25, 0.05}, {0.6, 0.3, 0.1}},
      {"DoS", 0.15, 2.0, 0.6, 30, 2, 200, 80, -1.2, 0.5, 0.9, 0.1, {0.9, 0.1, 0.0}, {0.95, 0.05, 0.0}},
      {"PortScan", 0.15, -1.5, 0.5, 2, 1, 60, 20, -2.0, 0.5, 1.0, 0.7, {1.0, 0.0, 0.0}, {0.3, 0.4, 0.3}},
      {"BruteForce", 0.1, 1.5, 0.4, 15, 14, 300, 60, -0.3, 0.4, 0.5, 0.2, {1.0, 0.0, 0.0}, {0.95, 0.05, 0.0}},
  }};
  static constexpr std::array<const char*, 3> protos{"tcp", "udp", "icmp"};
  static constexpr std::array<const char*, 3> ports{"well_known", "registered", "dynamic"};
  Rng rng(derive_seed(seed, "synthetic_flows"));
  std::discrete_distribution<std::size_t> pick{profiles[0].weight, profiles[1].weight, profiles[2].weight,
                                               profiles[3].weight};
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);
  auto choose = [&](const std::array<double, 3>& p) {
    const double r = unit(rng);
    return r < p[0] ? 0 : (r < p[0] + p[1] ? 1 : 2);
  };
  os << "flow_duration,fwd_packets,bwd_packets,fwd_bytes,bwd_bytes,pkt_len_mean,iat_mean,syn_flag,rst_flag,"
        "protocol,port_class,label\n";
  char buf[256];
  for (std::size_t i = 0; i < n; ++i) {
    const Profile& p = profiles[pick(rng)];
    const double dur = std::exp(p.dur_mu + p.dur_s * normal(rng));
    const auto fwd = std::poisson_distribution<int>(p.fwd)(rng) + 1;
    const auto bwd = std::poisson_distribution<int>(p.bwd)(rng);
    const double len = std::max(40.0, p.len_mu + p.len_s * normal(rng));
    const double fwd_bytes = fwd * len * (0.8 + 0.4 * unit(rng));
    const double bwd_bytes = bwd * len * (0.8 + 0.4 * unit(rng));
    const double iat = std::exp(p.iat_mu + p.iat_s * normal(rng));
    const int syn = unit(rng) < p.syn, rst = unit(rng) < p.rst;
    std::snprintf(buf, sizeof buf, "%.6f,%d,%d,%.1f,%.1f,%.3f,%.6f,%d,%d,%s,%s,%s\n", dur, fwd, bwd, fwd_bytes,
                  bwd_bytes, len, iat, syn, rst, protos[choose(p.proto)], ports[choose(p.port)], p.label);
    os << buf;
  }
}

inline TabularSchema synthetic_flow_schema() {
  TabularSchema s;
  s.numeric = {"flow_duration", "fwd_packets", "bwd_packets", "fwd_bytes", "bwd_bytes",
               "pkt_len_mean", "iat_mean", "syn_flag", "rst_flag"};
  s.categorical = {"protocol", "port_class"};
  s.label = "label";
  s.collapse = {{"BENIGN", 0}, {"*", 1}};
  return s;
}

}  // namespace pasa
