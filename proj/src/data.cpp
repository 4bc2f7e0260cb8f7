#include "moosurr/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iterator>
#include <map>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#include "moosurr/errors.hpp"
#include "moosurr/rng.hpp"

namespace moosurr {

std::string to_string(Task t) {
  return t == Task::BinaryClassification ? "classification" : "regression";
}

void Standardizer::apply(Matrix& features) const {
  for (std::size_t k = 0; k < columns.size(); ++k) {
    const std::size_t c = columns[k];
    for (std::size_t r = 0; r < features.rows(); ++r) {
      features(r, c) = (features(r, c) - stats[k].mean) / stats[k].stddev;
    }
  }
}

std::vector<std::size_t> Dataset::indices(Split which) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < split.size(); ++i) {
    if (split[i] == which) out.push_back(i);
  }
  return out;
}

Matrix Dataset::split_features(Split which) const { return features.select_rows(indices(which)); }

Vector Dataset::split_targets(Split which) const {
  Vector out;
  for (std::size_t i : indices(which)) out.push_back(targets[i]);
  return out;
}

// ---- schema ----------------------------------------------------------------

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_on(std::string_view s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(trim(s.substr(start, pos == std::string_view::npos ? s.npos : pos - start)));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

Schema parse_schema(std::istream& in, const std::filesystem::path& base_dir) {
  Schema schema;
  std::string line;
  std::size_t line_no = 0;
  std::size_t targets = 0;
  bool task_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    const std::string content = trim(line);
    if (content.empty()) continue;
    const auto colon = content.find(':');
    if (colon == std::string::npos) {
      throw FormatError("schema line " + std::to_string(line_no) + ": expected 'key: value'");
    }
    const std::string key = trim(content.substr(0, colon));
    const std::string value = trim(content.substr(colon + 1));
    if (key == "task") {
      if (value == "classification") schema.task = Task::BinaryClassification;
      else if (value == "regression") schema.task = Task::Regression;
      else throw FormatError("schema line " + std::to_string(line_no) + ": unknown task '" + value + "'");
      task_seen = true;
    } else if (key == "csv") {
      std::filesystem::path p(value);
      schema.csv_path = p.is_absolute() || base_dir.empty() ? p : base_dir / p;
    } else if (key == "positive") {
      schema.positive_label = value;
    } else if (key == "numeric" || key == "target" || key == "ignore") {
      ColumnKind kind = key == "numeric" ? ColumnKind::Numeric
                        : key == "target" ? ColumnKind::Target
                                          : ColumnKind::Ignore;
      schema.columns.push_back({value, kind, {}});
      targets += kind == ColumnKind::Target;
    } else if (key == "categorical") {
      ColumnSpec spec{value, ColumnKind::Categorical, {}};
      if (auto eq = value.find('='); eq != std::string::npos) {
        spec.name = trim(value.substr(0, eq));
        spec.levels = split_on(value.substr(eq + 1), '|');
        std::sort(spec.levels.begin(), spec.levels.end());
      }
      schema.columns.push_back(std::move(spec));
    } else {
      throw FormatError("schema line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  if (!task_seen) throw FormatError("schema: missing 'task'");
  if (targets != 1) throw FormatError("schema: exactly one target column required");
  return schema;
}

Schema load_schema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open schema file " + path.string());
  return parse_schema(in, path.parent_path());
}

// ---- CSV -------------------------------------------------------------------

namespace {

// Reads one RFC-4180 record; quoted fields may contain commas, doubled
// quotes and newlines. Returns false at end of input.
bool read_record(std::istream& in, std::vector<std::string>& fields) {
  fields.clear();
  if (in.peek() == std::char_traits<char>::eof()) return false;
  std::string field;
  bool quoted = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (quoted) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field.push_back('"');
        } else {
          quoted = false;
        }
      } else {
        field.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(trim(field));
      field.clear();
    } else if (c == '\n') {
      break;
    } else if (c != '\r') {
      field.push_back(c);
    }
  }
  if (quoted) throw IngestError("csv: unterminated quoted field");
  if (!any) return false;
  fields.push_back(trim(field));
  return true;
}

bool parse_double(const std::string& s, double& out) {
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (begin != end && *begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end && std::isfinite(out);
}

}  // namespace

const RawColumn& RawTable::column(const std::string& name) const {
  for (const auto& c : columns) {
    if (c.name == name) return c;
  }
  throw std::out_of_range("no column named '" + name + "'");
}

RawTable parse_csv(std::istream& in, std::span<const ColumnSpec> schema) {
  std::vector<std::string> header;
  if (!read_record(in, header)) throw IngestError("csv: empty file, header row required");

  std::map<std::string, const ColumnSpec*> by_name;
  for (const auto& spec : schema) by_name[spec.name] = &spec;
  std::vector<const ColumnSpec*> layout;
  std::set<std::string> seen;
  for (const auto& name : header) {
    auto it = by_name.find(name);
    if (it == by_name.end()) throw IngestError("csv: header column '" + name + "' not in schema");
    if (!seen.insert(name).second) throw IngestError("csv: duplicate header column '" + name + "'");
    layout.push_back(it->second);
  }
  for (const auto& spec : schema) {
    if (!seen.count(spec.name)) throw IngestError("csv: schema column '" + spec.name + "' missing from header");
  }

  RawTable table;
  std::vector<std::size_t> slot(layout.size(), SIZE_MAX);
  for (std::size_t c = 0; c < layout.size(); ++c) {
    if (layout[c]->kind == ColumnKind::Ignore) continue;
    slot[c] = table.columns.size();
    table.columns.push_back({layout[c]->name, layout[c]->kind, {}, {}, layout[c]->levels});
  }

  std::vector<std::string> fields;
  std::size_t row = 0;
  while (read_record(in, fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;  // blank line
    ++row;
    const std::string where = "csv row " + std::to_string(row);
    if (fields.size() != layout.size()) {
      throw IngestError(where + ": expected " + std::to_string(layout.size()) + " fields, got " +
                        std::to_string(fields.size()));
    }
    for (std::size_t c = 0; c < layout.size(); ++c) {
      if (slot[c] == SIZE_MAX) continue;
      const std::string& cell = fields[c];
      RawColumn& col = table.columns[slot[c]];
      if (cell.empty() || cell == "?") {
        throw IngestError(where + ": missing value in column '" + col.name + "'");
      }
      if (col.kind == ColumnKind::Numeric) {
        double v;
        if (!parse_double(cell, v)) {
          throw IngestError(where + ": column '" + col.name + "' value '" + cell + "' is not a number");
        }
        col.numbers.push_back(v);
      } else {
        if (col.kind == ColumnKind::Categorical && !layout[c]->levels.empty() &&
            !std::binary_search(layout[c]->levels.begin(), layout[c]->levels.end(), cell)) {
          throw IngestError(where + ": unknown level '" + cell + "' in column '" + col.name + "'");
        }
        col.text.push_back(cell);
      }
    }
  }
  table.rows = row;

  for (auto& col : table.columns) {
    if (col.kind == ColumnKind::Categorical && col.levels.empty()) {
      std::set<std::string> levels(col.text.begin(), col.text.end());
      col.levels.assign(levels.begin(), levels.end());
    }
  }
  return table;
}

RawTable load_csv(const std::filesystem::path& path, std::span<const ColumnSpec> schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IngestError("cannot open csv file " + path.string());
  return parse_csv(in, schema);
}

EncodedTable one_hot(const RawTable& table, Task task, const std::string& positive_label) {
  EncodedTable out;
  std::size_t width = 0;
  const RawColumn* target = nullptr;
  for (const auto& col : table.columns) {
    if (col.kind == ColumnKind::Numeric) width += 1;
    if (col.kind == ColumnKind::Categorical) width += col.levels.size();
    if (col.kind == ColumnKind::Target) target = &col;
  }
  if (target == nullptr) throw IngestError("one_hot: table has no target column");

  out.features = Matrix(table.rows, width);
  std::size_t c0 = 0;
  for (const auto& col : table.columns) {
    if (col.kind == ColumnKind::Numeric) {
      for (std::size_t r = 0; r < table.rows; ++r) out.features(r, c0) = col.numbers[r];
      out.feature_names.push_back(col.name);
      out.numeric_columns.push_back(c0);
      c0 += 1;
    } else if (col.kind == ColumnKind::Categorical) {
      for (const auto& level : col.levels) out.feature_names.push_back(col.name + "=" + level);
      for (std::size_t r = 0; r < table.rows; ++r) {
        auto it = std::lower_bound(col.levels.begin(), col.levels.end(), col.text[r]);
        out.features(r, c0 + static_cast<std::size_t>(it - col.levels.begin())) = 1.0;
      }
      c0 += col.levels.size();
    }
  }

  out.targets.resize(table.rows);
  for (std::size_t r = 0; r < table.rows; ++r) {
    const std::string& cell = target->text[r];
    if (task == Task::BinaryClassification) {
      out.targets[r] = cell == positive_label ? 1.0 : 0.0;
    } else if (!parse_double(cell, out.targets[r])) {
      throw IngestError("csv row " + std::to_string(r + 1) + ": target '" + cell + "' is not a number");
    }
  }
  return out;
}

ColumnStats column_stats(std::span<const double> values, const std::string& column_name) {
  if (values.empty()) throw ShapeError("standardize: column '" + column_name + "' has no training rows");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= n;
  if (!(var > 0.0)) throw ShapeError("standardize: column '" + column_name + "' has zero variance");
  return {mean, std::sqrt(var)};
}

Standardizer fit_standardizer(const Matrix& features, std::span<const std::size_t> train_rows,
                              std::span<const std::size_t> columns,
                              std::span<const std::string> names) {
  Standardizer s;
  Vector values(train_rows.size());
  for (std::size_t c : columns) {
    for (std::size_t i = 0; i < train_rows.size(); ++i) values[i] = features(train_rows[i], c);
    s.columns.push_back(c);
    s.stats.push_back(column_stats(values, c < names.size() ? names[c] : std::to_string(c)));
  }
  return s;
}

std::vector<Split> make_split(std::span<const double> targets, Task task, SplitFractions fractions,
                              std::uint64_t seed) {
  const double total = fractions.train + fractions.val + fractions.test;
  if (fractions.train <= 0.0 || fractions.val < 0.0 || fractions.test < 0.0 ||
      std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument("split fractions must be non-negative, train > 0, summing to 1");
  }
  Rng rng(seed);
  std::vector<Split> tags(targets.size(), Split::Train);

  auto assign = [&](std::vector<std::size_t> group) {
    std::shuffle(group.begin(), group.end(), rng);
    const double n = static_cast<double>(group.size());
    const auto n_train = static_cast<std::size_t>(std::llround(n * fractions.train));
    const auto n_val = std::min(group.size() - n_train,
                                static_cast<std::size_t>(std::llround(n * fractions.val)));
    for (std::size_t k = 0; k < group.size(); ++k) {
      tags[group[k]] = k < n_train ? Split::Train : k < n_train + n_val ? Split::Val : Split::Test;
    }
  };

  if (task == Task::BinaryClassification) {
    std::vector<std::size_t> neg, pos;
    for (std::size_t i = 0; i < targets.size(); ++i) (targets[i] == 1.0 ? pos : neg).push_back(i);
    assign(std::move(neg));
    assign(std::move(pos));
  } else {
    std::vector<std::size_t> all(targets.size());
    std::iota(all.begin(), all.end(), 0);
    assign(std::move(all));
  }
  return tags;
}

namespace {

void fit_scaling(Dataset& ds, std::span<const std::size_t> numeric_columns) {
  const auto train = ds.indices(Split::Train);
  ds.feature_scaler = fit_standardizer(ds.features, train, numeric_columns, ds.feature_names);
  ds.feature_scaler.apply(ds.features);
  if (ds.task == Task::Regression) {
    Vector train_targets;
    for (std::size_t i : train) train_targets.push_back(ds.targets[i]);
    const ColumnStats stats = column_stats(train_targets, "target");
    for (double& t : ds.targets) t = (t - stats.mean) / stats.stddev;
    ds.target_scaler = stats;
  }
}

}  // namespace

Dataset build_dataset(const RawTable& table, const Schema& schema, std::uint64_t split_seed,
                      SplitFractions fractions) {
  EncodedTable enc = one_hot(table, schema.task, schema.positive_label);
  Dataset ds;
  ds.features = std::move(enc.features);
  ds.targets = std::move(enc.targets);
  ds.task = schema.task;
  ds.feature_names = std::move(enc.feature_names);
  ds.split = make_split(ds.targets, ds.task, fractions, split_seed);
  fit_scaling(ds, enc.numeric_columns);
  return ds;
}

Dataset resplit(const Dataset& scaled, std::uint64_t split_seed, SplitFractions fractions) {
  Dataset ds = scaled;
  const auto& sc = scaled.feature_scaler;
  for (std::size_t k = 0; k < sc.columns.size(); ++k) {
    for (std::size_t r = 0; r < ds.features.rows(); ++r) {
      double& v = ds.features(r, sc.columns[k]);
      v = v * sc.stats[k].stddev + sc.stats[k].mean;
    }
  }
  if (scaled.target_scaler) {
    for (double& t : ds.targets) t = t * scaled.target_scaler->stddev + scaled.target_scaler->mean;
  }
  ds.target_scaler.reset();
  ds.split = make_split(ds.targets, ds.task, fractions, split_seed);
  const auto numeric = sc.columns;
  const bool rescale_targets = scaled.target_scaler.has_value();
  if (numeric.empty() && !rescale_targets) {
    ds.feature_scaler = {};
    return ds;
  }
  fit_scaling(ds, numeric);
  return ds;
}

// ---- IDX -------------------------------------------------------------------

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

ImageSet parse_idx(std::span<const std::uint8_t> image_bytes,
                   std::span<const std::uint8_t> label_bytes) {
  if (image_bytes.size() < 16) throw FormatError("idx images: truncated header");
  if (label_bytes.size() < 8) throw FormatError("idx labels: truncated header");
  if (read_be32(image_bytes, 0) != kIdxImageMagic) throw FormatError("idx images: bad magic number");
  if (read_be32(label_bytes, 0) != kIdxLabelMagic) throw FormatError("idx labels: bad magic number");

  const std::size_t count = read_be32(image_bytes, 4);
  const std::size_t height = read_be32(image_bytes, 8);
  const std::size_t width = read_be32(image_bytes, 12);
  const std::size_t label_count = read_be32(label_bytes, 4);
  if (label_count != count) {
    throw FormatError("idx: " + std::to_string(count) + " images but " +
                      std::to_string(label_count) + " labels");
  }
  if (image_bytes.size() != 16 + count * height * width) {
    throw FormatError("idx images: payload size does not match dimensions");
  }
  if (label_bytes.size() != 8 + count) throw FormatError("idx labels: payload size does not match count");

  ImageSet set;
  set.height = height;
  set.width = width;
  set.pixels = Matrix(count, height * width);
  auto px = set.pixels.data();
  for (std::size_t i = 0; i < px.size(); ++i) px[i] = image_bytes[16 + i] / 255.0;
  set.labels.assign(label_bytes.begin() + 8, label_bytes.end());
  return set;
}

ImageSet load_idx(const std::filesystem::path& images, const std::filesystem::path& labels) {
  const auto image_bytes = read_file(images);
  const auto label_bytes = read_file(labels);
  return parse_idx(image_bytes, label_bytes);
}

std::vector<std::uint8_t> encode_idx_images(std::span<const std::uint8_t> pixels, std::size_t count,
                                            std::size_t height, std::size_t width) {
  require_same_size(pixels.size(), count * height * width, "encode_idx_images");
  std::vector<std::uint8_t> out;
  out.reserve(16 + pixels.size());
  write_be32(out, kIdxImageMagic);
  write_be32(out, static_cast<std::uint32_t>(count));
  write_be32(out, static_cast<std::uint32_t>(height));
  write_be32(out, static_cast<std::uint32_t>(width));
  out.insert(out.end(), pixels.begin(), pixels.end());
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.size());
  write_be32(out, kIdxLabelMagic);
  write_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

Dataset binarize_label(const ImageSet& images, int target_digit) {
  Dataset ds;
  ds.features = images.pixels;
  ds.task = Task::BinaryClassification;
  ds.targets.resize(images.labels.size());
  for (std::size_t i = 0; i < images.labels.size(); ++i) {
    ds.targets[i] = images.labels[i] == target_digit ? 1.0 : 0.0;
  }
  for (std::size_t r = 0; r < images.height; ++r) {
    for (std::size_t c = 0; c < images.width; ++c) {
      ds.feature_names.push_back("px_" + std::to_string(r) + "_" + std::to_string(c));
    }
  }
  ds.split.assign(ds.targets.size(), Split::Train);
  ds.image_dims = std::make_pair(images.height, images.width);
  return ds;
}

// ---- synthetic -------------------------------------------------------------

std::string to_string(SyntheticKind k) {
  switch (k) {
    case SyntheticKind::LinearRegression: return "linear_regression";
    case SyntheticKind::LinearLogit: return "linear_logit";
    case SyntheticKind::Nonlinear: return "nonlinear";
  }
  return "?";
}

SyntheticKind synthetic_kind_from_string(const std::string& s) {
  if (s == "linear_regression") return SyntheticKind::LinearRegression;
  if (s == "linear_logit") return SyntheticKind::LinearLogit;
  if (s == "nonlinear") return SyntheticKind::Nonlinear;
  throw std::invalid_argument("unknown synthetic kind '" + s + "'");
}

SyntheticDataset make_synthetic(SyntheticKind kind, std::size_t n, std::size_t d, double noise,
                                std::uint64_t seed) {
  if (n == 0 || d == 0) throw std::invalid_argument("make_synthetic: n and d must be positive");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  SyntheticDataset out;
  Dataset& ds = out.data;
  ds.task = kind == SyntheticKind::LinearRegression ? Task::Regression : Task::BinaryClassification;
  ds.features = Matrix(n, d);
  for (double& v : ds.features.data()) v = normal(rng);
  for (std::size_t j = 0; j < d; ++j) ds.feature_names.push_back("x" + std::to_string(j));
  ds.targets.resize(n);

  if (kind == SyntheticKind::Nonlinear) {
    constexpr std::size_t kHidden = 16;
    Matrix w1(kHidden, d);
    Vector b1(kHidden), v(kHidden);
    const double scale = 1.0 / std::sqrt(static_cast<double>(d));
    for (double& w : w1.data()) w = normal(rng) * scale;
    for (double& b : b1) b = 0.5 * normal(rng);
    for (double& w : v) w = normal(rng);
    Vector score(n);
    for (std::size_t i = 0; i < n; ++i) {
      auto x = ds.features.row(i);
      double s = 0.0;
      for (std::size_t h = 0; h < kHidden; ++h) s += v[h] * std::tanh(dot(w1.row(h), x) + b1[h]);
      score[i] = s + noise * normal(rng);
    }
    Vector sorted = score;
    std::nth_element(sorted.begin(), sorted.begin() + n / 2, sorted.end());
    const double median = sorted[n / 2];
    for (std::size_t i = 0; i < n; ++i) ds.targets[i] = score[i] > median ? 1.0 : 0.0;
  } else {
    out.true_weights.resize(d);
    for (double& w : out.true_weights) w = normal(rng);
    out.true_bias = 0.5 * normal(rng);
    for (std::size_t i = 0; i < n; ++i) {
      const double s = dot(out.true_weights, ds.features.row(i)) + out.true_bias + noise * normal(rng);
      ds.targets[i] = kind == SyntheticKind::LinearRegression ? s : (s > 0.0 ? 1.0 : 0.0);
    }
  }
  ds.split = make_split(ds.targets, ds.task, {}, derive_seed(seed, streams::kSplit));
  return out;
}

}  // namespace moosurr
