#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "moosurr/linalg.hpp"

namespace moosurr {

enum class Task { BinaryClassification, Regression };
enum class Split : std::uint8_t { Train, Val, Test };

std::string to_string(Task t);

struct ColumnStats {
  double mean = 0.0;
  double stddev = 1.0;
};

/// Affine column scaling fitted on the training rows.
struct Standardizer {
  std::vector<std::size_t> columns;
  std::vector<ColumnStats> stats;

  void apply(Matrix& features) const;
};

struct Dataset {
  Matrix features;
  Vector targets;
  Task task = Task::BinaryClassification;
  std::vector<std::string> feature_names;
  std::vector<Split> split;
  std::optional<std::pair<std::size_t, std::size_t>> image_dims;  // (height, width)
  Standardizer feature_scaler;
  std::optional<ColumnStats> target_scaler;  // regression only

  std::size_t size() const { return features.rows(); }
  std::size_t dim() const { return features.cols(); }
  std::vector<std::size_t> indices(Split which) const;
  Matrix split_features(Split which) const;
  Vector split_targets(Split which) const;
};

// ---- CSV ingestion -------------------------------------------------------

enum class ColumnKind { Numeric, Categorical, Target, Ignore };

struct ColumnSpec {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  std::vector<std::string> levels;  // categorical only; empty = infer from data
};

/// Dataset schema, read from a `key: value` text file:
///
///     task: classification | regression
///     csv: relative/or/absolute/path.csv
///     positive: >50K            # classification target value mapped to 1
///     numeric: age
///     categorical: workclass = Private | Self-emp | ...   (levels optional)
///     target: income
///     ignore: fnlwgt
///
/// Every CSV header column must be named exactly once. `#` starts a comment.
struct Schema {
  Task task = Task::BinaryClassification;
  std::filesystem::path csv_path;
  std::string positive_label = "1";
  std::vector<ColumnSpec> columns;
};

Schema parse_schema(std::istream& in, const std::filesystem::path& base_dir = {});
Schema load_schema(const std::filesystem::path& path);

struct RawColumn {
  std::string name;
  ColumnKind kind = ColumnKind::Numeric;
  Vector numbers;                  // numeric columns
  std::vector<std::string> text;   // categorical and target columns
  std::vector<std::string> levels; // categorical: sorted level set
};

struct RawTable {
  std::size_t rows = 0;
  std::vector<RawColumn> columns;  // in CSV header order, ignored columns dropped
  const RawColumn& column(const std::string& name) const;
};

/// RFC-4180 style CSV with a header row. Empty or "?" cells are missing
/// values and rejected; errors name the 1-based data row.
RawTable parse_csv(std::istream& in, std::span<const ColumnSpec> schema);
RawTable load_csv(const std::filesystem::path& path, std::span<const ColumnSpec> schema);

struct EncodedTable {
  Matrix features;
  std::vector<std::string> feature_names;
  std::vector<std::size_t> numeric_columns;  // feature indices to standardize
  Vector targets;
};

/// Expands categoricals to one indicator per level (levels in lexicographic
/// order, named "col=level") and converts the target column.
EncodedTable one_hot(const RawTable& table, Task task, const std::string& positive_label);

/// Population (1/N) statistics of `values`. Throws ShapeError on zero variance.
ColumnStats column_stats(std::span<const double> values, const std::string& column_name);

/// (x - mean) / stddev with stats fitted on `train_rows`.
Standardizer fit_standardizer(const Matrix& features, std::span<const std::size_t> train_rows,
                              std::span<const std::size_t> columns,
                              std::span<const std::string> names);

struct SplitFractions {
  double train = 0.70;
  double val = 0.15;
  double test = 0.15;
};

/// Seeded shuffle then contiguous assignment. Classification data is
/// stratified: each label class is split separately with the same fractions.
std::vector<Split> make_split(std::span<const double> targets, Task task, SplitFractions fractions,
                              std::uint64_t seed);

/// Full tabular pipeline: encode, split, standardize numeric features (and
/// regression targets) with training-split statistics.
Dataset build_dataset(const RawTable& table, const Schema& schema, std::uint64_t split_seed,
                      SplitFractions fractions = {});

/// Undo the stored scaling, draw a new split and refit the scaling on the
/// new training rows.
Dataset resplit(const Dataset& unscaled, std::uint64_t split_seed, SplitFractions fractions = {});

// ---- IDX images ----------------------------------------------------------

inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct ImageSet {
  Matrix pixels;  // one flattened row-major image per row, scaled to [0, 1]
  std::vector<std::uint8_t> labels;
  std::size_t height = 0;
  std::size_t width = 0;
};

ImageSet parse_idx(std::span<const std::uint8_t> image_bytes,
                   std::span<const std::uint8_t> label_bytes);
ImageSet load_idx(const std::filesystem::path& images, const std::filesystem::path& labels);

std::vector<std::uint8_t> encode_idx_images(std::span<const std::uint8_t> pixels, std::size_t count,
                                            std::size_t height, std::size_t width);
std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels);

/// Binary task "is this digit `target_digit`". All rows start in Train.
Dataset binarize_label(const ImageSet& images, int target_digit);

// ---- synthetic -----------------------------------------------------------

enum class SyntheticKind { LinearRegression, LinearLogit, Nonlinear };

std::string to_string(SyntheticKind k);
SyntheticKind synthetic_kind_from_string(const std::string& s);

struct SyntheticDataset {
  Dataset data;
  Vector true_weights;  // linear kinds only
  double true_bias = 0.0;
};

/// Features are i.i.d. N(0, 1).
///  - LinearRegression: y = w.x + b + noise * N(0, 1)
///  - LinearLogit: y = 1[w.x + b + noise * N(0, 1) > 0]
///  - Nonlinear: y = 1[t(x) + noise * N(0, 1) > median t], t a fixed random
///    one-hidden-layer tanh network; the generating weights are not exposed.
/// Rows are split 70/15/15 with derive_seed(seed, streams::kSplit).
SyntheticDataset make_synthetic(SyntheticKind kind, std::size_t n, std::size_t d, double noise,
                                std::uint64_t seed);

}  // namespace moosurr
