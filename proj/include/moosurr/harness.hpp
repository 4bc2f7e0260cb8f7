#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "moosurr/data.hpp"
#include "moosurr/trainers.hpp"

namespace moosurr {

struct MethodEntry {
  std::string tag;  // "MOO", "GS:0.3", ...
  TrainConfig config;
};

struct GnfSettings {
  bool enabled = false;
  bool local = true;  // per-instance least-squares surrogates; false reuses the global one
  std::size_t points = 50;
  std::size_t neighbors = 10;
  double sigma2 = 0.1;
  std::size_t fit_samples = 200;
  std::size_t patch_size = 4;
  std::size_t patches = 3;
};

/// Parsed experiment spec file. Plain `key = value` lines, `#` comments:
///
///     version = 1
///     name = nonlinear-desk   # label used in result rows (default: derived)
///     dataset = synthetic:nonlinear:n=2000,d=10,noise=0,seed=101
///     methods = MOO, STL, UNI, RND, GS:0.3, JSEP, JDIST, LINEAR
///     seeds = 1, 2, 3
///     metrics = task, gf, gnf
///     epochs = 150            # shared TrainConfig fields:
///     batch_size = 128        #   epochs batch_size full_batch lr_theta lr_phi
///     hidden = 32, 32         #   hidden surrogate_steps stationarity_tol
///     gnf.points = 50         #   warm_start distill_weight teacher_epochs
///     gnf.neighbors = 10      # gnf.*: points neighbors sigma2 fit_samples
///     gnf.sigma2 = 0.1        #        mode (local|global) patch_size patches
///     output = results
///     MOO.epochs = 200        # <method tag>.<field> overrides one method
///
/// Dataset references:
///     synthetic:<linear_regression|linear_logit|nonlinear>:n=..,d=..,noise=..,seed=..
///     csv:<schema file>
///     idx:<images file>,<labels file>,digit=<0-9>[,limit=<rows>]
/// Relative paths resolve against the spec file's directory.
struct ExperimentSpec {
  std::string name;
  std::string dataset;
  std::vector<MethodEntry> methods;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> metrics = {"task", "gf"};
  GnfSettings gnf;
  std::filesystem::path output_dir = "results";
  std::filesystem::path base_dir;

  void validate() const;
};

ExperimentSpec parse_experiment_spec(std::istream& in, const std::filesystem::path& base_dir = {});
ExperimentSpec load_experiment_spec(const std::filesystem::path& path);

/// Applies one `field = value` setting to a config (the shared field names above).
void apply_config_field(TrainConfig& config, const std::string& field, const std::string& value);

/// Builds the TrainConfig for a method tag such as "GS:0.3".
TrainConfig config_for_tag(const std::string& tag, TrainConfig base);

/// Short label for a dataset reference, e.g. "synthetic-nonlinear", "adult", "mnist-7".
std::string dataset_label(const std::string& reference);

Dataset resolve_dataset(const std::string& reference, const std::filesystem::path& base_dir = {});

struct ResultRow {
  std::string dataset;
  std::string method;
  std::string metric;
  double mean = 0.0;
  std::optional<double> stddev;  // sample std, present iff n >= 2
  std::size_t n = 0;

  bool operator==(const ResultRow&) const = default;
};

struct ResultsTable {
  std::vector<ResultRow> rows;

  const ResultRow* find(const std::string& method, const std::string& metric) const;
  bool operator==(const ResultsTable&) const = default;
};

struct RunOutcome {
  std::string method;
  std::uint64_t seed = 0;
  std::optional<TrainResult> result;  // empty when the run aborted
  std::string error;
};

struct ExperimentResult {
  ResultsTable table;
  std::vector<RunOutcome> runs;
  std::size_t failed = 0;
};

/// The dataset a run with `seed` trains on: the base data re-split with
/// derive_seed(seed, streams::kSplit).
Dataset dataset_for_seed(const Dataset& base, std::uint64_t seed);

/// GNF of a trained black-box on the first `settings.points` test rows.
/// Evaluation neighborhoods use derive_seed(seed, kNeighborhood), local fits
/// derive_seed(seed, kLocalFit).
double evaluate_gnf(const TrainResult& result, const Dataset& data, const GnfSettings& settings,
                    std::uint64_t seed);

/// Trains every (method, seed) pair on `data` and aggregates mean and sample
/// std per (method, metric). A run that throws becomes a "failed" row.
ExperimentResult run_experiment(const ExperimentSpec& spec, const Dataset& data);

/// Loads the dataset, runs, and writes results.<format> plus per-run
/// reports, checkpoints and surrogates below spec.output_dir.
ExperimentResult run_experiment(const ExperimentSpec& spec, const std::string& format);

struct ScatterPoint {
  std::uint64_t seed = 0;
  std::string label;  // "GS:0.1" ... "GS:0.9", "MOO"
  double alpha = 0.0; // NaN-free: the MOO point records its final-epoch mean alpha
  double task_metric = 0.0;
  double task_loss = 0.0;  // 1 - F1 for classification, MSE for regression
  double gf = 0.0;
  bool dominated = false;
};

/// Sets `dominated` on each point against every other point with the same seed,
/// using (task_loss, gf) as the minimized objectives.
void flag_dominance(std::vector<ScatterPoint>& points);

/// GS at alpha = 0.1 .. 0.9 plus MOO for every seed in the spec; the base
/// TrainConfig is the spec's MOO entry if present, else the shared settings.
std::vector<ScatterPoint> pareto_scan(const ExperimentSpec& spec, const Dataset& data);

std::string scatter_to_csv(const std::vector<ScatterPoint>& points);

/// `%.6g` formatting used by every report.
std::string format_number(double v);

/// Columns: dataset,method,metric,mean,std,n. Empty std cell when absent.
std::string results_to_csv(const ResultsTable& table);
ResultsTable results_from_csv(const std::string& text);

inline constexpr int kResultsSchemaVersion = 1;
/// {"schema_version": 1, "rows": [{dataset, method, metric, mean, std, n}, ...]}
std::string results_to_json(const ResultsTable& table);

/// Writes results.csv or results.json into `dir`; returns the path.
std::filesystem::path emit_report(const ResultsTable& table, const std::string& format,
                                  const std::filesystem::path& dir);

}  // namespace moosurr
