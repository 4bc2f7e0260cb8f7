#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "moosurr/data.hpp"
#include "moosurr/metrics.hpp"
#include "moosurr/mlp.hpp"
#include "moosurr/surrogate.hpp"

namespace moosurr {

enum class Method { MOO, STL, UNI, GS, RND, LINEAR, JSEP, JDIST };

std::string to_string(Method m);
Method method_from_string(const std::string& s);

/// Everything a trainer sees at one parameter update of the black-box.
struct StepEvent {
  std::size_t epoch = 0;
  std::size_t step = 0;
  double alpha = 0.0;
  std::span<const double> g_pred;
  std::span<const double> g_pf;       // empty when the method never computes it
  std::span<const double> direction;  // what was handed to Adam
};

using StepObserver = std::function<void(const StepEvent&)>;

struct TrainConfig {
  Method method = Method::MOO;
  double gs_alpha = 0.5;  // GS only, in (0, 1)
  double lr_theta = 1e-3;
  double lr_phi = 1e-3;
  std::size_t max_epochs = 200;
  std::size_t batch_size = 128;
  bool full_batch = false;  // one step per epoch over the whole training split
  std::uint64_t seed = 0;
  double stationarity_tol = 1e-6;
  std::vector<std::size_t> hidden = {64, 64};
  /// Surrogate Adam steps per black-box step (lower level of the bi-level problem).
  std::size_t surrogate_steps = 1;
  /// Start the surrogate at the least-squares fit of the initial black-box
  /// (the lower-level optimum) instead of zero.
  bool surrogate_warm_start = true;
  /// J-DIST: weight of the distillation term, 0.5 as in the ablation.
  double distill_weight = 0.5;
  /// Epochs of the teacher phase. train_predictor treats 0 as max_epochs;
  /// the J-DIST dispatch in train() treats 0 as max_epochs / 2 and gives the
  /// student the remainder of max_epochs.
  std::size_t teacher_epochs = 0;
  StepObserver observer;

  /// Throws std::invalid_argument on out-of-range fields.
  void validate() const;
};

/// Full-batch training-split losses at the end of an epoch. loss_pf is
/// measured against the surrogate as it stands at that point (still zero
/// during the STL predictor phase).
struct EpochRecord {
  double loss_pred = 0.0;
  double loss_pf = 0.0;
  double alpha = 0.0;  // mean predictive weight over the epoch's steps

  bool operator==(const EpochRecord&) const = default;
};

enum class StopReason { Stationary, Budget };
std::string to_string(StopReason r);

struct TrainReport {
  std::string method;
  std::uint64_t seed = 0;
  std::size_t epochs_run = 0;
  StopReason stopped = StopReason::Budget;
  std::vector<EpochRecord> history;
  std::string task_metric_name;  // "f1" or "mse"
  std::optional<double> task_metric;
  std::optional<double> gf;  // absent for LINEAR (the predictor is its own surrogate)
  std::optional<double> gnf;

  bool operator==(const TrainReport&) const = default;
};

struct TrainResult {
  std::optional<Mlp> black_box;  // absent for LINEAR
  LinearSurrogate surrogate;
  TrainReport report;
};

enum class AlphaScheduleKind { Constant, UniformPerStep };

struct AlphaSchedule {
  AlphaScheduleKind kind = AlphaScheduleKind::Constant;
  double value = 0.5;

  static AlphaSchedule uni() { return {AlphaScheduleKind::Constant, 0.5}; }
  static AlphaSchedule fixed(double a) { return {AlphaScheduleKind::Constant, a}; }
  static AlphaSchedule random() { return {AlphaScheduleKind::UniformPerStep, 0.0}; }
};

/// Joint MGDA training: per step, one surrogate update with the black-box
/// fixed, then the black-box moves along the min-norm combination of the
/// predictive and fidelity gradients. Stops at a Pareto-stationary epoch or
/// at max_epochs.
TrainResult train_joint_moo(const Dataset& data, const TrainConfig& config);

/// Black-box on the predictive loss alone, then the surrogate is fitted to
/// the frozen black-box by exact least squares.
TrainResult train_stl(const Dataset& data, const TrainConfig& config);

/// Same loop as train_joint_moo with alpha taken from the schedule.
/// `init` replaces the seeded initialization of the black-box.
TrainResult train_weighted(const Dataset& data, const TrainConfig& config,
                           AlphaSchedule schedule, const std::optional<Mlp>& init = std::nullopt);

/// Black-box on the predictive gradient, surrogate on the fidelity gradient,
/// interleaved; the fidelity loss never reaches the black-box.
TrainResult train_jsep(const Dataset& data, const TrainConfig& config);

/// Student initialized from `teacher`, trained on
///   1/2 L_pred + w L_dist + 1/2 L_PF
/// with w = config.distill_weight (default 1/2). With w = 0 this is UNI
/// started from the teacher.
TrainResult train_jdist(const Dataset& data, const TrainConfig& config, const Mlp& teacher);

/// Black-box trained on the predictive loss only (STL first phase).
Mlp train_predictor(const Dataset& data, const TrainConfig& config);

/// Linear model fitted directly to the targets (sigmoid-wrapped for
/// classification). `black_box` stays empty.
TrainResult train_linear(const Dataset& data, const TrainConfig& config);

/// Dispatches on config.method; J-DIST trains its own teacher within the
/// same max_epochs budget.
TrainResult train(const Dataset& data, const TrainConfig& config);


struct LocalFit {
  LinearSurrogate surrogate;
  bool rank_deficient = false;
};

/// Least-squares surrogate of f over the rows of `neighborhood`.
LocalFit fit_local_surrogate(const Mlp& f, const Matrix& neighborhood);

/// Per-instance local surrogates: row i is explained by a surrogate fitted on
/// `fit_spec.count` fresh perturbations drawn with derive_seed(fit_spec.seed, i).
SurrogateProvider local_surrogate_provider(const Mlp& f, NeighborhoodSpec fit_spec);

/// Fills task_metric and gf on the test split.
void evaluate(TrainResult& result, const Dataset& data);

/// Output of the trained predictor: the black-box, or the linear model for LINEAR.
Vector predict(const TrainResult& result, const Matrix& batch, Task task);

}  // namespace moosurr
