#include "moosurr/trainers.hpp"

#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "moosurr/adam.hpp"
#include "moosurr/errors.hpp"
#include "moosurr/losses.hpp"
#include "moosurr/moo.hpp"
#include "moosurr/rng.hpp"

namespace moosurr {

std::string to_string(Method m) {
  switch (m) {
    case Method::MOO: return "MOO";
    case Method::STL: return "STL";
    case Method::UNI: return "UNI";
    case Method::GS: return "GS";
    case Method::RND: return "RND";
    case Method::LINEAR: return "LINEAR";
    case Method::JSEP: return "JSEP";
    case Method::JDIST: return "JDIST";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  for (Method m : {Method::MOO, Method::STL, Method::UNI, Method::GS, Method::RND, Method::LINEAR,
                   Method::JSEP, Method::JDIST}) {
    if (s == to_string(m)) return m;
  }
  if (s == "J-SEP") return Method::JSEP;
  if (s == "J-DIST") return Method::JDIST;
  throw std::invalid_argument("unknown method '" + s + "'");
}

std::string to_string(StopReason r) { return r == StopReason::Stationary ? "stationary" : "budget"; }

void TrainConfig::validate() const {
  if (!(lr_theta > 0.0) || !(lr_phi > 0.0)) throw std::invalid_argument("learning rates must be positive");
  if (method == Method::GS && !(gs_alpha > 0.0 && gs_alpha < 1.0)) {
    throw std::invalid_argument("GS alpha must lie in (0, 1)");
  }
  if (batch_size == 0) throw std::invalid_argument("batch_size must be >= 1");
  if (max_epochs == 0) throw std::invalid_argument("max_epochs must be >= 1");
  if (!(stationarity_tol > 0.0)) throw std::invalid_argument("stationarity_tol must be positive");
  if (surrogate_steps == 0) throw std::invalid_argument("surrogate_steps must be >= 1");
  if (!(distill_weight >= 0.0)) throw std::invalid_argument("distill_weight must be >= 0");
}

namespace {

LossKind predictive_loss(Task t) {
  return t == Task::BinaryClassification ? LossKind::BinaryCrossEntropy : LossKind::MSE;
}

OutputKind output_kind_for(Task t) {
  return t == Task::BinaryClassification ? OutputKind::BinaryProbability
                                         : OutputKind::RegressionScalar;
}

std::string method_tag(const TrainConfig& config) {
  if (config.method != Method::GS) return to_string(config.method);
  std::ostringstream os;
  os << "GS:" << config.gs_alpha;
  return os.str();
}

void require_method(const TrainConfig& config, std::initializer_list<Method> allowed,
                    const char* trainer) {
  for (Method m : allowed) {
    if (config.method == m) return;
  }
  throw std::invalid_argument(std::string(trainer) + ": config.method is " + to_string(config.method));
}

Mlp initial_model(const Dataset& data, const TrainConfig& config) {
  Rng rng(derive_seed(config.seed, streams::kInit));
  return Mlp::glorot(data.dim(), config.hidden, output_kind_for(data.task), rng);
}

enum class DirectionRule { Mgda, Schedule, PredictiveOnly, Distill };

struct LoopSpec {
  DirectionRule rule = DirectionRule::Mgda;
  AlphaSchedule schedule;
  bool update_surrogate = true;
  std::size_t epochs = 0;
  const Mlp* teacher = nullptr;
};

struct LoopOutput {
  Mlp model;
  LinearSurrogate surrogate;
  TrainReport report;
};

struct Direction {
  Vector values;
  double alpha = 1.0;
};

// Shared update loop of every black-box trainer. Per mini-batch: surrogate
// Adam step(s) with the black-box fixed, per-objective black-box gradients,
// a direction from `spec.rule`, one black-box Adam step.
LoopOutput run_loop(const Dataset& data, const TrainConfig& config, Mlp model, const LoopSpec& spec) {
  const Matrix x = data.split_features(Split::Train);
  const Vector y = data.split_targets(Split::Train);
  const std::size_t n = x.rows();
  if (n == 0) throw ShapeError("training split is empty");
  const std::size_t batch = config.full_batch ? n : std::min(config.batch_size, n);
  const LossKind pred_kind = predictive_loss(data.task);

  LinearSurrogate surrogate = LinearSurrogate::zeros(data.dim());
  if (spec.update_surrogate && config.surrogate_warm_start) {
    surrogate = fit_least_squares(x, model.forward_batch(x)).surrogate;
  }
  AdamState model_state = AdamState::fresh(model.parameter_count());
  AdamState surrogate_state = AdamState::fresh(data.dim() + 1);
  Rng shuffle_rng(derive_seed(config.seed, streams::kShuffle));
  Rng alpha_rng(derive_seed(config.seed, streams::kAlphaSampler));
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  Vector teacher_out;
  if (spec.rule == DirectionRule::Distill) teacher_out = spec.teacher->forward_batch(x);

  const bool needs_pf = spec.rule != DirectionRule::PredictiveOnly;

  auto direction_for = [&](const Vector& g_pred, const Vector& g_pf, const Vector& g_dist,
                           bool draw) -> Direction {
    switch (spec.rule) {
      case DirectionRule::Mgda: {
        const AlphaSolution sol = solve_alpha(g_pred, g_pf);
        return {combine_direction(sol.alpha, g_pred, g_pf), sol.alpha};
      }
      case DirectionRule::Schedule: {
        double alpha = spec.schedule.value;
        if (spec.schedule.kind == AlphaScheduleKind::UniformPerStep) {
          alpha = 0.0;
          if (draw) {
            while (alpha == 0.0) alpha = unit(alpha_rng);
          }
        }
        return {combine_direction(alpha, g_pred, g_pf), alpha};
      }
      case DirectionRule::PredictiveOnly:
        return {g_pred, 1.0};
      case DirectionRule::Distill: {
        Vector d(g_pred.size());
        for (std::size_t i = 0; i < d.size(); ++i) {
          d[i] = 0.5 * g_pred[i] + config.distill_weight * g_dist[i] + 0.5 * g_pf[i];
        }
        return {std::move(d), 0.5};
      }
    }
    return {g_pred, 1.0};
  };

  LoopOutput out{std::move(model), {}, {}};
  Mlp& f = out.model;
  TrainReport& report = out.report;
  report.method = method_tag(config);
  report.seed = config.seed;
  report.task_metric_name = data.task == Task::BinaryClassification ? "f1" : "mse";

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::size_t step = 0;
  Vector params;

  for (std::size_t epoch = 0; epoch < spec.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    double alpha_sum = 0.0;
    std::size_t epoch_steps = 0;

    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Matrix xb = x.select_rows(idx);
      Vector yb(idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) yb[k] = y[idx[k]];

      const ForwardCache cache = f.forward_cached(xb);
      const Vector fb = cache.outputs();

      if (spec.update_surrogate) {
        for (std::size_t k = 0; k < config.surrogate_steps; ++k) {
          const Vector gb = surrogate.predict_batch(xb);
          Vector residual(fb.size());
          for (std::size_t i = 0; i < fb.size(); ++i) residual[i] = fb[i] - gb[i];
          params = surrogate.flatten();
          adam_step(params, surrogate_grad_phi(surrogate, xb, residual), surrogate_state, config.lr_phi);
          surrogate.unflatten(params);
        }
      }

      const Vector g_pred = f.backward(cache, upstream_derivative(fb, yb, pred_kind));
      Vector g_pf;
      if (needs_pf) {
        g_pf = f.backward(cache, upstream_derivative(fb, surrogate.predict_batch(xb),
                                                     LossKind::PointFidelity));
      }
      Vector g_dist;
      if (spec.rule == DirectionRule::Distill) {
        Vector tb(idx.size());
        for (std::size_t k = 0; k < idx.size(); ++k) tb[k] = teacher_out[idx[k]];
        g_dist = f.backward(cache, upstream_derivative(fb, tb, LossKind::Distill));
      }

      const Direction dir = direction_for(g_pred, g_pf, g_dist, true);
      if (config.observer) config.observer({epoch, step, dir.alpha, g_pred, g_pf, dir.values});

      params = f.flatten();
      try {
        adam_step(params, dir.values, model_state, config.lr_theta);
      } catch (const NumericError&) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                           ": non-finite gradient");
      }
      f.unflatten(params);
      alpha_sum += dir.alpha;
      ++epoch_steps;
      ++step;
    }

    // Full-batch bookkeeping and the stationarity test.
    const ForwardCache cache = f.forward_cached(x);
    const Vector fx = cache.outputs();
    const Vector gx = surrogate.predict_batch(x);
    EpochRecord rec;
    if (!all_finite(fx) || !all_finite(gx)) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": non-finite loss");
    }
    rec.loss_pred = loss_pred(fx, y, pred_kind);
    rec.loss_pf = loss_point_fidelity(fx, gx);
    rec.alpha = alpha_sum / static_cast<double>(epoch_steps);
    if (!std::isfinite(rec.loss_pred) || !std::isfinite(rec.loss_pf)) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": non-finite loss");
    }
    report.history.push_back(rec);
    report.epochs_run = epoch + 1;

    const bool random_alpha = spec.rule == DirectionRule::Schedule &&
                              spec.schedule.kind == AlphaScheduleKind::UniformPerStep;
    if (random_alpha) continue;
    const Vector g_pred = f.backward(cache, upstream_derivative(fx, y, pred_kind));
    bool stationary = false;
    if (spec.rule == DirectionRule::PredictiveOnly) {
      stationary = norm(g_pred) <= config.stationarity_tol;
    } else {
      const Vector g_pf = f.backward(cache, upstream_derivative(fx, gx, LossKind::PointFidelity));
      if (spec.rule == DirectionRule::Mgda) {
        stationary = is_pareto_stationary(g_pred, g_pf, config.stationarity_tol);
      } else {
        Vector g_dist;
        if (spec.rule == DirectionRule::Distill) {
          g_dist = f.backward(cache, upstream_derivative(fx, teacher_out, LossKind::Distill));
        }
        stationary = norm(direction_for(g_pred, g_pf, g_dist, false).values) <= config.stationarity_tol;
      }
    }
    if (stationary) {
      report.stopped = StopReason::Stationary;
      break;
    }
  }
  out.surrogate = std::move(surrogate);
  return out;
}

TrainResult to_result(LoopOutput&& loop) {
  return {std::move(loop.model), std::move(loop.surrogate), std::move(loop.report)};
}

}  // namespace

TrainResult train_joint_moo(const Dataset& data, const TrainConfig& config) {
  config.validate();
  require_method(config, {Method::MOO}, "train_joint_moo");
  LoopSpec spec;
  spec.rule = DirectionRule::Mgda;
  spec.epochs = config.max_epochs;
  return to_result(run_loop(data, config, initial_model(data, config), spec));
}

Mlp train_predictor(const Dataset& data, const TrainConfig& config) {
  config.validate();
  LoopSpec spec;
  spec.rule = DirectionRule::PredictiveOnly;
  spec.update_surrogate = false;
  spec.epochs = config.teacher_epochs == 0 ? config.max_epochs : config.teacher_epochs;
  return run_loop(data, config, initial_model(data, config), spec).model;
}

TrainResult train_stl(const Dataset& data, const TrainConfig& config) {
  config.validate();
  require_method(config, {Method::STL}, "train_stl");
  LoopSpec spec;
  spec.rule = DirectionRule::PredictiveOnly;
  spec.update_surrogate = false;
  spec.epochs = config.max_epochs;
  LoopOutput loop = run_loop(data, config, initial_model(data, config), spec);

  // Phase 2: the surrogate's loss is a convex quadratic in (phi, b) with the
  // black-box frozen; its minimizer is the least-squares fit.
  const Matrix x = data.split_features(Split::Train);
  loop.surrogate = fit_least_squares(x, loop.model.forward_batch(x)).surrogate;
  return to_result(std::move(loop));
}

TrainResult train_weighted(const Dataset& data, const TrainConfig& config, AlphaSchedule schedule,
                           const std::optional<Mlp>& init) {
  config.validate();
  require_method(config, {Method::UNI, Method::GS, Method::RND}, "train_weighted");
  if (schedule.kind == AlphaScheduleKind::Constant && !(schedule.value >= 0.0 && schedule.value <= 1.0)) {
    throw std::invalid_argument("train_weighted: constant alpha outside [0, 1]");
  }
  LoopSpec spec;
  spec.rule = DirectionRule::Schedule;
  spec.schedule = schedule;
  spec.epochs = config.max_epochs;
  return to_result(run_loop(data, config, init ? *init : initial_model(data, config), spec));
}

TrainResult train_jsep(const Dataset& data, const TrainConfig& config) {
  config.validate();
  require_method(config, {Method::JSEP}, "train_jsep");
  LoopSpec spec;
  spec.rule = DirectionRule::PredictiveOnly;
  spec.update_surrogate = true;
  spec.epochs = config.max_epochs;
  return to_result(run_loop(data, config, initial_model(data, config), spec));
}

TrainResult train_jdist(const Dataset& data, const TrainConfig& config, const Mlp& teacher) {
  config.validate();
  require_method(config, {Method::JDIST}, "train_jdist");
  if (teacher.input_dim() != data.dim()) throw ShapeError("train_jdist: teacher input dim mismatch");
  LoopSpec spec;
  spec.rule = DirectionRule::Distill;
  spec.teacher = &teacher;
  spec.epochs = config.max_epochs;
  return to_result(run_loop(data, config, teacher, spec));
}

TrainResult train_linear(const Dataset& data, const TrainConfig& config) {
  config.validate();
  require_method(config, {Method::LINEAR}, "train_linear");
  const Matrix x = data.split_features(Split::Train);
  const Vector y = data.split_targets(Split::Train);
  const std::size_t n = x.rows();
  if (n == 0) throw ShapeError("training split is empty");
  const std::size_t batch = config.full_batch ? n : std::min(config.batch_size, n);
  const bool classify = data.task == Task::BinaryClassification;
  const LossKind kind = predictive_loss(data.task);

  LinearSurrogate model = LinearSurrogate::zeros(data.dim());
  AdamState state = AdamState::fresh(data.dim() + 1);
  Rng shuffle_rng(derive_seed(config.seed, streams::kShuffle));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);

  auto outputs = [&](const Matrix& batch_x) {
    Vector z = model.predict_batch(batch_x);
    if (classify) {
      for (double& v : z) v = 1.0 / (1.0 + std::exp(-v));
    }
    return z;
  };

  TrainResult result;
  TrainReport& report = result.report;
  report.method = method_tag(config);
  report.seed = config.seed;
  report.task_metric_name = classify ? "f1" : "mse";
  Vector params;

  for (std::size_t epoch = 0; epoch < config.max_epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), shuffle_rng);
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t stop = std::min(n, start + batch);
      std::span<const std::size_t> idx(order.data() + start, stop - start);
      const Matrix xb = x.select_rows(idx);
      Vector yb(idx.size());
      for (std::size_t k = 0; k < idx.size(); ++k) yb[k] = y[idx[k]];
      const Vector out = outputs(xb);
      Vector dz = upstream_derivative(out, yb, kind);
      if (classify) {
        for (std::size_t i = 0; i < dz.size(); ++i) dz[i] *= out[i] * (1.0 - out[i]);
      }
      Vector grad(data.dim() + 1, 0.0);
      for (std::size_t i = 0; i < xb.rows(); ++i) {
        axpy(dz[i], xb.row(i), std::span<double>(grad.data(), data.dim()));
        grad.back() += dz[i];
      }
      params = model.flatten();
      adam_step(params, grad, state, config.lr_theta);
      model.unflatten(params);
    }
    const double loss = loss_pred(outputs(x), y, kind);
    if (!std::isfinite(loss)) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch) + ": non-finite loss");
    }
    report.history.push_back({loss, 0.0, 1.0});
    report.epochs_run = epoch + 1;
  }
  result.surrogate = std::move(model);
  return result;
}

TrainResult train(const Dataset& data, const TrainConfig& config) {
  switch (config.method) {
    case Method::MOO: return train_joint_moo(data, config);
    case Method::STL: return train_stl(data, config);
    case Method::UNI: return train_weighted(data, config, AlphaSchedule::uni());
    case Method::GS: return train_weighted(data, config, AlphaSchedule::fixed(config.gs_alpha));
    case Method::RND: return train_weighted(data, config, AlphaSchedule::random());
    case Method::LINEAR: return train_linear(data, config);
    case Method::JSEP: return train_jsep(data, config);
    case Method::JDIST: {
      // Teacher and student share the max_epochs budget of every other method.
      TrainConfig teacher_config = config;
      const std::size_t teacher_epochs =
          config.teacher_epochs == 0 ? config.max_epochs / 2 : config.teacher_epochs;
      teacher_config.teacher_epochs = std::max<std::size_t>(1, teacher_epochs);
      const Mlp teacher = train_predictor(data, teacher_config);
      TrainConfig student_config = config;
      student_config.max_epochs =
          std::max<std::size_t>(1, config.max_epochs - std::min(config.max_epochs, teacher_epochs));
      return train_jdist(data, student_config, teacher);
    }
  }
  throw std::invalid_argument("train: unknown method");
}

LocalFit fit_local_surrogate(const Mlp& f, const Matrix& neighborhood) {
  const LeastSquaresFit fit = fit_least_squares(neighborhood, f.forward_batch(neighborhood));
  return {fit.surrogate, fit.rank_deficient};
}

SurrogateProvider local_surrogate_provider(const Mlp& f, NeighborhoodSpec fit_spec) {
  return [model = f, fit_spec](std::size_t index, std::span<const double> x) {
    NeighborhoodSpec instance = fit_spec;
    instance.seed = derive_seed(fit_spec.seed, index);
    return fit_local_surrogate(model, make_neighborhood(x, instance)).surrogate;
  };
}

Vector predict(const TrainResult& result, const Matrix& batch, Task task) {
  if (result.black_box) return result.black_box->forward_batch(batch);
  Vector z = result.surrogate.predict_batch(batch);
  if (task == Task::BinaryClassification) {
    for (double& v : z) v = 1.0 / (1.0 + std::exp(-v));
  }
  return z;
}

void evaluate(TrainResult& result, const Dataset& data) {
  const Matrix x = data.split_features(Split::Test);
  const Vector y = data.split_targets(Split::Test);
  if (x.rows() == 0) throw ShapeError("evaluate: test split is empty");
  const Vector out = predict(result, x, data.task);
  if (data.task == Task::BinaryClassification) {
    std::vector<int> truth(y.size());
    for (std::size_t i = 0; i < y.size(); ++i) truth[i] = y[i] == 1.0 ? 1 : 0;
    result.report.task_metric = f1_score(to_labels(out), truth);
  } else {
    result.report.task_metric = mse_metric(out, y);
  }
  if (result.black_box) {
    result.report.gf = global_fidelity(*result.black_box, result.surrogate, x);
  } else {
    result.report.gf.reset();
  }
}

}  // namespace moosurr
