#include "moosurr/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "moosurr/errors.hpp"

namespace moosurr {

namespace {

void check_inputs(std::span<const double> a, std::span<const double> b, const char* what) {
  require_same_size(a.size(), b.size(), what);
  if (!all_finite(a) || !all_finite(b)) {
    throw NumericError(std::string(what) + ": non-finite input");
  }
}

void check_binary(std::span<const double> targets) {
  for (double t : targets) {
    if (t != 0.0 && t != 1.0) throw std::invalid_argument("binary cross-entropy: target not in {0,1}");
  }
}

double clamp_probability(double p) { return std::clamp(p, kBceClamp, 1.0 - kBceClamp); }

double mean_squared_difference(std::span<const double> a, std::span<const double> b) {
  if (a.empty()) return 0.0;
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double r = a[i] - b[i];
    s += r * r;
  }
  return s / static_cast<double>(a.size());
}

}  // namespace

double loss_pred(std::span<const double> outputs, std::span<const double> targets, LossKind kind) {
  check_inputs(outputs, targets, "loss_pred");
  switch (kind) {
    case LossKind::MSE:
      return mean_squared_difference(outputs, targets);
    case LossKind::BinaryCrossEntropy: {
      check_binary(targets);
      if (outputs.empty()) return 0.0;
      double s = 0.0;
      for (std::size_t i = 0; i < outputs.size(); ++i) {
        const double p = clamp_probability(outputs[i]);
        s -= targets[i] == 1.0 ? std::log(p) : std::log1p(-p);
      }
      return s / static_cast<double>(outputs.size());
    }
    default:
      throw std::invalid_argument("loss_pred: kind must be MSE or BinaryCrossEntropy");
  }
}

double loss_point_fidelity(std::span<const double> f_out, std::span<const double> g_out) {
  check_inputs(f_out, g_out, "loss_point_fidelity");
  return mean_squared_difference(f_out, g_out);
}

double loss_distill(std::span<const double> teacher_out, std::span<const double> student_out) {
  check_inputs(teacher_out, student_out, "loss_distill");
  return mean_squared_difference(teacher_out, student_out);
}

double loss_value(std::span<const double> outputs, std::span<const double> targets, LossKind kind) {
  switch (kind) {
    case LossKind::PointFidelity: return loss_point_fidelity(outputs, targets);
    case LossKind::Distill: return loss_distill(targets, outputs);
    default: return loss_pred(outputs, targets, kind);
  }
}

Vector upstream_derivative(std::span<const double> outputs, std::span<const double> targets,
                           LossKind kind) {
  check_inputs(outputs, targets, "upstream_derivative");
  Vector out(outputs.size());
  if (outputs.empty()) return out;
  const double inv_n = 1.0 / static_cast<double>(outputs.size());
  switch (kind) {
    case LossKind::MSE:
    case LossKind::PointFidelity:
    case LossKind::Distill:
      for (std::size_t i = 0; i < outputs.size(); ++i) {
        out[i] = 2.0 * (outputs[i] - targets[i]) * inv_n;
      }
      break;
    case LossKind::BinaryCrossEntropy:
      check_binary(targets);
      for (std::size_t i = 0; i < outputs.size(); ++i) {
        const double p = clamp_probability(outputs[i]);
        out[i] = (p - targets[i]) / (p * (1.0 - p)) * inv_n;
      }
      break;
  }
  return out;
}

}  // namespace moosurr
