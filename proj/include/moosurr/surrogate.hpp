#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "moosurr/linalg.hpp"

namespace moosurr {

/// Interpretable linear model g(x) = phi . x + bias.
struct LinearSurrogate {
  Vector phi;
  double bias = 0.0;

  static LinearSurrogate zeros(std::size_t dim) { return {Vector(dim, 0.0), 0.0}; }

  std::size_t dim() const { return phi.size(); }
  double predict(std::span<const double> x) const;
  Vector predict_batch(const Matrix& batch) const;

  /// (phi..., bias) in one vector, the layout used by the surrogate optimizer.
  Vector flatten() const;
  void unflatten(std::span<const double> params);

  bool operator==(const LinearSurrogate&) const = default;
};

/// Gradient of the batch-mean Point Fidelity w.r.t. (phi, bias).
/// `residuals[i]` = f(x_i) - g(x_i). Result has length dim + 1, bias last.
Vector surrogate_grad_phi(const LinearSurrogate& g, const Matrix& batch,
                          std::span<const double> residuals);

struct FeatureImportanceEntry {
  std::string feature;
  double coefficient = 0.0;
  std::size_t rank = 0;  // 1 = largest |coefficient|
};

/// Entries ordered by rank; ties keep feature index order.
using FeatureImportance = std::vector<FeatureImportanceEntry>;

FeatureImportance explain(const LinearSurrogate& g, std::span<const std::string> feature_names);

struct LeastSquaresFit {
  LinearSurrogate surrogate;
  bool rank_deficient = false;
};

/// Unweighted least-squares fit of `targets` on the rows of `design` plus an
/// intercept. Uses the normal equations; when they are singular the fit falls
/// back to gradient descent from zero, which converges to the minimum-norm
/// solution, and the result is flagged.
LeastSquaresFit fit_least_squares(const Matrix& design, std::span<const double> targets);

}  // namespace moosurr
