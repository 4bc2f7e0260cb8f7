#pragma once

#include <span>

#include "moosurr/linalg.hpp"

namespace moosurr {

/// Min-norm point of the segment between two gradients.
struct AlphaSolution {
  double alpha = 0.5;          // weight of the predictive gradient
  double combined_norm = 0.0;  // |alpha g_pred + (1 - alpha) g_pf|
  bool clipped = false;        // unconstrained minimizer fell outside [0, 1]
};

/// Denominators |g_pred - g_pf|^2 below this are treated as equal gradients.
inline constexpr double kAlphaDenominatorFloor = 1e-24;
inline constexpr double kDefaultStationarityTol = 1e-6;

/// Closed-form two-objective MGDA weight:
///   alpha = clip(((g_pf - g_pred) . g_pf) / |g_pred - g_pf|^2, 0, 1)
/// and alpha = 0.5 when the gradients coincide.
AlphaSolution solve_alpha(std::span<const double> g_pred, std::span<const double> g_pf);

Vector combine_direction(double alpha, std::span<const double> g_pred, std::span<const double> g_pf);

bool is_pareto_stationary(std::span<const double> g_pred, std::span<const double> g_pf,
                          double tol = kDefaultStationarityTol);

/// Pareto dominance for minimized objectives: a <= b everywhere and a < b somewhere.
bool dominates(std::span<const double> a, std::span<const double> b);

}  // namespace moosurr
