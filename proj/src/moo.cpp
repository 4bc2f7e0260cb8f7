#include "moosurr/moo.hpp"

#include <algorithm>
#include <stdexcept>

#include "moosurr/errors.hpp"

namespace moosurr {

AlphaSolution solve_alpha(std::span<const double> g_pred, std::span<const double> g_pf) {
  require_same_size(g_pred.size(), g_pf.size(), "solve_alpha");
  if (!all_finite(g_pred) || !all_finite(g_pf)) throw NumericError("solve_alpha: non-finite gradient");

  // Minimizer of |alpha g_pred + (1 - alpha) g_pf|^2 = |g_pf + alpha (g_pred - g_pf)|^2.
  double numerator = 0.0;
  double denominator = 0.0;
  for (std::size_t i = 0; i < g_pred.size(); ++i) {
    const double diff = g_pred[i] - g_pf[i];
    numerator -= diff * g_pf[i];
    denominator += diff * diff;
  }

  AlphaSolution sol;
  if (denominator < kAlphaDenominatorFloor) {
    sol.alpha = 0.5;
  } else {
    const double raw = numerator / denominator;
    sol.alpha = std::clamp(raw, 0.0, 1.0);
    sol.clipped = raw != sol.alpha;
  }
  sol.combined_norm = norm(combine_direction(sol.alpha, g_pred, g_pf));
  return sol;
}

Vector combine_direction(double alpha, std::span<const double> g_pred,
                         std::span<const double> g_pf) {
  require_same_size(g_pred.size(), g_pf.size(), "combine_direction");
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw std::invalid_argument("combine_direction: alpha outside [0,1]");
  Vector d(g_pred.size());
  for (std::size_t i = 0; i < d.size(); ++i) d[i] = alpha * g_pred[i] + (1.0 - alpha) * g_pf[i];
  return d;
}

bool is_pareto_stationary(std::span<const double> g_pred, std::span<const double> g_pf, double tol) {
  if (!(tol > 0.0)) throw std::invalid_argument("is_pareto_stationary: tol must be positive");
  return solve_alpha(g_pred, g_pf).combined_norm <= tol;
}

bool dominates(std::span<const double> a, std::span<const double> b) {
  require_same_size(a.size(), b.size(), "dominates");
  bool strictly_better = false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] > b[i]) return false;
    if (a[i] < b[i]) strictly_better = true;
  }
  return strictly_better;
}

}  // namespace moosurr
