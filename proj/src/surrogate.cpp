#include "moosurr/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "moosurr/errors.hpp"

namespace moosurr {

double LinearSurrogate::predict(std::span<const double> x) const {
  if (x.size() != phi.size()) {
    throw ShapeError("surrogate_predict: input length " + std::to_string(x.size()) +
                     " != surrogate dim " + std::to_string(phi.size()));
  }
  return dot(phi, x) + bias;
}

Vector LinearSurrogate::predict_batch(const Matrix& batch) const {
  if (batch.cols() != phi.size()) {
    throw ShapeError("surrogate_predict: batch has " + std::to_string(batch.cols()) +
                     " columns, surrogate dim " + std::to_string(phi.size()));
  }
  Vector out(batch.rows());
  for (std::size_t i = 0; i < batch.rows(); ++i) out[i] = dot(phi, batch.row(i)) + bias;
  return out;
}

Vector LinearSurrogate::flatten() const {
  Vector out(phi);
  out.push_back(bias);
  return out;
}

void LinearSurrogate::unflatten(std::span<const double> params) {
  require_same_size(params.size(), phi.size() + 1, "surrogate unflatten");
  std::copy(params.begin(), params.end() - 1, phi.begin());
  bias = params.back();
}

Vector surrogate_grad_phi(const LinearSurrogate& g, const Matrix& batch,
                          std::span<const double> residuals) {
  require_same_size(residuals.size(), batch.rows(), "surrogate_grad_phi residuals");
  require_same_size(batch.cols(), g.dim(), "surrogate_grad_phi features");
  Vector grad(g.dim() + 1, 0.0);
  if (batch.rows() == 0) return grad;
  const double scale = -2.0 / static_cast<double>(batch.rows());
  for (std::size_t i = 0; i < batch.rows(); ++i) {
    const double r = scale * residuals[i];
    auto x = batch.row(i);
    for (std::size_t j = 0; j < x.size(); ++j) grad[j] += r * x[j];
    grad.back() += r;
  }
  return grad;
}

FeatureImportance explain(const LinearSurrogate& g, std::span<const std::string> feature_names) {
  require_same_size(feature_names.size(), g.dim(), "explain feature names");
  std::vector<std::size_t> order(g.dim());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return std::abs(g.phi[a]) > std::abs(g.phi[b]);
  });
  FeatureImportance out;
  out.reserve(order.size());
  for (std::size_t r = 0; r < order.size(); ++r) {
    out.push_back({feature_names[order[r]], g.phi[order[r]], r + 1});
  }
  return out;
}

namespace {

// Cholesky solve of the SPD system A x = b in place. Returns false when a
// pivot collapses relative to the largest diagonal entry.
bool cholesky_solve(Matrix a, Vector& b) {
  const std::size_t n = a.rows();
  double max_diag = 0.0;
  for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, a(i, i));
  const double floor = 1e-10 * std::max(1.0, max_diag);
  for (std::size_t j = 0; j < n; ++j) {
    double d = a(j, j);
    for (std::size_t k = 0; k < j; ++k) d -= a(j, k) * a(j, k);
    if (!(d > floor)) return false;
    const double l = std::sqrt(d);
    a(j, j) = l;
    for (std::size_t i = j + 1; i < n; ++i) {
      double s = a(i, j);
      for (std::size_t k = 0; k < j; ++k) s -= a(i, k) * a(j, k);
      a(i, j) = s / l;
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    double s = b[i];
    for (std::size_t k = 0; k < i; ++k) s -= a(i, k) * b[k];
    b[i] = s / a(i, i);
  }
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t k = i + 1; k < n; ++k) s -= a(k, i) * b[k];
    b[i] = s / a(i, i);
  }
  return true;
}

Vector mat_vec(const Matrix& a, std::span<const double> x) {
  Vector out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) out[i] = dot(a.row(i), x);
  return out;
}

// Gradient descent on the quadratic 0.5 x'Ax - b'x from zero. Iterates stay
// in the range of A, so the limit is the minimum-norm minimizer.
Vector minimum_norm_descent(const Matrix& a, std::span<const double> b) {
  const std::size_t n = a.rows();
  Vector v(n, 1.0);
  double lambda_max = 0.0;
  for (int it = 0; it < 100; ++it) {
    Vector w = mat_vec(a, v);
    const double wn = norm(w);
    if (wn == 0.0) break;
    lambda_max = wn / norm(v);
    for (std::size_t i = 0; i < n; ++i) v[i] = w[i] / wn;
  }
  Vector x(n, 0.0);
  if (lambda_max == 0.0) return x;
  const double step = 1.0 / (1.05 * lambda_max);
  for (int it = 0; it < 20000; ++it) {
    Vector grad = mat_vec(a, x);
    for (std::size_t i = 0; i < n; ++i) grad[i] -= b[i];
    if (norm(grad) < 1e-13 * std::max(1.0, lambda_max)) break;
    axpy(-step, grad, x);
  }
  return x;
}

}  // namespace

LeastSquaresFit fit_least_squares(const Matrix& design, std::span<const double> targets) {
  require_same_size(targets.size(), design.rows(), "least squares targets");
  if (design.rows() == 0) throw ShapeError("least squares: empty design");
  const std::size_t d = design.cols();
  const std::size_t p = d + 1;
  const double inv_n = 1.0 / static_cast<double>(design.rows());

  // Normal equations on the intercept-augmented design, scaled by 1/n.
  Matrix gram(p, p);
  Vector rhs(p, 0.0);
  for (std::size_t i = 0; i < design.rows(); ++i) {
    auto x = design.row(i);
    for (std::size_t a = 0; a < p; ++a) {
      const double xa = a < d ? x[a] : 1.0;
      rhs[a] += xa * targets[i];
      for (std::size_t b = 0; b <= a; ++b) gram(a, b) += xa * (b < d ? x[b] : 1.0);
    }
  }
  for (std::size_t a = 0; a < p; ++a) {
    rhs[a] *= inv_n;
    for (std::size_t b = 0; b <= a; ++b) {
      gram(a, b) *= inv_n;
      gram(b, a) = gram(a, b);
    }
  }

  LeastSquaresFit fit{LinearSurrogate::zeros(d), false};
  Vector solution = rhs;
  if (!cholesky_solve(gram, solution)) {
    fit.rank_deficient = true;
    solution = minimum_norm_descent(gram, rhs);
  }
  fit.surrogate.unflatten(solution);
  return fit;
}

}  // namespace moosurr
