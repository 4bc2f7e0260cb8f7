#include "moosurr/metrics.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "moosurr/errors.hpp"
#include "moosurr/losses.hpp"
#include "moosurr/rng.hpp"

namespace moosurr {

double f1_score(std::span<const int> predicted, std::span<const int> truth) {
  require_same_size(predicted.size(), truth.size(), "f1_score");
  std::size_t tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < predicted.size(); ++i) {
    const int p = predicted[i];
    const int t = truth[i];
    if ((p != 0 && p != 1) || (t != 0 && t != 1)) {
      throw std::invalid_argument("f1_score: labels must be 0 or 1 (row " + std::to_string(i) + ")");
    }
    tp += static_cast<std::size_t>(p == 1 && t == 1);
    fp += static_cast<std::size_t>(p == 1 && t == 0);
    fn += static_cast<std::size_t>(p == 0 && t == 1);
  }
  // 2PR/(P+R) = 2TP/(2TP+FP+FN), which is 0/0 exactly when P+R = 0.
  const std::size_t denom = 2 * tp + fp + fn;
  if (tp == 0 || denom == 0) return 0.0;
  return 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

std::vector<int> to_labels(std::span<const double> probabilities) {
  std::vector<int> out(probabilities.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = probabilities[i] >= 0.5 ? 1 : 0;
  return out;
}

double mse_metric(std::span<const double> outputs, std::span<const double> targets) {
  return loss_pred(outputs, targets, LossKind::MSE);
}

double global_fidelity(const Mlp& f, const LinearSurrogate& g, const Matrix& data) {
  if (data.rows() == 0) throw ShapeError("global_fidelity: no rows");
  return loss_point_fidelity(f.forward_batch(data), g.predict_batch(data));
}

NeighborhoodSpec NeighborhoodSpec::gaussian(std::size_t count, double sigma2, std::uint64_t seed) {
  NeighborhoodSpec s;
  s.kind = Kind::Gaussian;
  s.count = count;
  s.sigma2 = sigma2;
  s.seed = seed;
  return s;
}

NeighborhoodSpec NeighborhoodSpec::patches(std::size_t count, std::size_t height,
                                           std::size_t width, std::uint64_t seed,
                                           std::size_t patch_size, std::size_t num_patches) {
  NeighborhoodSpec s;
  s.kind = Kind::PatchDelete;
  s.count = count;
  s.height = height;
  s.width = width;
  s.seed = seed;
  s.patch_size = patch_size;
  s.num_patches = num_patches;
  return s;
}

Matrix make_neighborhood(std::span<const double> x, const NeighborhoodSpec& spec) {
  if (spec.count == 0) throw std::invalid_argument("make_neighborhood: count must be >= 1");
  Rng rng(spec.seed);
  Matrix out(spec.count, x.size());
  for (std::size_t r = 0; r < spec.count; ++r) {
    auto row = out.row(r);
    std::copy(x.begin(), x.end(), row.begin());
  }

  if (spec.kind == NeighborhoodSpec::Kind::Gaussian) {
    if (!(spec.sigma2 > 0.0)) throw std::invalid_argument("make_neighborhood: sigma2 must be positive");
    std::normal_distribution<double> noise(0.0, std::sqrt(spec.sigma2));
    for (double& v : out.data()) v += noise(rng);
    return out;
  }

  if (spec.height * spec.width != x.size()) {
    throw std::invalid_argument("make_neighborhood: input length " + std::to_string(x.size()) +
                                " is not " + std::to_string(spec.height) + "x" +
                                std::to_string(spec.width));
  }
  if (spec.patch_size == 0 || spec.patch_size > spec.height || spec.patch_size > spec.width) {
    throw std::invalid_argument("make_neighborhood: patch of size " +
                                std::to_string(spec.patch_size) + " does not fit the image");
  }
  std::uniform_int_distribution<std::size_t> top(0, spec.height - spec.patch_size);
  std::uniform_int_distribution<std::size_t> left(0, spec.width - spec.patch_size);
  for (std::size_t r = 0; r < spec.count; ++r) {
    auto row = out.row(r);
    for (std::size_t p = 0; p < spec.num_patches; ++p) {
      const std::size_t y0 = top(rng);
      const std::size_t x0 = left(rng);
      for (std::size_t y = y0; y < y0 + spec.patch_size; ++y) {
        for (std::size_t c = x0; c < x0 + spec.patch_size; ++c) row[y * spec.width + c] = 0.0;
      }
    }
  }
  return out;
}

double neighborhood_fidelity(const Mlp& f, const LinearSurrogate& g, std::span<const double> x,
                             const NeighborhoodSpec& spec) {
  const Matrix neighbors = make_neighborhood(x, spec);
  return loss_point_fidelity(f.forward_batch(neighbors), g.predict_batch(neighbors));
}

double gnf(const Mlp& f, const SurrogateProvider& surrogate_for, const Matrix& data,
           const NeighborhoodSpec& spec) {
  if (data.rows() == 0) throw ShapeError("gnf: no rows");
  double total = 0.0;
  for (std::size_t i = 0; i < data.rows(); ++i) {
    NeighborhoodSpec instance = spec;
    instance.seed = derive_seed(spec.seed, i);
    const LinearSurrogate g = surrogate_for(i, data.row(i));
    total += neighborhood_fidelity(f, g, data.row(i), instance);
  }
  return total / static_cast<double>(data.rows());
}

}  // namespace moosurr
