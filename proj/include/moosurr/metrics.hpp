#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>

#include "moosurr/linalg.hpp"
#include "moosurr/mlp.hpp"
#include "moosurr/surrogate.hpp"

namespace moosurr {

/// F1 of the positive class; 0 when precision + recall = 0.
/// Labels must be 0/1, otherwise std::invalid_argument.
double f1_score(std::span<const int> predicted, std::span<const int> truth);

/// Thresholds probabilities at 0.5.
std::vector<int> to_labels(std::span<const double> probabilities);

double mse_metric(std::span<const double> outputs, std::span<const double> targets);

/// Mean (g(x_i) - f(x_i))^2 over the rows of `data`.
double global_fidelity(const Mlp& f, const LinearSurrogate& g, const Matrix& data);

struct NeighborhoodSpec {
  enum class Kind { Gaussian, PatchDelete };

  Kind kind = Kind::Gaussian;
  std::size_t count = 10;
  double sigma2 = 0.1;
  // patch deletion: `num_patches` squares of side `patch_size` on a height x width image
  std::size_t patch_size = 4;
  std::size_t num_patches = 3;
  std::size_t height = 0;
  std::size_t width = 0;
  std::uint64_t seed = 0;

  static NeighborhoodSpec gaussian(std::size_t count, double sigma2, std::uint64_t seed);
  static NeighborhoodSpec patches(std::size_t count, std::size_t height, std::size_t width,
                                  std::uint64_t seed, std::size_t patch_size = 4,
                                  std::size_t num_patches = 3);
};

/// `count` perturbed copies of x, deterministic in spec.seed.
Matrix make_neighborhood(std::span<const double> x, const NeighborhoodSpec& spec);

/// Mean Point Fidelity of g against f over the neighborhood of x.
double neighborhood_fidelity(const Mlp& f, const LinearSurrogate& g, std::span<const double> x,
                             const NeighborhoodSpec& spec);

/// Supplies the surrogate used for row `index` (global or fitted per instance).
using SurrogateProvider = std::function<LinearSurrogate(std::size_t index, std::span<const double> x)>;

/// Mean over rows of neighborhood_fidelity. Row i uses the neighborhood seed
/// derive_seed(spec.seed, i).
double gnf(const Mlp& f, const SurrogateProvider& surrogate_for, const Matrix& data,
           const NeighborhoodSpec& spec);

}  // namespace moosurr
