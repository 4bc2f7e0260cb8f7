#pragma once

#include <cstdint>
#include <span>

#include "moosurr/linalg.hpp"

namespace moosurr {

struct AdamState {
  Vector first_moment;
  Vector second_moment;
  std::uint64_t step_count = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  static AdamState fresh(std::size_t n) { return {Vector(n, 0.0), Vector(n, 0.0)}; }
};

/// In-place bias-corrected Adam update. Throws NumericError on a non-finite
/// gradient before touching params or state.
void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state,
               double lr);

}  // namespace moosurr
