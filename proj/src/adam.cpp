#include "moosurr/adam.hpp"

#include <cmath>

#include "moosurr/errors.hpp"

namespace moosurr {

void adam_step(std::span<double> params, std::span<const double> grad, AdamState& state,
               double lr) {
  require_same_size(params.size(), grad.size(), "adam_step gradient");
  require_same_size(params.size(), state.first_moment.size(), "adam_step first moment");
  require_same_size(params.size(), state.second_moment.size(), "adam_step second moment");
  if (!all_finite(grad)) throw NumericError("adam_step: non-finite gradient entry");

  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double correction1 = 1.0 - std::pow(state.beta1, t);
  const double correction2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    double& m = state.first_moment[i];
    double& v = state.second_moment[i];
    m = state.beta1 * m + (1.0 - state.beta1) * grad[i];
    v = state.beta2 * v + (1.0 - state.beta2) * grad[i] * grad[i];
    const double m_hat = m / correction1;
    const double v_hat = v / correction2;
    params[i] -= lr * m_hat / (std::sqrt(v_hat) + state.epsilon);
  }
}

}  // namespace moosurr
