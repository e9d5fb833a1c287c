#include "himo/adam.hpp"

#include <cmath>

namespace himo {

void adam_apply(AdamState& state, Tensor& param, const Tensor& grad) {
  if (param.shape != grad.shape)
    throw ShapeError("adam_apply: param " + shape_str(param.shape) + " vs grad " +
                     shape_str(grad.shape));
  if (state.first_moment.shape != param.shape)
    throw ShapeError("adam_apply: state built for " + shape_str(state.first_moment.shape) +
                     ", param is " + shape_str(param.shape));

  const AdamConfig& c = state.config;
  state.step_count += 1;
  const double t = static_cast<double>(state.step_count);
  const double bc1 = 1.0 - std::pow(c.beta1, t);
  const double bc2 = 1.0 - std::pow(c.beta2, t);

  auto& m = state.first_moment.values;
  auto& v = state.second_moment.values;
  auto& p = param.values;
  const auto& g = grad.values;
  for (std::size_t i = 0; i < p.size(); ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * g[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * g[i] * g[i];
    const double m_hat = m[i] / bc1;
    const double v_hat = v[i] / bc2;
    p[i] -= c.lr * m_hat / (std::sqrt(v_hat) + c.epsilon);
  }
}

}  // namespace himo
