#include "latlm/numerics/adam.hpp"

#include <cmath>

#include "latlm/errors.hpp"

namespace latlm::num {

void adam_step(ParamSet& params, AdamState& state, double lr, const AdamHyper& hyper) {
  bool any = false;
  for (const auto& [_, p] : params) any = any || p.grad_populated;
  if (!any) throw NumericError("adam_step: no parameter has a populated gradient");

  ++state.step;
  const double t = static_cast<double>(state.step);
  const double correction1 = 1.0 - std::pow(hyper.beta1, t);
  const double correction2 = 1.0 - std::pow(hyper.beta2, t);

  for (auto& [name, p] : params) {
    if (!p.grad_populated) continue;
    auto [mit, fresh_m] = state.first_moment.try_emplace(name, p.value.shape());
    auto [vit, fresh_v] = state.second_moment.try_emplace(name, p.value.shape());
    Tensor& m = mit->second;
    Tensor& v = vit->second;
    if (!m.same_shape(p.value) || !v.same_shape(p.value)) {
      throw ShapeError("adam_step: moment shape mismatch for " + name);
    }
    for (std::size_t i = 0; i < p.value.size(); ++i) {
      const double g = p.grad[i];
      m[i] = hyper.beta1 * m[i] + (1.0 - hyper.beta1) * g;
      v[i] = hyper.beta2 * v[i] + (1.0 - hyper.beta2) * g * g;
      const double m_hat = m[i] / correction1;
      const double v_hat = v[i] / correction2;
      p.value[i] -= lr * m_hat / (std::sqrt(v_hat) + hyper.epsilon);
    }
  }
  params.zero_grad();
}

}  // namespace latlm::num
