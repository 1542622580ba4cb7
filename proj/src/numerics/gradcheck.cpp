#include "latlm/numerics/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

namespace latlm::num {

namespace {

double evaluate(const LossBuilder& loss_fn) {
  Tape tape;
  return loss_fn(tape).item();
}

}  // namespace

GradCheckResult grad_check(const LossBuilder& loss_fn, ParamSet& params,
                           const GradCheckOptions& options) {
  params.zero_grad();
  {
    Tape tape;
    tape.backward(loss_fn(tape));
  }

  GradCheckResult result;
  std::mt19937_64 rng(options.seed);
  for (auto& [name, p] : params) {
    const std::size_t n = p.value.size();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (n > options.samples_per_tensor) {
      // Partial Fisher-Yates: the first `samples_per_tensor` slots are a
      // uniform sample without replacement.
      for (std::size_t i = 0; i < options.samples_per_tensor; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, n - 1);
        std::swap(coords[i], coords[pick(rng)]);
      }
      coords.resize(options.samples_per_tensor);
    }
    for (std::size_t idx : coords) {
      const double saved = p.value[idx];
      auto at = [&](double offset) {
        p.value[idx] = saved + offset;
        return evaluate(loss_fn);
      };
      const double h = options.step;
      const double near = at(h) - at(-h);
      const double far = at(2.0 * h) - at(-2.0 * h);
      p.value[idx] = saved;

      const double numeric = (8.0 * near - far) / (12.0 * h);
      const double analytic = p.grad[idx];
      const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
      const double rel = std::abs(analytic - numeric) / denom;
      ++result.coordinates_checked;
      if (result.worst_param.empty() || rel > result.max_rel_error) {
        result.max_rel_error = rel;
        result.worst_param = name;
        result.worst_index = idx;
        result.worst_analytic = analytic;
        result.worst_numeric = numeric;
      }
    }
  }
  params.zero_grad();
  return result;
}

}  // namespace latlm::num
