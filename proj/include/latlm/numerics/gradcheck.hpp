#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>

#include "latlm/numerics/autodiff.hpp"

namespace latlm::num {

struct GradCheckOptions {
  double step = 1e-3;
  std::size_t samples_per_tensor = 8;
  std::uint64_t seed = 0;
};

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t coordinates_checked = 0;
};

// Builds the loss on a tape; must bind trainable weights via Tape::param on
// the same ParamSet handed to grad_check and must be deterministic.
using LossBuilder = std::function<Var(Tape&)>;

// Compares backward() against the five-point central difference
// (8 (f(x+h) - f(x-h)) - (f(x+2h) - f(x-2h))) / 12h on sampled coordinates of every tensor (all of them
// when a tensor has fewer than `samples_per_tensor`). The relative error of a
// coordinate is |a - n| / max(|a|, |n|, 1e-8). Parameter values are restored
// and gradients cleared on return.
GradCheckResult grad_check(const LossBuilder& loss_fn, ParamSet& params,
                           const GradCheckOptions& options = {});

}  // namespace latlm::num
