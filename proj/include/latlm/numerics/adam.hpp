#pragma once

#include <cstddef>
#include <map>
#include <string>

#include "latlm/numerics/params.hpp"

namespace latlm::num {

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct AdamState {
  std::map<std::string, Tensor> first_moment;
  std::map<std::string, Tensor> second_moment;
  std::size_t step = 0;
};

// One bias-corrected adam update over every parameter whose gradient is
// populated; gradients are cleared afterwards. Throws NumericError when no
// parameter carries a gradient.
void adam_step(ParamSet& params, AdamState& state, double lr, const AdamHyper& hyper = {});

}  // namespace latlm::num
