#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "latlm/numerics/tensor.hpp"

namespace latlm::num {

struct Parameter {
  std::string name;
  Tensor value;
  Tensor grad;
  // Set once a backward pass or a caller has written into `grad`.
  bool grad_populated = false;
};

// Named trainable tensors with their gradient accumulators. Names are
// dot-separated paths ("lm.fwd.0.w_x"); iteration is in name order.
class ParamSet {
 public:
  using Map = std::map<std::string, Parameter>;

  Parameter& add(const std::string& name, Tensor value);
  Parameter& at(const std::string& name);
  const Parameter& at(const std::string& name) const;
  bool contains(const std::string& name) const { return params_.count(name) != 0; }
  std::vector<std::string> names() const;
  std::size_t size() const { return params_.size(); }
  std::size_t num_scalars() const;

  void zero_grad();
  std::uint64_t checksum() const;

  Map::iterator begin() { return params_.begin(); }
  Map::iterator end() { return params_.end(); }
  Map::const_iterator begin() const { return params_.begin(); }
  Map::const_iterator end() const { return params_.end(); }

 private:
  Map params_;
};

// Copies every value of `src` into the same-named entry of `dst`. Shapes must
// agree; names missing from `dst` are an error.
void copy_values(const ParamSet& src, ParamSet& dst);

}  // namespace latlm::num
