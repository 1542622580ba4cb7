#include "latlm/numerics/params.hpp"

#include "latlm/errors.hpp"

namespace latlm::num {

Parameter& ParamSet::add(const std::string& name, Tensor value) {
  if (params_.count(name)) throw ShapeError("duplicate parameter name: " + name);
  Parameter p;
  p.name = name;
  p.grad = Tensor(value.shape());
  p.value = std::move(value);
  return params_.emplace(name, std::move(p)).first->second;
}

Parameter& ParamSet::at(const std::string& name) {
  auto it = params_.find(name);
  if (it == params_.end()) throw ShapeError("unknown parameter: " + name);
  return it->second;
}

const Parameter& ParamSet::at(const std::string& name) const {
  auto it = params_.find(name);
  if (it == params_.end()) throw ShapeError("unknown parameter: " + name);
  return it->second;
}

std::vector<std::string> ParamSet::names() const {
  std::vector<std::string> out;
  out.reserve(params_.size());
  for (const auto& [name, _] : params_) out.push_back(name);
  return out;
}

std::size_t ParamSet::num_scalars() const {
  std::size_t n = 0;
  for (const auto& [_, p] : params_) n += p.value.size();
  return n;
}

void ParamSet::zero_grad() {
  for (auto& [_, p] : params_) {
    p.grad.fill(0.0);
    p.grad_populated = false;
  }
}

std::uint64_t ParamSet::checksum() const {
  std::uint64_t hash = 1469598103934665603ULL;
  for (const auto& [name, p] : params_) {
    for (unsigned char c : name) {
      hash ^= c;
      hash *= 1099511628211ULL;
    }
    hash ^= num::checksum(p.value);
    hash *= 1099511628211ULL;
  }
  return hash;
}

void copy_values(const ParamSet& src, ParamSet& dst) {
  for (const auto& [name, p] : src) {
    auto& target = dst.at(name);
    if (!target.value.same_shape(p.value)) {
      throw ShapeError("parameter " + name + ": shape " + shape_string(p.value.shape()) +
                       " does not match " + shape_string(target.value.shape()));
    }
    target.value = p.value;
  }
}

}  // namespace latlm::num
