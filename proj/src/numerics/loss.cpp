#include "latlm/numerics/loss.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "latlm/errors.hpp"

namespace latlm::num {

double SparseDistribution::total() const {
  double t = 0.0;
  for (const auto& [_, p] : entries) t += p;
  return t;
}

double SparseDistribution::prob(std::size_t id) const {
  double p = 0.0;
  for (const auto& [k, v] : entries) {
    if (k == id) p += v;
  }
  return p;
}

double log_sum_exp(std::span<const double> logits) {
  if (logits.empty()) throw ShapeError("log_sum_exp of an empty vector");
  if (!all_finite(logits)) throw NumericError("non-finite logits");
  const double m = *std::max_element(logits.begin(), logits.end());
  double s = 0.0;
  for (double z : logits) s += std::exp(z - m);
  return m + std::log(s);
}

std::vector<double> softmax(std::span<const double> logits) {
  if (!all_finite(logits)) throw NumericError("softmax: non-finite logits");
  std::vector<double> out(logits.begin(), logits.end());
  if (out.empty()) return out;
  const double m = *std::max_element(out.begin(), out.end());
  double s = 0.0;
  for (double& z : out) {
    z = std::exp(z - m);
    s += z;
  }
  for (double& z : out) z /= s;
  return out;
}

Tensor softmax(const Tensor& logits, std::size_t axis) {
  if (axis >= logits.rank()) {
    throw ShapeError("softmax axis " + std::to_string(axis) + " out of range for shape " +
                     shape_string(logits.shape()));
  }
  if (!all_finite(logits.values())) throw NumericError("softmax: non-finite logits");
  std::size_t outer = 1, inner = 1;
  for (std::size_t i = 0; i < axis; ++i) outer *= logits.dim(i);
  for (std::size_t i = axis + 1; i < logits.rank(); ++i) inner *= logits.dim(i);
  const std::size_t n = logits.dim(axis);

  Tensor out = logits;
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t in = 0; in < inner; ++in) {
      auto at = [&](std::size_t k) -> double& { return out[(o * n + k) * inner + in]; };
      double m = -std::numeric_limits<double>::infinity();
      for (std::size_t k = 0; k < n; ++k) m = std::max(m, at(k));
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        at(k) = std::exp(at(k) - m);
        s += at(k);
      }
      for (std::size_t k = 0; k < n; ++k) at(k) /= s;
    }
  }
  return out;
}

void check_distribution(const SparseDistribution& target, std::size_t vocab_size) {
  for (const auto& [id, p] : target.entries) {
    if (id >= vocab_size) {
      throw ShapeError("target id " + std::to_string(id) + " outside vocabulary of size " +
                       std::to_string(vocab_size));
    }
    if (!(p >= 0.0) || !std::isfinite(p)) throw NumericError("target has invalid mass");
  }
  if (std::abs(target.total() - 1.0) > 1e-6) {
    throw NumericError("target distribution sums to " + std::to_string(target.total()));
  }
}

double kl_divergence(const SparseDistribution& target, std::span<const double> logits) {
  check_distribution(target, logits.size());
  const double lse = log_sum_exp(logits);
  double kl = 0.0;
  for (const auto& [id, p] : target.entries) {
    if (p > 0.0) kl += p * (std::log(p) - (logits[id] - lse));
  }
  return kl;
}

double cross_entropy(const SparseDistribution& target, std::span<const double> logits) {
  check_distribution(target, logits.size());
  const double lse = log_sum_exp(logits);
  double ce = 0.0;
  for (const auto& [id, p] : target.entries) {
    if (p > 0.0) ce -= p * (logits[id] - lse);
  }
  return ce;
}

}  // namespace latlm::num
