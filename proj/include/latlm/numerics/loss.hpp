#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

#include "latlm/numerics/tensor.hpp"

namespace latlm::num {

// Probability mass over vocabulary ids; ids absent from `entries` carry 0.
struct SparseDistribution {
  std::vector<std::pair<std::size_t, double>> entries;

  double total() const;
  double prob(std::size_t id) const;
};

double log_sum_exp(std::span<const double> logits);

// Max-subtracted softmax along `axis`. Throws NumericError on non-finite input.
Tensor softmax(const Tensor& logits, std::size_t axis);
std::vector<double> softmax(std::span<const double> logits);

// sum_w p(w) * (log p(w) - log q(w)) with q = softmax(logits); zero-mass
// terms contribute nothing. Throws NumericError when the target does not
// sum to 1 within 1e-6 and ShapeError when an id is outside the logits.
double kl_divergence(const SparseDistribution& target, std::span<const double> logits);

// -sum_w p(w) log q(w); equals kl_divergence plus the target entropy.
double cross_entropy(const SparseDistribution& target, std::span<const double> logits);

void check_distribution(const SparseDistribution& target, std::size_t vocab_size);

}  // namespace latlm::num
