#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <unordered_map>
#include <utility>
#include <vector>

#include "latlm/numerics/loss.hpp"
#include "latlm/numerics/params.hpp"
#include "latlm/numerics/tensor.hpp"

namespace latlm::num {

class Tape;

// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  std::size_t id = 0;

  const Tensor& value() const;
  std::size_t size() const { return value().size(); }
  double item() const { return value()[0]; }
};

// Reverse-mode recording. Operations evaluate eagerly and, when any input
// needs a gradient, push a closure that propagates the output gradient to
// the inputs. Nodes are appended in evaluation order, so walking the tape
// backwards is a valid reverse topological order.
class Tape {
 public:
  // (tape, output value, output gradient)
  using Backward = std::function<void(Tape&, const Tensor&, const Tensor&)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(Tensor value);
  // References `value` without copying; the referent must outlive the tape.
  Var constant_view(const Tensor& value);
  // Trainable leaf. Gradients accumulate straight into `p.grad`.
  Var param(Parameter& p);

  const Tensor& value(Var v) const;
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  Var record(Tensor value, bool requires_grad, Backward backward);

  // Gradient buffer of a node, allocated (zeroed) on first use.
  Tensor& grad(std::size_t id);

  // Seeds d(loss)/d(loss) = 1 and runs every recorded closure in reverse.
  // Throws ShapeError for a non-scalar loss and NumericError naming the first
  // parameter that received a non-finite gradient.
  void backward(Var loss);

 private:
  struct Node {
    Tensor owned;
    const Tensor* view = nullptr;
    Tensor grad;
    Parameter* param = nullptr;
    bool requires_grad = false;
    Backward backward;
  };

  std::vector<Node> nodes_;
  std::unordered_map<const Parameter*, std::size_t> bound_;
};

Var zeros(Tape& tape, std::size_t n);

Var add(Var a, Var b);
Var mul(Var a, Var b);
Var scale(Var a, double factor);
Var sigmoid(Var a);
Var tanh(Var a);

// m: [rows, cols], x: [cols] -> [rows]
Var matvec(Var m, Var x);

Var slice(Var a, std::size_t offset, std::size_t length);
Var concat(std::span<const Var> parts);
// Row `r` of a [rows, cols] table.
Var row(Var table, std::size_t r);

// sum_k weights[k] * xs[k] with constant weights.
Var weighted_sum(std::span<const Var> xs, std::span<const double> weights);
// sum_k weights[k] * xs[k] where `weights` is itself a recorded vector.
Var mix(std::span<const Var> xs, Var weights);
// s * a for a recorded one-element `s`.
Var scale_by(Var a, Var s);

Var softmax(Var logits);
// Elementwise maximum; the gradient goes to the first maximiser.
Var max_pool(std::span<const Var> xs);

Var sum(Var a);
Var dot(Var a, Var b);
Var mean(std::span<const Var> scalars);

// KL(target || softmax(logits)) as a scalar node.
Var kl_divergence(Var logits, const SparseDistribution& target);
Var cross_entropy(Var logits, std::size_t label);

}  // namespace latlm::num
