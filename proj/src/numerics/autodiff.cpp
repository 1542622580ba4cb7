#include "latlm/numerics/autodiff.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <cmath>

#include "latlm/errors.hpp"

namespace latlm::num {

namespace {

using VecMap = Eigen::Map<Eigen::VectorXd>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMajor>;
using ConstMatMap = Eigen::Map<const RowMajor>;

ConstVecMap as_vec(const Tensor& t) {
  return ConstVecMap(t.data(), static_cast<Eigen::Index>(t.size()));
}
VecMap as_vec(Tensor& t) { return VecMap(t.data(), static_cast<Eigen::Index>(t.size())); }
ConstVecMap as_vec(const Tensor& t, std::size_t offset, std::size_t n) {
  return ConstVecMap(t.data() + offset, static_cast<Eigen::Index>(n));
}
VecMap as_vec(Tensor& t, std::size_t offset, std::size_t n) {
  return VecMap(t.data() + offset, static_cast<Eigen::Index>(n));
}

Tape& tape_of(std::span<const Var> xs) {
  if (xs.empty()) throw ShapeError("operation needs at least one input");
  Tape* tape = xs.front().tape;
  for (const Var& x : xs) {
    if (x.tape != tape || tape == nullptr) throw ShapeError("vars recorded on different tapes");
  }
  return *tape;
}

Tape& same_tape(Var a, Var b) {
  if (a.tape == nullptr || a.tape != b.tape) throw ShapeError("vars recorded on different tapes");
  return *a.tape;
}

void require_same_size(Var a, Var b, const char* op) {
  if (a.size() != b.size()) {
    throw ShapeError(std::string(op) + ": size mismatch " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
}

bool any_grad(Tape& tape, std::span<const Var> xs) {
  return std::any_of(xs.begin(), xs.end(), [&](const Var& x) { return tape.requires_grad(x); });
}

Tensor flat(std::size_t n) { return Tensor(Shape{n}); }

}  // namespace

const Tensor& Var::value() const { return tape->value(*this); }

Var Tape::constant(Tensor value) {
  Node node;
  node.owned = std::move(value);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Var Tape::constant_view(const Tensor& value) {
  Node node;
  node.view = &value;
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Var Tape::param(Parameter& p) {
  if (auto it = bound_.find(&p); it != bound_.end()) return {this, it->second};
  Node node;
  node.view = &p.value;
  node.param = &p;
  node.requires_grad = true;
  nodes_.push_back(std::move(node));
  bound_.emplace(&p, nodes_.size() - 1);
  return {this, nodes_.size() - 1};
}

const Tensor& Tape::value(Var v) const {
  const Node& node = nodes_.at(v.id);
  return node.view ? *node.view : node.owned;
}

Var Tape::record(Tensor value, bool requires_grad, Backward backward) {
  Node node;
  node.owned = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return {this, nodes_.size() - 1};
}

Tensor& Tape::grad(std::size_t id) {
  Node& node = nodes_[id];
  if (node.param) {
    if (!node.param->grad.same_shape(node.param->value)) {
      node.param->grad = Tensor(node.param->value.shape());
    }
    node.param->grad_populated = true;
    return node.param->grad;
  }
  if (node.grad.empty()) node.grad = Tensor((node.view ? *node.view : node.owned).shape());
  return node.grad;
}

void Tape::backward(Var loss) {
  if (loss.tape != this) throw ShapeError("backward: loss recorded on a different tape");
  if (value(loss).size() != 1) {
    throw ShapeError("backward: loss must be scalar, got shape " +
                     shape_string(value(loss).shape()));
  }
  if (!nodes_[loss.id].requires_grad) return;
  grad(loss.id)[0] += 1.0;
  for (std::size_t i = loss.id + 1; i-- > 0;) {
    Node& node = nodes_[i];
    if (!node.backward || node.grad.empty()) continue;
    node.backward(*this, node.owned, node.grad);
  }
  for (const Node& node : nodes_) {
    if (node.param && !all_finite(node.param->grad.values())) {
      throw NumericError("non-finite gradient in parameter " + node.param->name);
    }
  }
}

Var zeros(Tape& tape, std::size_t n) { return tape.constant(flat(n)); }

Var add(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_size(a, b, "add");
  Tensor out = a.value();
  as_vec(out) += as_vec(b.value());
  const bool ga = tape.requires_grad(a), gb = tape.requires_grad(b);
  return tape.record(std::move(out), ga || gb,
                     [a, b, ga, gb](Tape& t, const Tensor&, const Tensor& g) {
                       if (ga) as_vec(t.grad(a.id)) += as_vec(g);
                       if (gb) as_vec(t.grad(b.id)) += as_vec(g);
                     });
}

Var mul(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_size(a, b, "mul");
  Tensor out = a.value();
  as_vec(out).array() *= as_vec(b.value()).array();
  const bool ga = tape.requires_grad(a), gb = tape.requires_grad(b);
  return tape.record(std::move(out), ga || gb,
                     [a, b, ga, gb](Tape& t, const Tensor&, const Tensor& g) {
                       if (ga) {
                         as_vec(t.grad(a.id)).array() +=
                             as_vec(g).array() * as_vec(b.value()).array();
                       }
                       if (gb) {
                         as_vec(t.grad(b.id)).array() +=
                             as_vec(g).array() * as_vec(a.value()).array();
                       }
                     });
}

Var scale(Var a, double factor) {
  Tape& tape = *a.tape;
  Tensor out = a.value();
  as_vec(out) *= factor;
  return tape.record(std::move(out), tape.requires_grad(a),
                     [a, factor](Tape& t, const Tensor&, const Tensor& g) {
                       as_vec(t.grad(a.id)) += factor * as_vec(g);
                     });
}

Var sigmoid(Var a) {
  Tape& tape = *a.tape;
  Tensor out = a.value();
  for (double& v : out.values()) v = 1.0 / (1.0 + std::exp(-v));
  return tape.record(std::move(out), tape.requires_grad(a),
                     [a](Tape& t, const Tensor& y, const Tensor& g) {
                       as_vec(t.grad(a.id)).array() +=
                           as_vec(g).array() * as_vec(y).array() * (1.0 - as_vec(y).array());
                     });
}

Var tanh(Var a) {
  Tape& tape = *a.tape;
  Tensor out = a.value();
  for (double& v : out.values()) v = std::tanh(v);
  return tape.record(std::move(out), tape.requires_grad(a),
                     [a](Tape& t, const Tensor& y, const Tensor& g) {
                       as_vec(t.grad(a.id)).array() +=
                           as_vec(g).array() * (1.0 - as_vec(y).array().square());
                     });
}

Var matvec(Var m, Var x) {
  Tape& tape = same_tape(m, x);
  const Tensor& mv = m.value();
  if (mv.rank() != 2 || mv.dim(1) != x.size()) {
    throw ShapeError("matvec: matrix " + shape_string(mv.shape()) + " times vector of size " +
                     std::to_string(x.size()));
  }
  const auto rows = static_cast<Eigen::Index>(mv.dim(0));
  const auto cols = static_cast<Eigen::Index>(mv.dim(1));
  Tensor out = flat(mv.dim(0));
  as_vec(out).noalias() = ConstMatMap(mv.data(), rows, cols) * as_vec(x.value());
  const bool gm = tape.requires_grad(m), gx = tape.requires_grad(x);
  return tape.record(std::move(out), gm || gx,
                     [m, x, gm, gx, rows, cols](Tape& t, const Tensor&, const Tensor& g) {
                       if (gm) {
                         MatMap(t.grad(m.id).data(), rows, cols).noalias() +=
                             as_vec(g) * as_vec(x.value()).transpose();
                       }
                       if (gx) {
                         as_vec(t.grad(x.id)).noalias() +=
                             ConstMatMap(m.value().data(), rows, cols).transpose() * as_vec(g);
                       }
                     });
}

Var slice(Var a, std::size_t offset, std::size_t length) {
  Tape& tape = *a.tape;
  if (offset + length > a.size()) {
    throw ShapeError("slice [" + std::to_string(offset) + ", " + std::to_string(offset + length) +
                     ") out of range for size " + std::to_string(a.size()));
  }
  Tensor out = flat(length);
  as_vec(out) = as_vec(a.value(), offset, length);
  return tape.record(std::move(out), tape.requires_grad(a),
                     [a, offset, length](Tape& t, const Tensor&, const Tensor& g) {
                       as_vec(t.grad(a.id), offset, length) += as_vec(g);
                     });
}

Var concat(std::span<const Var> parts) {
  Tape& tape = tape_of(parts);
  std::size_t total = 0;
  for (const Var& p : parts) total += p.size();
  Tensor out = flat(total);
  std::size_t offset = 0;
  for (const Var& p : parts) {
    as_vec(out, offset, p.size()) = as_vec(p.value());
    offset += p.size();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return tape.record(std::move(out), any_grad(tape, parts),
                     [inputs](Tape& t, const Tensor&, const Tensor& g) {
                       std::size_t off = 0;
                       for (const Var& p : inputs) {
                         const std::size_t n = p.size();
                         if (t.requires_grad(p)) as_vec(t.grad(p.id)) += as_vec(g, off, n);
                         off += n;
                       }
                     });
}

Var row(Var table, std::size_t r) {
  Tape& tape = *table.tape;
  const Tensor& tv = table.value();
  if (tv.rank() != 2 || r >= tv.dim(0)) {
    throw ShapeError("row " + std::to_string(r) + " out of range for table " +
                     shape_string(tv.shape()));
  }
  const std::size_t cols = tv.dim(1);
  Tensor out = flat(cols);
  as_vec(out) = as_vec(tv, r * cols, cols);
  return tape.record(std::move(out), tape.requires_grad(table),
                     [table, r, cols](Tape& t, const Tensor&, const Tensor& g) {
                       as_vec(t.grad(table.id), r * cols, cols) += as_vec(g);
                     });
}

Var weighted_sum(std::span<const Var> xs, std::span<const double> weights) {
  Tape& tape = tape_of(xs);
  if (weights.size() != xs.size()) throw ShapeError("weighted_sum: weight count mismatch");
  const std::size_t n = xs.front().size();
  Tensor out = flat(n);
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (xs[k].size() != n) throw ShapeError("weighted_sum: size mismatch");
    as_vec(out) += weights[k] * as_vec(xs[k].value());
  }
  std::vector<Var> inputs(xs.begin(), xs.end());
  std::vector<double> w(weights.begin(), weights.end());
  return tape.record(std::move(out), any_grad(tape, xs),
                     [inputs, w](Tape& t, const Tensor&, const Tensor& g) {
                       for (std::size_t k = 0; k < inputs.size(); ++k) {
                         if (t.requires_grad(inputs[k])) {
                           as_vec(t.grad(inputs[k].id)) += w[k] * as_vec(g);
                         }
                       }
                     });
}

Var mix(std::span<const Var> xs, Var weights) {
  Tape& tape = tape_of(xs);
  if (weights.tape != &tape) throw ShapeError("vars recorded on different tapes");
  if (weights.size() != xs.size()) throw ShapeError("mix: weight count mismatch");
  const std::size_t n = xs.front().size();
  Tensor out = flat(n);
  const Tensor& w = weights.value();
  for (std::size_t k = 0; k < xs.size(); ++k) {
    if (xs[k].size() != n) throw ShapeError("mix: size mismatch");
    as_vec(out) += w[k] * as_vec(xs[k].value());
  }
  std::vector<Var> inputs(xs.begin(), xs.end());
  const bool need = any_grad(tape, xs) || tape.requires_grad(weights);
  return tape.record(std::move(out), need, [inputs, weights](Tape& t, const Tensor&, const Tensor& g) {
    const Tensor& wv = weights.value();
    const bool gw = t.requires_grad(weights);
    for (std::size_t k = 0; k < inputs.size(); ++k) {
      if (t.requires_grad(inputs[k])) as_vec(t.grad(inputs[k].id)) += wv[k] * as_vec(g);
      if (gw) t.grad(weights.id)[k] += as_vec(g).dot(as_vec(inputs[k].value()));
    }
  });
}

Var scale_by(Var a, Var s) {
  Tape& tape = same_tape(a, s);
  if (s.size() != 1) throw ShapeError("scale_by: scale must have one element");
  Tensor out = a.value();
  as_vec(out) *= s.item();
  const bool ga = tape.requires_grad(a), gs = tape.requires_grad(s);
  return tape.record(std::move(out), ga || gs,
                     [a, s, ga, gs](Tape& t, const Tensor&, const Tensor& g) {
                       if (ga) as_vec(t.grad(a.id)) += s.item() * as_vec(g);
                       if (gs) t.grad(s.id)[0] += as_vec(g).dot(as_vec(a.value()));
                     });
}

Var softmax(Var logits) {
  Tape& tape = *logits.tape;
  Tensor out = Tensor::vector(num::softmax(logits.value().values()));
  return tape.record(std::move(out), tape.requires_grad(logits),
                     [logits](Tape& t, const Tensor& y, const Tensor& g) {
                       const double inner = as_vec(g).dot(as_vec(y));
                       as_vec(t.grad(logits.id)).array() +=
                           as_vec(y).array() * (as_vec(g).array() - inner);
                     });
}

Var max_pool(std::span<const Var> xs) {
  Tape& tape = tape_of(xs);
  const std::size_t n = xs.front().size();
  Tensor out = xs.front().value();
  std::vector<std::size_t> argmax(n, 0);
  for (std::size_t k = 1; k < xs.size(); ++k) {
    const Tensor& v = xs[k].value();
    if (v.size() != n) throw ShapeError("max_pool: size mismatch");
    for (std::size_t i = 0; i < n; ++i) {
      if (v[i] > out[i]) {
        out[i] = v[i];
        argmax[i] = k;
      }
    }
  }
  std::vector<Var> inputs(xs.begin(), xs.end());
  return tape.record(std::move(out), any_grad(tape, xs),
                     [inputs, argmax](Tape& t, const Tensor&, const Tensor& g) {
                       for (std::size_t i = 0; i < argmax.size(); ++i) {
                         const Var& src = inputs[argmax[i]];
                         if (t.requires_grad(src)) t.grad(src.id)[i] += g[i];
                       }
                     });
}

Var sum(Var a) {
  Tape& tape = *a.tape;
  return tape.record(Tensor::scalar(as_vec(a.value()).sum()), tape.requires_grad(a),
                     [a](Tape& t, const Tensor&, const Tensor& g) {
                       as_vec(t.grad(a.id)).array() += g[0];
                     });
}

Var dot(Var a, Var b) {
  Tape& tape = same_tape(a, b);
  require_same_size(a, b, "dot");
  const bool ga = tape.requires_grad(a), gb = tape.requires_grad(b);
  return tape.record(Tensor::scalar(as_vec(a.value()).dot(as_vec(b.value()))), ga || gb,
                     [a, b, ga, gb](Tape& t, const Tensor&, const Tensor& g) {
                       if (ga) as_vec(t.grad(a.id)) += g[0] * as_vec(b.value());
                       if (gb) as_vec(t.grad(b.id)) += g[0] * as_vec(a.value());
                     });
}

Var mean(std::span<const Var> scalars) {
  Tape& tape = tape_of(scalars);
  double total = 0.0;
  for (const Var& s : scalars) {
    if (s.size() != 1) throw ShapeError("mean: inputs must be scalars");
    total += s.item();
  }
  const double inv = 1.0 / static_cast<double>(scalars.size());
  std::vector<Var> inputs(scalars.begin(), scalars.end());
  return tape.record(Tensor::scalar(total * inv), any_grad(tape, scalars),
                     [inputs, inv](Tape& t, const Tensor&, const Tensor& g) {
                       for (const Var& s : inputs) {
                         if (t.requires_grad(s)) t.grad(s.id)[0] += g[0] * inv;
                       }
                     });
}

Var kl_divergence(Var logits, const SparseDistribution& target) {
  Tape& tape = *logits.tape;
  const double value = num::kl_divergence(target, logits.value().values());
  const double mass = target.total();
  return tape.record(Tensor::scalar(value), tape.requires_grad(logits),
                     [logits, target, mass](Tape& t, const Tensor&, const Tensor& g) {
                       const auto q = num::softmax(logits.value().values());
                       Tensor& gz = t.grad(logits.id);
                       for (std::size_t j = 0; j < q.size(); ++j) gz[j] += g[0] * q[j] * mass;
                       for (const auto& [id, p] : target.entries) gz[id] -= g[0] * p;
                     });
}

Var cross_entropy(Var logits, std::size_t label) {
  Tape& tape = *logits.tape;
  const Tensor& z = logits.value();
  if (label >= z.size()) {
    throw ShapeError("cross_entropy: label " + std::to_string(label) + " outside " +
                     std::to_string(z.size()) + " logits");
  }
  const double value = log_sum_exp(z.values()) - z[label];
  return tape.record(Tensor::scalar(value), tape.requires_grad(logits),
                     [logits, label](Tape& t, const Tensor&, const Tensor& g) {
                       const auto q = num::softmax(logits.value().values());
                       Tensor& gz = t.grad(logits.id);
                       for (std::size_t j = 0; j < q.size(); ++j) gz[j] += g[0] * q[j];
                       gz[label] -= g[0];
                     });
}

}  // namespace latlm::num
