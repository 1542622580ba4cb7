#include "latlm/model/lstm.hpp"

#include "latlm/errors.hpp"

namespace latlm::model {

num::Var bind_param(num::Tape& tape, num::ParamSet& params, const std::string& name, bool trainable) {
  auto& p = params.at(name);
  return trainable ? tape.param(p) : tape.constant_view(p.value);
}

void add_lstm_cell(num::ParamSet& params, const std::string& prefix, std::size_t input_size,
                   std::size_t hidden_size, double init_scale, data::Rng& rng) {
  std::uniform_real_distribution<double> dist(-init_scale, init_scale);
  auto random = [&](num::Shape shape) {
    num::Tensor t(std::move(shape));
    for (double& v : t.values()) v = dist(rng);
    return t;
  };
  params.add(prefix + ".w_x", random({4 * hidden_size, input_size}));
  params.add(prefix + ".w_h", random({4 * hidden_size, hidden_size}));
  num::Tensor bias(num::Shape{4 * hidden_size});
  for (std::size_t i = hidden_size; i < 2 * hidden_size; ++i) bias[i] = 1.0;
  params.add(prefix + ".b", std::move(bias));
}

CellVars bind_cell(num::Tape& tape, num::ParamSet& params, const std::string& prefix,
                   bool trainable) {
  CellVars cell;
  cell.w_x = bind_param(tape, params, prefix + ".w_x", trainable);
  cell.w_h = bind_param(tape, params, prefix + ".w_h", trainable);
  cell.b = bind_param(tape, params, prefix + ".b", trainable);
  const auto& wx = cell.w_x.value();
  const auto& wh = cell.w_h.value();
  if (wx.rank() != 2 || wh.rank() != 2 || wx.dim(0) % 4 != 0 || wh.dim(0) != wx.dim(0) ||
      wh.dim(1) * 4 != wh.dim(0) || cell.b.size() != wx.dim(0)) {
    throw ShapeError("inconsistent LSTM cell shapes under " + prefix);
  }
  cell.hidden_size = wh.dim(1);
  cell.input_size = wx.dim(1);
  return cell;
}

CellState zero_state(num::Tape& tape, std::size_t hidden_size) {
  return {num::zeros(tape, hidden_size), num::zeros(tape, hidden_size)};
}

CellState lstm_cell_step(num::Var x, const CellState& prev, const CellVars& cell) {
  if (x.size() != cell.input_size || prev.h.size() != cell.hidden_size ||
      prev.c.size() != cell.hidden_size) {
    throw ShapeError("lstm_cell_step: input " + std::to_string(x.size()) + "/state " +
                     std::to_string(prev.h.size()) + " vs cell " +
                     std::to_string(cell.input_size) + "/" + std::to_string(cell.hidden_size));
  }
  const std::size_t h = cell.hidden_size;
  num::Var gates = num::add(num::add(num::matvec(cell.w_x, x), num::matvec(cell.w_h, prev.h)), cell.b);
  num::Var i = num::sigmoid(num::slice(gates, 0, h));
  num::Var f = num::sigmoid(num::slice(gates, h, h));
  num::Var g = num::tanh(num::slice(gates, 2 * h, h));
  num::Var o = num::sigmoid(num::slice(gates, 3 * h, h));
  num::Var c = num::add(num::mul(f, prev.c), num::mul(i, g));
  num::Var out = num::mul(o, num::tanh(c));
  return {out, c};
}

CellState weighted_pool(std::span<const CellState> incoming, std::span<const double> probs) {
  if (incoming.empty()) throw ModelError("weighted_pool: no incoming transitions");
  if (incoming.size() != probs.size()) throw ShapeError("weighted_pool: probability count mismatch");
  double total = 0.0;
  for (double p : probs) {
    if (!(p >= 0.0)) throw ModelError("weighted_pool: negative probability");
    total += p;
  }
  if (!(total > 0.0)) throw ModelError("weighted_pool: incoming probabilities sum to zero");
  std::vector<double> weights(probs.begin(), probs.end());
  for (double& w : weights) w /= total;
  std::vector<num::Var> hs, cs;
  hs.reserve(incoming.size());
  cs.reserve(incoming.size());
  for (const auto& s : incoming) {
    hs.push_back(s.h);
    cs.push_back(s.c);
  }
  return {num::weighted_sum(hs, weights), num::weighted_sum(cs, weights)};
}

std::vector<std::vector<CellState>> run_sequence(num::Tape& tape, std::span<const num::Var> inputs,
                                                 std::span<const CellVars> layers) {
  std::vector<std::vector<CellState>> out(layers.size());
  std::vector<num::Var> layer_inputs(inputs.begin(), inputs.end());
  for (std::size_t k = 0; k < layers.size(); ++k) {
    CellState state = zero_state(tape, layers[k].hidden_size);
    out[k].reserve(layer_inputs.size());
    for (const num::Var& x : layer_inputs) {
      state = lstm_cell_step(x, state, layers[k]);
      out[k].push_back(state);
    }
    for (std::size_t t = 0; t < layer_inputs.size(); ++t) layer_inputs[t] = out[k][t].h;
  }
  return out;
}

}  // namespace latlm::model
