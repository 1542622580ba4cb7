#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "latlm/data/synthetic.hpp"
#include "latlm/numerics/autodiff.hpp"

namespace latlm::model {

// Binds a named parameter onto a tape: a gradient-carrying leaf when
// trainable, a read-only view otherwise.
num::Var bind_param(num::Tape& tape, num::ParamSet& params, const std::string& name, bool trainable);

// Adds <prefix>.w_x [4H, input], <prefix>.w_h [4H, H] and <prefix>.b [4H].
// Gate order is input, forget, candidate, output; weights are uniform in
// [-init_scale, init_scale] and the forget-gate bias starts at 1.
void add_lstm_cell(num::ParamSet& params, const std::string& prefix, std::size_t input_size,
                   std::size_t hidden_size, double init_scale, data::Rng& rng);

struct CellVars {
  num::Var w_x;
  num::Var w_h;
  num::Var b;
  std::size_t input_size = 0;
  std::size_t hidden_size = 0;
};

CellVars bind_cell(num::Tape& tape, num::ParamSet& params, const std::string& prefix,
                   bool trainable);

struct CellState {
  num::Var h;
  num::Var c;
};

CellState zero_state(num::Tape& tape, std::size_t hidden_size);

//   i = sigmoid(.), f = sigmoid(.), g = tanh(.), o = sigmoid(.)
//   c = f * c_prev + i * g,  h = o * tanh(c)
CellState lstm_cell_step(num::Var x, const CellState& prev, const CellVars& cell);

// h[n] = sum_e (P(e) / sum P) h[e], and the same for c. Throws ModelError on
// an empty list or non-positive total mass.
CellState weighted_pool(std::span<const CellState> incoming, std::span<const double> probs);

// Stacked unidirectional LSTM over a sequence from a zero state. Layer k>0
// consumes layer k-1's outputs. Result is [layer][step].
std::vector<std::vector<CellState>> run_sequence(num::Tape& tape, std::span<const num::Var> inputs,
                                                 std::span<const CellVars> layers);

}  // namespace latlm::model
