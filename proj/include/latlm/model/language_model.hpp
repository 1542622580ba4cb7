#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "latlm/model/lattice_lstm.hpp"

namespace latlm::model {

struct LmConfig {
  std::size_t vocab_size = 0;
  std::size_t embed_dim = 128;
  std::size_t hidden_dim = 256;
  std::size_t layers = 2;
  bool decoder_bias = true;
  double init_scale = 0.1;
};

// Parameter layout shared by the sequential and the lattice LM:
//   embedding          [V, D]
//   lm.fwd.<k>.*, lm.bwd.<k>.*   LSTM cells (see add_lstm_cell)
//   decoder.weight     [V, H]
//   decoder.bias       [V]       (when decoder_bias)
// Embedding and decoder are shared by both directions.
std::vector<std::string> lm_param_names(const LmConfig& config);
num::ParamSet init_lm_params(const LmConfig& config, std::uint64_t seed);

// Throws ShapeError naming the first missing, unexpected or mis-shaped tensor.
void check_lm_params(const num::ParamSet& params, const LmConfig& config);

struct LmVars {
  num::Var embedding;
  std::vector<CellVars> forward;
  std::vector<CellVars> backward;
  num::Var decoder_weight;
  std::optional<num::Var> decoder_bias;
};

LmVars bind_lm(num::Tape& tape, num::ParamSet& params, const LmConfig& config, bool trainable);

std::vector<num::Var> embed(const LmVars& lm, std::span<const std::size_t> ids);

// Next-word logits W h (+ b).
num::Var decode_next(const LmVars& lm, num::Var h);

struct SequenceStates {
  std::vector<std::vector<CellState>> forward;   // [layer][t], after reading token t
  std::vector<std::vector<CellState>> backward;  // [layer][t], after reading tokens T-1..t
};

SequenceStates run_bidirectional_sequence(num::Tape& tape, const LmVars& lm,
                                          std::span<const std::size_t> ids);

// Copies every LM tensor from a sequential checkpoint's parameters. Same
// names, same shapes; anything else is a ShapeError naming the tensor.
num::ParamSet transfer_weights(const num::ParamSet& source, const LmConfig& config);

}  // namespace latlm::model
