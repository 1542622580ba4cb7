#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "latlm/model/language_model.hpp"

namespace latlm::model {

struct ClassifierConfig {
  std::size_t input_dim = 0;  // width of a node context vector (2 * LM hidden)
  std::size_t lm_layers = 0;  // mixing weights cover lm_layers + 1 representations
  std::size_t hidden_dim = 300;
  std::size_t layers = 2;
  std::size_t num_labels = 0;
  double init_scale = 0.1;
};

// mix.logits [L+1], mix.gamma [1], clf.fwd.<k>.*, clf.bwd.<k>.*,
// clf.out.weight [labels, 2 * hidden], clf.out.bias [labels].
std::vector<std::string> classifier_param_names(const ClassifierConfig& config);
void add_classifier_params(num::ParamSet& params, const ClassifierConfig& config,
                           std::uint64_t seed);

struct ClassifierVars {
  num::Var mix_logits;
  num::Var mix_gamma;
  std::vector<CellVars> forward;
  std::vector<CellVars> backward;
  num::Var out_weight;
  num::Var out_bias;
};

ClassifierVars bind_classifier(num::Tape& tape, num::ParamSet& params,
                               const ClassifierConfig& config, bool trainable);

// Per node, the LM's representations: [0] pooled incoming word embeddings
// laid out as [e, 0, e, 0] to width 2H, then [k] = [fwd h[n]; bwd h[n]] for
// every LM layer. The start node has no incoming words; its entries are
// zero. Result is [node][layer].
std::vector<std::vector<num::Tensor>> lm_layer_representations(num::ParamSet& lm_params,
                                                               const LmConfig& config,
                                                               const lattice::Lattice& lattice,
                                                               const lattice::Lattice& reversed,
                                                               const data::Vocabulary& vocab);

// gamma * sum_k softmax(logits)_k * reps[k]
num::Var scalar_mix(std::span<const num::Var> reps, num::Var logits, num::Var gamma);

// Bidirectional lattice LSTM over the raw lattice; transition e reads the
// context vector of next[e] in both directions. Forward states are
// max-pooled over non-start nodes, backward states over non-end nodes (the
// nodes where each direction has read something), then concatenated and
// mapped to label logits.
num::Var classifier_forward(num::Tape& tape, const lattice::Lattice& lattice,
                            const lattice::Lattice& reversed,
                            std::span<const num::Var> node_vectors, const ClassifierVars& clf);

}  // namespace latlm::model
