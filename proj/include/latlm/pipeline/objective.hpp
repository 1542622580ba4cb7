#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "latlm/data/vocab.hpp"
#include "latlm/lattice/lattice.hpp"
#include "latlm/model/language_model.hpp"
#include "latlm/numerics/loss.hpp"

namespace latlm::pipeline {

// Mass P(e) on vocab.id(w[e]) for every outgoing e of `node`, with repeated
// ids (duplicate words, or distinct words that share <unk>) summed. Entries
// are sorted by id. Throws StructuralError for a node without outgoing
// transitions.
num::SparseDistribution ground_truth_next_distribution(const lattice::Lattice& lattice,
                                                       lattice::NodeId node,
                                                       const data::Vocabulary& vocab);

struct DirectionTargets {
  std::vector<lattice::NodeId> nodes;  // predicting nodes, topological order
  std::vector<num::SparseDistribution> targets;
  std::vector<double> entropy;  // of each target, for cross-entropy reporting
};

// A lattice ready for the LM objective: normalized, sentinel-wrapped,
// reversed, with input ids and next-word targets per direction.
struct LmExample {
  lattice::Lattice forward;
  lattice::Lattice backward;
  std::vector<std::size_t> input_ids;  // per transition
  DirectionTargets forward_targets;
  DirectionTargets backward_targets;
};

LmExample prepare_lm_example(const lattice::Lattice& raw, const data::Vocabulary& vocab);

// [<bos>, w..., <eos>] as vocabulary ids.
std::vector<std::size_t> sequence_ids(const data::Sentence& sentence,
                                      const data::Vocabulary& vocab);

// 0.5 * (mean forward KL + mean backward KL) over predicting nodes: every
// node of the wrapped lattice except start and end predicts its outgoing
// words from the top layer's h[n]. The start node is skipped because its
// only continuation is the sentinel.
num::Var lattice_lm_loss(num::Tape& tape, const model::LmVars& lm, const LmExample& example);

// Bidirectional cross-entropy of the sequential LM over `ids` (as produced by
// sequence_ids): the forward direction predicts ids[1..] each from the state
// after the ids before it, the backward one predicts ids[..n-2] from the
// state after the ids following it. Same aggregation as lattice_lm_loss.
num::Var sequence_lm_loss(num::Tape& tape, const model::LmVars& lm,
                          std::span<const std::size_t> ids);

struct LmEvaluation {
  double mean_loss = 0.0;  // mean per-example objective
  double forward_perplexity = 0.0;
  double backward_perplexity = 0.0;
  double perplexity = 0.0;  // directions averaged in log space
  std::size_t predictions = 0;  // per direction
};

// Perplexity is exp(mean cross-entropy per predicting node). Throws
// DataError on an empty set.
LmEvaluation evaluate_lattices(num::ParamSet& params, const model::LmConfig& config,
                               std::span<const LmExample> examples);
LmEvaluation evaluate_sequences(num::ParamSet& params, const model::LmConfig& config,
                                std::span<const std::vector<std::size_t>> sequences);

// Add-one smoothed unigram distribution fitted to the targets of `examples`
// (both directions), and its perplexity on another set.
std::vector<double> fit_unigram(std::span<const LmExample> examples, std::size_t vocab_size);
LmEvaluation unigram_perplexity(std::span<const double> unigram,
                                std::span<const LmExample> examples);

}  // namespace latlm::pipeline
