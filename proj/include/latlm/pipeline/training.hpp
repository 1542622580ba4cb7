#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "latlm/numerics/adam.hpp"
#include "latlm/pipeline/checkpoint.hpp"
#include "latlm/pipeline/objective.hpp"

namespace latlm::pipeline {

struct EpochReport {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double valid_loss = 0.0;
  double valid_metric = 0.0;  // perplexity for LM stages, accuracy for the classifier
  bool improved = false;
};

struct TrainConfig {
  double lr = 1e-4;
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  std::uint64_t seed = 1;
  std::size_t patience = 5;
  std::function<void(const EpochReport&)> on_epoch;

  void check() const;
};

struct LmTrainResult {
  Checkpoint checkpoint;  // best validation perplexity
  std::vector<EpochReport> history;
  LmEvaluation initial;  // validation before the first update
  LmEvaluation best;
};

// One accumulate-then-step batch: each example's loss is scaled by
// 1/batch.size() before its backward pass, then adam updates. Returns the
// mean loss. A non-finite loss throws NumericError.
double sequence_batch_step(num::ParamSet& params, num::AdamState& state,
                           const model::LmConfig& config,
                           std::span<const std::vector<std::size_t>> batch, double lr);
double lattice_batch_step(num::ParamSet& params, num::AdamState& state,
                          const model::LmConfig& config, std::span<const LmExample> batch,
                          double lr);

// Stage 1: the bidirectional sequential LM on text.
LmTrainResult pretrain_stage1(std::span<const data::Sentence> train,
                              std::span<const data::Sentence> valid, const data::Vocabulary& vocab,
                              model::LmConfig config, const TrainConfig& train_config);

// Stage 2: the lattice LM, initialized from a stage-1 (or earlier stage-2)
// checkpoint when given and from a fresh draw seeded by train_config.seed
// otherwise.
LmTrainResult pretrain_stage2(std::span<const lattice::Lattice> train,
                              std::span<const lattice::Lattice> valid, const data::Vocabulary& vocab,
                              model::LmConfig config, const Checkpoint* init,
                              const TrainConfig& train_config);

// A classifier input with the frozen LM's per-node representations attached.
struct ClassifierExample {
  std::string id;
  lattice::Lattice lattice;  // normalized, no sentinels
  lattice::Lattice reversed;
  std::size_t label = 0;
  std::vector<std::vector<num::Tensor>> reps;  // [node][layer]
};

std::vector<ClassifierExample> featurize(const Checkpoint& lm,
                                         std::span<const lattice::Lattice> lattices,
                                         std::span<const std::size_t> labels);

struct ClassifierShape {
  std::size_t hidden = 300;
  std::size_t layers = 2;
};

struct ClassifierTrainResult {
  Checkpoint checkpoint;  // best validation accuracy
  std::vector<EpochReport> history;
  std::uint64_t lm_checksum_before = 0;
  std::uint64_t lm_checksum_after = 0;
};

// Trains scalar mix, classifier LSTMs and output layer with the LM frozen.
// Throws ModelError when an LM tensor changed during training.
ClassifierTrainResult train_classifier(const Checkpoint& lm,
                                       std::span<const ClassifierExample> train,
                                       std::span<const ClassifierExample> valid,
                                       const std::vector<std::string>& labels,
                                       const ClassifierShape& shape,
                                       const TrainConfig& train_config);

struct Evaluation {
  double accuracy = 0.0;
  double mean_loss = 0.0;
  std::vector<std::vector<std::size_t>> confusion;  // [gold][predicted]
  std::vector<std::size_t> predictions;
};

// Argmax prediction per example (lowest label id on ties).
Evaluation evaluate(const Checkpoint& classifier, std::span<const ClassifierExample> examples);

}  // namespace latlm::pipeline
