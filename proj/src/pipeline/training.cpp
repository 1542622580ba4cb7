#include "latlm/pipeline/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>

#include "latlm/data/synthetic.hpp"
#include "latlm/errors.hpp"

namespace latlm::pipeline {

namespace {

template <typename Example, typename LossFn>
double batch_step(num::ParamSet& params, num::AdamState& state, std::span<const Example> batch,
                  double lr, LossFn&& loss_fn) {
  if (batch.empty()) throw DataError("empty training batch");
  params.zero_grad();
  const double scale = 1.0 / static_cast<double>(batch.size());
  double total = 0.0;
  for (std::size_t i = 0; i < batch.size(); ++i) {
    num::Tape tape;
    num::Var loss = loss_fn(tape, batch[i]);
    const double value = loss.item();
    if (!std::isfinite(value)) {
      throw NumericError("non-finite training loss (" + std::to_string(value) +
                         ") at batch position " + std::to_string(i) + ", adam step " +
                         std::to_string(state.step + 1));
    }
    total += value;
    tape.backward(num::scale(loss, scale));
  }
  num::adam_step(params, state, lr);
  return total * scale;
}

std::vector<std::size_t> shuffled(std::size_t n, data::Rng& rng) {
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  return order;
}

// Epoch loop shared by every stage. `run_epoch` trains one pass and returns
// the mean training loss; `validate` returns (loss, metric); larger metrics
// are better when `maximize`.
template <typename RunEpoch, typename Validate, typename Snapshot>
std::vector<EpochReport> train_loop(const TrainConfig& cfg, bool maximize, double initial_metric,
                                    double initial_loss, RunEpoch&& run_epoch,
                                    Validate&& validate, Snapshot&& snapshot) {
  std::vector<EpochReport> history;
  double best_metric = initial_metric;
  double best_loss = initial_loss;
  std::size_t since_best = 0;
  snapshot();
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    EpochReport rep;
    rep.epoch = epoch;
    rep.train_loss = run_epoch();
    std::tie(rep.valid_loss, rep.valid_metric) = validate();
    const bool better = maximize ? rep.valid_metric > best_metric ||
                                       (rep.valid_metric == best_metric && rep.valid_loss < best_loss)
                                 : rep.valid_metric < best_metric;
    if (better) {
      best_metric = rep.valid_metric;
      best_loss = rep.valid_loss;
      since_best = 0;
      rep.improved = true;
      snapshot();
    } else {
      ++since_best;
    }
    history.push_back(rep);
    if (cfg.on_epoch) cfg.on_epoch(rep);
    if (since_best >= cfg.patience) break;
  }
  return history;
}

Checkpoint lm_checkpoint(Stage stage, const model::LmConfig& config, std::uint64_t seed,
                         const data::Vocabulary& vocab, const num::ParamSet& params) {
  Checkpoint ck;
  ck.stage = stage;
  ck.seed = seed;
  ck.lm = config;
  ck.vocab = vocab;
  for (const auto& [name, p] : params) ck.params.add(name, p.value);
  return ck;
}

}  // namespace

void TrainConfig::check() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw DataError("learning rate must be positive");
  if (epochs < 1) throw DataError("epochs must be at least 1");
  if (batch_size < 1) throw DataError("batch size must be at least 1");
}

double sequence_batch_step(num::ParamSet& params, num::AdamState& state,
                           const model::LmConfig& config,
                           std::span<const std::vector<std::size_t>> batch, double lr) {
  return batch_step(params, state, batch, lr,
                    [&](num::Tape& tape, const std::vector<std::size_t>& ids) {
                      const auto lm = model::bind_lm(tape, params, config, true);
                      return sequence_lm_loss(tape, lm, ids);
                    });
}

double lattice_batch_step(num::ParamSet& params, num::AdamState& state,
                          const model::LmConfig& config, std::span<const LmExample> batch,
                          double lr) {
  return batch_step(params, state, batch, lr, [&](num::Tape& tape, const LmExample& ex) {
    const auto lm = model::bind_lm(tape, params, config, true);
    return lattice_lm_loss(tape, lm, ex);
  });
}

LmTrainResult pretrain_stage1(std::span<const data::Sentence> train,
                              std::span<const data::Sentence> valid, const data::Vocabulary& vocab,
                              model::LmConfig config, const TrainConfig& cfg) {
  cfg.check();
  if (train.empty()) throw DataError("stage 1 needs a non-empty training corpus");
  if (valid.empty()) throw DataError("stage 1 needs a non-empty validation corpus");
  config.vocab_size = vocab.size();
  std::vector<std::vector<std::size_t>> train_ids, valid_ids;
  for (const auto& s : train) train_ids.push_back(sequence_ids(s, vocab));
  for (const auto& s : valid) valid_ids.push_back(sequence_ids(s, vocab));

  num::ParamSet params = model::init_lm_params(config, cfg.seed);
  num::AdamState adam;
  data::Rng rng(cfg.seed);
  LmTrainResult result;
  result.initial = evaluate_sequences(params, config, valid_ids);
  result.best = result.initial;
  std::vector<std::vector<std::size_t>> batch;
  LmEvaluation last;

  result.history = train_loop(
      cfg, false, result.initial.perplexity, result.initial.mean_loss,
      [&] {
        const auto order = shuffled(train_ids.size(), rng);
        double total = 0.0;
        for (std::size_t i = 0; i < order.size(); i += cfg.batch_size) {
          batch.clear();
          for (std::size_t j = i; j < std::min(order.size(), i + cfg.batch_size); ++j) {
            batch.push_back(train_ids[order[j]]);
          }
          total += sequence_batch_step(params, adam, config, batch, cfg.lr) *
                   static_cast<double>(batch.size());
        }
        return total / static_cast<double>(order.size());
      },
      [&] {
        last = evaluate_sequences(params, config, valid_ids);
        return std::pair{last.mean_loss, last.perplexity};
      },
      [&] {
        if (adam.step > 0) result.best = last;
        result.checkpoint = lm_checkpoint(Stage::kSeqLm, config, cfg.seed, vocab, params);
      });
  return result;
}

LmTrainResult pretrain_stage2(std::span<const lattice::Lattice> train,
                              std::span<const lattice::Lattice> valid, const data::Vocabulary& vocab,
                              model::LmConfig config, const Checkpoint* init,
                              const TrainConfig& cfg) {
  cfg.check();
  if (train.empty()) throw DataError("stage 2 needs training lattices");
  if (valid.empty()) throw DataError("stage 2 needs validation lattices");
  config.vocab_size = vocab.size();
  num::ParamSet params;
  if (init) {
    require_stage(*init, {Stage::kSeqLm, Stage::kLatticeLm});
    if (!(init->vocab == vocab)) throw ShapeError("stage-1 checkpoint uses a different vocabulary");
    params = model::transfer_weights(init->params, config);
  } else {
    params = model::init_lm_params(config, cfg.seed);
  }
  std::vector<LmExample> train_ex, valid_ex;
  for (const auto& l : train) train_ex.push_back(prepare_lm_example(l, vocab));
  for (const auto& l : valid) valid_ex.push_back(prepare_lm_example(l, vocab));

  num::AdamState adam;
  data::Rng rng(cfg.seed);
  LmTrainResult result;
  result.initial = evaluate_lattices(params, config, valid_ex);
  result.best = result.initial;
  std::vector<LmExample> batch;
  LmEvaluation last;
  const std::uint64_t seed = init ? init->seed : cfg.seed;

  result.history = train_loop(
      cfg, false, result.initial.perplexity, result.initial.mean_loss,
      [&] {
        const auto order = shuffled(train_ex.size(), rng);
        double total = 0.0;
        for (std::size_t i = 0; i < order.size(); i += cfg.batch_size) {
          batch.clear();
          for (std::size_t j = i; j < std::min(order.size(), i + cfg.batch_size); ++j) {
            batch.push_back(train_ex[order[j]]);
          }
          total += lattice_batch_step(params, adam, config, batch, cfg.lr) *
                   static_cast<double>(batch.size());
        }
        return total / static_cast<double>(order.size());
      },
      [&] {
        last = evaluate_lattices(params, config, valid_ex);
        return std::pair{last.mean_loss, last.perplexity};
      },
      [&] {
        if (adam.step > 0) result.best = last;
        result.checkpoint = lm_checkpoint(Stage::kLatticeLm, config, seed, vocab, params);
      });
  return result;
}

std::vector<ClassifierExample> featurize(const Checkpoint& lm,
                                         std::span<const lattice::Lattice> lattices,
                                         std::span<const std::size_t> labels) {
  if (lattices.size() != labels.size()) throw DataError("lattice and label counts differ");
  num::ParamSet lm_params = lm_params_of(lm);
  std::vector<ClassifierExample> out;
  out.reserve(lattices.size());
  for (std::size_t i = 0; i < lattices.size(); ++i) {
    lattice::require_valid(lattices[i]);
    ClassifierExample ex;
    ex.id = lattices[i].id;
    ex.lattice = lattice::normalize_outgoing(lattices[i]);
    ex.reversed = lattice::reverse(ex.lattice);
    ex.label = labels[i];
    ex.reps = model::lm_layer_representations(lm_params, lm.lm, ex.lattice, ex.reversed, lm.vocab);
    out.push_back(std::move(ex));
  }
  return out;
}

namespace {

num::Var classifier_logits(num::Tape& tape, const model::ClassifierVars& clf,
                           const ClassifierExample& ex) {
  const num::Var weights = num::softmax(clf.mix_logits);
  std::vector<num::Var> node_vectors;
  node_vectors.reserve(ex.reps.size());
  std::vector<num::Var> layer_vars;
  for (const auto& layers : ex.reps) {
    layer_vars.clear();
    for (const auto& t : layers) layer_vars.push_back(tape.constant_view(t));
    node_vectors.push_back(num::scale_by(num::mix(layer_vars, weights), clf.mix_gamma));
  }
  return model::classifier_forward(tape, ex.lattice, ex.reversed, node_vectors, clf);
}

void check_labels(std::span<const ClassifierExample> examples, std::size_t num_labels) {
  for (const auto& ex : examples) {
    if (ex.label >= num_labels) {
      throw DataError("example " + ex.id + " has label id " + std::to_string(ex.label) +
                      " but only " + std::to_string(num_labels) + " labels exist");
    }
  }
}

Evaluation evaluate_params(num::ParamSet& params, const model::ClassifierConfig& config,
                           std::span<const ClassifierExample> examples) {
  if (examples.empty()) throw DataError("evaluation set is empty");
  check_labels(examples, config.num_labels);
  Evaluation ev;
  ev.confusion.assign(config.num_labels, std::vector<std::size_t>(config.num_labels, 0));
  std::size_t correct = 0;
  double loss = 0.0;
  for (const auto& ex : examples) {
    num::Tape tape;
    const auto clf = model::bind_classifier(tape, params, config, false);
    const num::Var logits = classifier_logits(tape, clf, ex);
    const auto values = logits.value().values();
    const auto pred = static_cast<std::size_t>(
        std::max_element(values.begin(), values.end()) - values.begin());
    loss += num::cross_entropy(logits, ex.label).item();
    ev.predictions.push_back(pred);
    ++ev.confusion[ex.label][pred];
    if (pred == ex.label) ++correct;
  }
  ev.accuracy = static_cast<double>(correct) / static_cast<double>(examples.size());
  ev.mean_loss = loss / static_cast<double>(examples.size());
  return ev;
}

}  // namespace

ClassifierTrainResult train_classifier(const Checkpoint& lm,
                                       std::span<const ClassifierExample> train,
                                       std::span<const ClassifierExample> valid,
                                       const std::vector<std::string>& labels,
                                       const ClassifierShape& shape, const TrainConfig& cfg) {
  cfg.check();
  require_stage(lm, {Stage::kLatticeLm, Stage::kSeqLm});
  if (train.empty() || valid.empty()) throw DataError("classifier needs train and valid examples");
  check_labels(train, labels.size());
  check_labels(valid, labels.size());

  const num::ParamSet lm_params = lm_params_of(lm);
  ClassifierTrainResult result;
  result.lm_checksum_before = lm_params.checksum();
  const num::ParamSet* frozen = &lm.params;
  const std::uint64_t frozen_before = frozen->checksum();

  Checkpoint proto;
  proto.stage = Stage::kClassifier;
  proto.seed = cfg.seed;
  proto.lm = lm.lm;
  proto.clf_hidden = shape.hidden;
  proto.clf_layers = shape.layers;
  proto.labels = labels;
  proto.vocab = lm.vocab;
  const auto config = proto.classifier_config();
  num::ParamSet params;
  model::add_classifier_params(params, config, cfg.seed);

  num::AdamState adam;
  data::Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  Evaluation last = evaluate_params(params, config, valid);
  std::vector<const ClassifierExample*> batch;

  auto snapshot = [&] {
    Checkpoint ck = proto;
    for (const auto& [name, p] : lm_params) ck.params.add(name, p.value);
    for (const auto& [name, p] : params) ck.params.add(name, p.value);
    result.checkpoint = std::move(ck);
  };

  result.history = train_loop(
      cfg, true, last.accuracy, last.mean_loss,
      [&] {
        const auto order = shuffled(train.size(), rng);
        double total = 0.0;
        for (std::size_t i = 0; i < order.size(); i += cfg.batch_size) {
          batch.clear();
          for (std::size_t j = i; j < std::min(order.size(), i + cfg.batch_size); ++j) {
            batch.push_back(&train[order[j]]);
          }
          const std::span<const ClassifierExample* const> view(batch);
          total += batch_step(params, adam, view, cfg.lr,
                              [&](num::Tape& tape, const ClassifierExample* ex) {
                                const auto clf = model::bind_classifier(tape, params, config, true);
                                return num::cross_entropy(classifier_logits(tape, clf, *ex),
                                                          ex->label);
                              }) *
                   static_cast<double>(batch.size());
        }
        return total / static_cast<double>(order.size());
      },
      [&] {
        last = evaluate_params(params, config, valid);
        return std::pair{last.mean_loss, last.accuracy};
      },
      snapshot);

  result.lm_checksum_after = lm_params_of(result.checkpoint).checksum();
  if (result.lm_checksum_after != result.lm_checksum_before ||
      frozen->checksum() != frozen_before) {
    throw ModelError("frozen language model tensors changed during classifier training");
  }
  return result;
}

Evaluation evaluate(const Checkpoint& classifier, std::span<const ClassifierExample> examples) {
  require_stage(classifier, {Stage::kClassifier});
  num::ParamSet params;
  const auto names = model::classifier_param_names(classifier.classifier_config());
  for (const auto& name : names) params.add(name, classifier.params.at(name).value);
  return evaluate_params(params, classifier.classifier_config(), examples);
}

}  // namespace latlm::pipeline
