#include "latlm/pipeline/objective.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "latlm/errors.hpp"

namespace latlm::pipeline {

namespace {

double entropy(const num::SparseDistribution& d) {
  double h = 0.0;
  for (const auto& [id, p] : d.entries) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

DirectionTargets collect_targets(const lattice::Lattice& l, const data::Vocabulary& vocab) {
  DirectionTargets out;
  const auto start = l.start();
  const auto end = l.end();
  for (lattice::NodeId n : lattice::topological_order(l)) {
    if (n == start || n == end) continue;
    out.nodes.push_back(n);
    out.targets.push_back(ground_truth_next_distribution(l, n, vocab));
    out.entropy.push_back(entropy(out.targets.back()));
  }
  return out;
}

num::Var direction_mean(const model::LmVars& lm, const DirectionTargets& targets,
                        const std::vector<model::CellState>& top_nodes) {
  std::vector<num::Var> terms;
  terms.reserve(targets.nodes.size());
  for (std::size_t i = 0; i < targets.nodes.size(); ++i) {
    num::Var logits = model::decode_next(lm, top_nodes[targets.nodes[i]].h);
    terms.push_back(num::kl_divergence(logits, targets.targets[i]));
  }
  return num::mean(terms);
}

num::Var combine(num::Var forward, num::Var backward) {
  return num::scale(num::add(forward, backward), 0.5);
}

struct Accumulator {
  double ce_forward = 0.0;
  double ce_backward = 0.0;
  double loss = 0.0;
  std::size_t predictions = 0;
  std::size_t examples = 0;

  LmEvaluation finish() const {
    if (examples == 0 || predictions == 0) throw DataError("perplexity over an empty set");
    LmEvaluation ev;
    const double n = static_cast<double>(predictions);
    ev.mean_loss = loss / static_cast<double>(examples);
    ev.forward_perplexity = std::exp(ce_forward / n);
    ev.backward_perplexity = std::exp(ce_backward / n);
    ev.perplexity = std::exp(0.5 * (ce_forward + ce_backward) / n);
    ev.predictions = predictions;
    return ev;
  }
};

}  // namespace

num::SparseDistribution ground_truth_next_distribution(const lattice::Lattice& lattice,
                                                       lattice::NodeId node,
                                                       const data::Vocabulary& vocab) {
  std::map<std::size_t, double> mass;
  for (const auto& t : lattice.transitions) {
    if (t.prev == node) mass[vocab.id(t.word)] += t.prob;
  }
  if (mass.empty()) {
    throw StructuralError("node n" + std::to_string(node) + " of lattice " + lattice.id +
                          " has no outgoing transitions");
  }
  num::SparseDistribution d;
  d.entries.assign(mass.begin(), mass.end());
  return d;
}

LmExample prepare_lm_example(const lattice::Lattice& raw, const data::Vocabulary& vocab) {
  lattice::require_valid(raw);
  LmExample ex;
  ex.forward = lattice::wrap_sentinels(lattice::normalize_outgoing(raw));
  ex.backward = lattice::reverse(ex.forward);
  ex.input_ids.reserve(ex.forward.transitions.size());
  for (const auto& t : ex.forward.transitions) ex.input_ids.push_back(vocab.id(t.word));
  ex.forward_targets = collect_targets(ex.forward, vocab);
  ex.backward_targets = collect_targets(ex.backward, vocab);
  return ex;
}

std::vector<std::size_t> sequence_ids(const data::Sentence& sentence,
                                      const data::Vocabulary& vocab) {
  std::vector<std::size_t> ids{data::Vocabulary::kBos};
  for (const auto& w : sentence) ids.push_back(vocab.id(w));
  ids.push_back(data::Vocabulary::kEos);
  return ids;
}

num::Var lattice_lm_loss(num::Tape& tape, const model::LmVars& lm, const LmExample& example) {
  const auto inputs = model::embed(lm, example.input_ids);
  const auto states = model::lattice_lstm_forward(tape, example.forward, example.backward, inputs,
                                                  lm.forward, lm.backward);
  return combine(direction_mean(lm, example.forward_targets, states.forward.nodes.back()),
                 direction_mean(lm, example.backward_targets, states.backward.nodes.back()));
}

num::Var sequence_lm_loss(num::Tape& tape, const model::LmVars& lm,
                          std::span<const std::size_t> ids) {
  if (ids.size() < 2) throw DataError("a sequence needs at least two ids");
  const auto states = model::run_bidirectional_sequence(tape, lm, ids);
  const auto& fwd = states.forward.back();
  const auto& bwd = states.backward.back();
  const std::size_t n = ids.size();
  std::vector<num::Var> f_terms, b_terms;
  for (std::size_t t = 1; t < n; ++t) {
    f_terms.push_back(num::cross_entropy(model::decode_next(lm, fwd[t - 1].h), ids[t]));
  }
  for (std::size_t t = n - 1; t-- > 0;) {
    b_terms.push_back(num::cross_entropy(model::decode_next(lm, bwd[t + 1].h), ids[t]));
  }
  return combine(num::mean(f_terms), num::mean(b_terms));
}

LmEvaluation evaluate_lattices(num::ParamSet& params, const model::LmConfig& config,
                               std::span<const LmExample> examples) {
  Accumulator acc;
  for (const auto& ex : examples) {
    num::Tape tape;
    const auto lm = model::bind_lm(tape, params, config, false);
    const auto inputs = model::embed(lm, ex.input_ids);
    const auto states =
        model::lattice_lstm_forward(tape, ex.forward, ex.backward, inputs, lm.forward, lm.backward);
    double kl[2] = {0.0, 0.0};
    const DirectionTargets* dirs[2] = {&ex.forward_targets, &ex.backward_targets};
    const std::vector<model::CellState>* tops[2] = {&states.forward.nodes.back(),
                                                    &states.backward.nodes.back()};
    for (int d = 0; d < 2; ++d) {
      double ce = 0.0;
      for (std::size_t i = 0; i < dirs[d]->nodes.size(); ++i) {
        const auto& logits = model::decode_next(lm, (*tops[d])[dirs[d]->nodes[i]].h).value();
        const double k = num::kl_divergence(dirs[d]->targets[i], logits.values());
        kl[d] += k;
        ce += k + dirs[d]->entropy[i];
      }
      (d == 0 ? acc.ce_forward : acc.ce_backward) += ce;
    }
    const double count = static_cast<double>(ex.forward_targets.nodes.size());
    acc.loss += 0.5 * (kl[0] / count + kl[1] / static_cast<double>(ex.backward_targets.nodes.size()));
    acc.predictions += ex.forward_targets.nodes.size();
    ++acc.examples;
  }
  return acc.finish();
}

LmEvaluation evaluate_sequences(num::ParamSet& params, const model::LmConfig& config,
                                std::span<const std::vector<std::size_t>> sequences) {
  Accumulator acc;
  for (const auto& ids : sequences) {
    num::Tape tape;
    const auto lm = model::bind_lm(tape, params, config, false);
    const auto states = model::run_bidirectional_sequence(tape, lm, ids);
    const auto& fwd = states.forward.back();
    const auto& bwd = states.backward.back();
    const std::size_t n = ids.size();
    if (n < 2) throw DataError("a sequence needs at least two ids");
    double ce_f = 0.0, ce_b = 0.0;
    for (std::size_t t = 1; t < n; ++t) {
      ce_f += num::cross_entropy(model::decode_next(lm, fwd[t - 1].h), ids[t]).item();
    }
    for (std::size_t t = n - 1; t-- > 0;) {
      ce_b += num::cross_entropy(model::decode_next(lm, bwd[t + 1].h), ids[t]).item();
    }
    acc.ce_forward += ce_f;
    acc.ce_backward += ce_b;
    acc.loss += 0.5 * (ce_f + ce_b) / static_cast<double>(n - 1);
    acc.predictions += n - 1;
    ++acc.examples;
  }
  return acc.finish();
}

std::vector<double> fit_unigram(std::span<const LmExample> examples, std::size_t vocab_size) {
  std::vector<double> counts(vocab_size, 1.0);
  for (const auto& ex : examples) {
    for (const DirectionTargets* dir : {&ex.forward_targets, &ex.backward_targets}) {
      for (const auto& target : dir->targets) {
        for (const auto& [id, p] : target.entries) counts.at(id) += p;
      }
    }
  }
  double total = 0.0;
  for (double c : counts) total += c;
  for (double& c : counts) c /= total;
  return counts;
}

LmEvaluation unigram_perplexity(std::span<const double> unigram,
                                std::span<const LmExample> examples) {
  Accumulator acc;
  for (const auto& ex : examples) {
    double ce[2] = {0.0, 0.0};
    double kl[2] = {0.0, 0.0};
    const DirectionTargets* dirs[2] = {&ex.forward_targets, &ex.backward_targets};
    for (int d = 0; d < 2; ++d) {
      for (std::size_t i = 0; i < dirs[d]->targets.size(); ++i) {
        double node_ce = 0.0;
        for (const auto& [id, p] : dirs[d]->targets[i].entries) node_ce -= p * std::log(unigram[id]);
        ce[d] += node_ce;
        kl[d] += node_ce - dirs[d]->entropy[i];
      }
    }
    acc.ce_forward += ce[0];
    acc.ce_backward += ce[1];
    acc.loss += 0.5 * (kl[0] / static_cast<double>(dirs[0]->targets.size()) +
                       kl[1] / static_cast<double>(dirs[1]->targets.size()));
    acc.predictions += ex.forward_targets.nodes.size();
    ++acc.examples;
  }
  return acc.finish();
}

}  // namespace latlm::pipeline
