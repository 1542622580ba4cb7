#include "latlm/model/classifier.hpp"

#include <algorithm>

#include "latlm/errors.hpp"

namespace latlm::model {

namespace {

std::string cell_prefix(const char* direction, std::size_t layer) {
  return std::string("clf.") + direction + "." + std::to_string(layer);
}

}  // namespace

std::vector<std::string> classifier_param_names(const ClassifierConfig& config) {
  std::vector<std::string> names{"mix.logits", "mix.gamma", "clf.out.weight", "clf.out.bias"};
  for (const char* dir : {"fwd", "bwd"}) {
    for (std::size_t k = 0; k < config.layers; ++k) {
      for (const char* leaf : {".w_x", ".w_h", ".b"}) names.push_back(cell_prefix(dir, k) + leaf);
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

void add_classifier_params(num::ParamSet& params, const ClassifierConfig& config,
                           std::uint64_t seed) {
  if (config.num_labels < 2) throw ShapeError("classifier needs at least two labels");
  if (config.input_dim == 0 || config.hidden_dim == 0 || config.layers == 0) {
    throw ShapeError("classifier dimensions must be positive");
  }
  data::Rng rng(seed);
  params.add("mix.logits", num::Tensor(num::Shape{config.lm_layers + 1}));
  params.add("mix.gamma", num::Tensor::scalar(1.0));
  for (const char* dir : {"fwd", "bwd"}) {
    for (std::size_t k = 0; k < config.layers; ++k) {
      add_lstm_cell(params, cell_prefix(dir, k), k == 0 ? config.input_dim : config.hidden_dim,
                    config.hidden_dim, config.init_scale, rng);
    }
  }
  std::uniform_real_distribution<double> dist(-config.init_scale, config.init_scale);
  num::Tensor w(num::Shape{config.num_labels, 2 * config.hidden_dim});
  for (double& v : w.values()) v = dist(rng);
  params.add("clf.out.weight", std::move(w));
  params.add("clf.out.bias", num::Tensor(num::Shape{config.num_labels}));
}

ClassifierVars bind_classifier(num::Tape& tape, num::ParamSet& params,
                               const ClassifierConfig& config, bool trainable) {
  ClassifierVars clf;
  clf.mix_logits = bind_param(tape, params, "mix.logits", trainable);
  clf.mix_gamma = bind_param(tape, params, "mix.gamma", trainable);
  if (clf.mix_logits.size() != config.lm_layers + 1 || clf.mix_gamma.size() != 1) {
    throw ShapeError("scalar mix expects " + std::to_string(config.lm_layers + 1) + " weights");
  }
  for (std::size_t k = 0; k < config.layers; ++k) {
    clf.forward.push_back(bind_cell(tape, params, cell_prefix("fwd", k), trainable));
    clf.backward.push_back(bind_cell(tape, params, cell_prefix("bwd", k), trainable));
  }
  clf.out_weight = bind_param(tape, params, "clf.out.weight", trainable);
  clf.out_bias = bind_param(tape, params, "clf.out.bias", trainable);
  return clf;
}

std::vector<std::vector<num::Tensor>> lm_layer_representations(num::ParamSet& lm_params,
                                                               const LmConfig& config,
                                                               const lattice::Lattice& lattice,
                                                               const lattice::Lattice& reversed,
                                                               const data::Vocabulary& vocab) {
  const std::size_t h = config.hidden_dim;
  const std::size_t d = config.embed_dim;
  if (d > h) throw ShapeError("embedding width exceeds LM hidden width");
  num::Tape tape;
  const LmVars lm = bind_lm(tape, lm_params, config, false);
  std::vector<std::size_t> ids;
  ids.reserve(lattice.transitions.size());
  for (const auto& t : lattice.transitions) ids.push_back(vocab.id(t.word));
  const auto inputs = embed(lm, ids);
  const auto states =
      lattice_lstm_forward(tape, lattice, reversed, inputs, lm.forward, lm.backward);

  const auto adjacency = lattice::AdjacencyIndex::build(lattice);
  std::vector<std::vector<num::Tensor>> reps(lattice.num_nodes);
  for (std::size_t n = 0; n < lattice.num_nodes; ++n) {
    num::Tensor base(num::Shape{2 * h});
    const auto& in = adjacency.incoming[n];
    if (!in.empty()) {
      std::vector<num::Var> xs;
      std::vector<double> w;
      double total = 0.0;
      for (std::size_t e : in) {
        xs.push_back(inputs[e]);
        w.push_back(lattice.transitions[e].prob);
        total += lattice.transitions[e].prob;
      }
      if (total > 0.0) {
        for (double& x : w) x /= total;
        const num::Tensor& pooled = num::weighted_sum(xs, w).value();
        for (std::size_t i = 0; i < d; ++i) {
          base[i] = pooled[i];
          base[h + i] = pooled[i];
        }
      }
    }
    reps[n].push_back(std::move(base));
    for (std::size_t k = 0; k < config.layers; ++k) {
      num::Tensor rep(num::Shape{2 * h});
      const auto& f = states.forward.nodes[k][n].h.value();
      const auto& b = states.backward.nodes[k][n].h.value();
      std::copy(f.values().begin(), f.values().end(), rep.values().begin());
      std::copy(b.values().begin(), b.values().end(), rep.values().begin() + h);
      reps[n].push_back(std::move(rep));
    }
  }
  return reps;
}

num::Var scalar_mix(std::span<const num::Var> reps, num::Var logits, num::Var gamma) {
  if (reps.size() != logits.size()) {
    throw ShapeError("scalar_mix: " + std::to_string(reps.size()) + " representations for " +
                     std::to_string(logits.size()) + " weights");
  }
  return num::scale_by(num::mix(reps, num::softmax(logits)), gamma);
}

num::Var classifier_forward(num::Tape& tape, const lattice::Lattice& lattice,
                            const lattice::Lattice& reversed,
                            std::span<const num::Var> node_vectors, const ClassifierVars& clf) {
  if (node_vectors.size() != lattice.num_nodes) {
    throw ShapeError("classifier_forward: " + std::to_string(node_vectors.size()) +
                     " node vectors for " + std::to_string(lattice.num_nodes) + " nodes");
  }
  std::vector<num::Var> inputs;
  inputs.reserve(lattice.transitions.size());
  for (const auto& t : lattice.transitions) inputs.push_back(node_vectors[t.next]);
  const auto states =
      lattice_lstm_forward(tape, lattice, reversed, inputs, clf.forward, clf.backward);
  const lattice::NodeId start = lattice.start();
  const lattice::NodeId end = lattice.end();
  const auto& top_f = states.forward.nodes.back();
  const auto& top_b = states.backward.nodes.back();
  std::vector<num::Var> fs, bs;
  for (std::size_t n = 0; n < lattice.num_nodes; ++n) {
    if (n != start) fs.push_back(top_f[n].h);
    if (n != end) bs.push_back(top_b[n].h);
  }
  const num::Var parts[] = {num::max_pool(fs), num::max_pool(bs)};
  return num::add(num::matvec(clf.out_weight, num::concat(parts)), clf.out_bias);
}

}  // namespace latlm::model
