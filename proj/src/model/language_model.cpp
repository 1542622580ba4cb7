#include "latlm/model/language_model.hpp"

#include <algorithm>

#include "latlm/errors.hpp"

namespace latlm::model {

namespace {

std::string cell_prefix(const char* direction, std::size_t layer) {
  return std::string("lm.") + direction + "." + std::to_string(layer);
}

num::Shape expected_shape(const std::string& name, const LmConfig& c) {
  if (name == "embedding") return {c.vocab_size, c.embed_dim};
  if (name == "decoder.weight") return {c.vocab_size, c.hidden_dim};
  if (name == "decoder.bias") return {c.vocab_size};
  // lm.<dir>.<k>.<w_x|w_h|b>
  const auto last_dot = name.rfind('.');
  const auto layer_dot = name.rfind('.', last_dot - 1);
  const std::size_t layer = std::stoul(name.substr(layer_dot + 1, last_dot - layer_dot - 1));
  const std::string leaf = name.substr(last_dot + 1);
  const std::size_t in = layer == 0 ? c.embed_dim : c.hidden_dim;
  if (leaf == "w_x") return {4 * c.hidden_dim, in};
  if (leaf == "w_h") return {4 * c.hidden_dim, c.hidden_dim};
  return {4 * c.hidden_dim};
}

}  // namespace

std::vector<std::string> lm_param_names(const LmConfig& config) {
  std::vector<std::string> names{"embedding", "decoder.weight"};
  if (config.decoder_bias) names.push_back("decoder.bias");
  for (const char* dir : {"fwd", "bwd"}) {
    for (std::size_t k = 0; k < config.layers; ++k) {
      for (const char* leaf : {".w_x", ".w_h", ".b"}) names.push_back(cell_prefix(dir, k) + leaf);
    }
  }
  std::sort(names.begin(), names.end());
  return names;
}

num::ParamSet init_lm_params(const LmConfig& config, std::uint64_t seed) {
  if (config.vocab_size == 0 || config.embed_dim == 0 || config.hidden_dim == 0 ||
      config.layers == 0) {
    throw ShapeError("language model dimensions must be positive");
  }
  data::Rng rng(seed);
  std::uniform_real_distribution<double> dist(-config.init_scale, config.init_scale);
  auto random = [&](num::Shape shape) {
    num::Tensor t(std::move(shape));
    for (double& v : t.values()) v = dist(rng);
    return t;
  };
  num::ParamSet params;
  params.add("embedding", random({config.vocab_size, config.embed_dim}));
  for (const char* dir : {"fwd", "bwd"}) {
    for (std::size_t k = 0; k < config.layers; ++k) {
      add_lstm_cell(params, cell_prefix(dir, k), k == 0 ? config.embed_dim : config.hidden_dim,
                    config.hidden_dim, config.init_scale, rng);
    }
  }
  params.add("decoder.weight", random({config.vocab_size, config.hidden_dim}));
  if (config.decoder_bias) params.add("decoder.bias", num::Tensor(num::Shape{config.vocab_size}));
  return params;
}

void check_lm_params(const num::ParamSet& params, const LmConfig& config) {
  const auto names = lm_param_names(config);
  for (const auto& name : names) {
    if (!params.contains(name)) throw ShapeError("missing language model tensor " + name);
    const auto want = expected_shape(name, config);
    const auto& got = params.at(name).value.shape();
    if (got != want) {
      throw ShapeError("tensor " + name + " has shape " + num::shape_string(got) + ", expected " +
                       num::shape_string(want));
    }
  }
  for (const auto& name : params.names()) {
    if (!std::binary_search(names.begin(), names.end(), name)) {
      throw ShapeError("unexpected language model tensor " + name);
    }
  }
}

LmVars bind_lm(num::Tape& tape, num::ParamSet& params, const LmConfig& config, bool trainable) {
  LmVars lm;
  lm.embedding = bind_param(tape, params, "embedding", trainable);
  for (std::size_t k = 0; k < config.layers; ++k) {
    lm.forward.push_back(bind_cell(tape, params, cell_prefix("fwd", k), trainable));
    lm.backward.push_back(bind_cell(tape, params, cell_prefix("bwd", k), trainable));
  }
  lm.decoder_weight = bind_param(tape, params, "decoder.weight", trainable);
  if (config.decoder_bias) lm.decoder_bias = bind_param(tape, params, "decoder.bias", trainable);
  return lm;
}

std::vector<num::Var> embed(const LmVars& lm, std::span<const std::size_t> ids) {
  std::vector<num::Var> out;
  out.reserve(ids.size());
  for (std::size_t id : ids) out.push_back(num::row(lm.embedding, id));
  return out;
}

num::Var decode_next(const LmVars& lm, num::Var h) {
  num::Var logits = num::matvec(lm.decoder_weight, h);
  return lm.decoder_bias ? num::add(logits, *lm.decoder_bias) : logits;
}

SequenceStates run_bidirectional_sequence(num::Tape& tape, const LmVars& lm,
                                          std::span<const std::size_t> ids) {
  const auto inputs = embed(lm, ids);
  SequenceStates out;
  out.forward = run_sequence(tape, inputs, lm.forward);
  std::vector<num::Var> reversed(inputs.rbegin(), inputs.rend());
  auto backward = run_sequence(tape, reversed, lm.backward);
  for (auto& layer : backward) std::reverse(layer.begin(), layer.end());
  out.backward = std::move(backward);
  return out;
}

num::ParamSet transfer_weights(const num::ParamSet& source, const LmConfig& config) {
  check_lm_params(source, config);
  num::ParamSet target;
  for (const auto& [name, p] : source) target.add(name, p.value);
  return target;
}

}  // namespace latlm::model
