#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "latlm/errors.hpp"
#include "latlm/model/classifier.hpp"
#include "latlm/model/language_model.hpp"
#include "latlm/numerics/gradcheck.hpp"
#include "latlm/pipeline/objective.hpp"
#include "support/oracle.hpp"
#include "support/random_lattice.hpp"

using namespace latlm;
using num::Tensor;
using num::Var;

namespace {

Tensor random_vector(std::mt19937_64& rng, std::size_t n, double scale = 1.0) {
  std::uniform_real_distribution<double> d(-scale, scale);
  Tensor t(num::Shape{n});
  for (double& v : t.values()) v = d(rng);
  return t;
}

std::vector<testing::Vec> to_vecs(const std::vector<Tensor>& ts) {
  std::vector<testing::Vec> out;
  for (const auto& t : ts) out.emplace_back(t.values().begin(), t.values().end());
  return out;
}

testing::Vec as_vec(const Var& v) {
  return testing::Vec(v.value().values().begin(), v.value().values().end());
}

// Stacked cells "<prefix>.<k>" with the given widths.
num::ParamSet stacked_cells(const std::string& prefix, std::size_t in, std::size_t hidden,
                            std::size_t layers, double scale, std::uint64_t seed) {
  num::ParamSet params;
  data::Rng rng(seed);
  for (std::size_t k = 0; k < layers; ++k) {
    model::add_lstm_cell(params, prefix + "." + std::to_string(k), k == 0 ? in : hidden, hidden,
                         scale, rng);
  }
  return params;
}

num::ParamSet single_cell(std::size_t in, std::size_t hidden, double scale, std::uint64_t seed) {
  num::ParamSet params;
  data::Rng rng(seed);
  model::add_lstm_cell(params, "c", in, hidden, scale, rng);
  return params;
}

std::vector<testing::RefCell> ref_cells(const num::ParamSet& params, const std::string& prefix,
                                        std::size_t layers) {
  std::vector<testing::RefCell> cells;
  for (std::size_t k = 0; k < layers; ++k) {
    cells.push_back(testing::RefCell::from(params, prefix + "." + std::to_string(k)));
  }
  return cells;
}

std::vector<model::CellVars> bind_cells(num::Tape& tape, num::ParamSet& params,
                                        const std::string& prefix, std::size_t layers,
                                        bool trainable = false) {
  std::vector<model::CellVars> cells;
  for (std::size_t k = 0; k < layers; ++k) {
    cells.push_back(model::bind_cell(tape, params, prefix + "." + std::to_string(k), trainable));
  }
  return cells;
}

std::vector<std::string> random_tokens(std::mt19937_64& rng, std::size_t n) {
  static const char* words[] = {"a", "b", "c", "d", "e"};
  std::vector<std::string> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(words[rng() % 5]);
  return out;
}

}  // namespace

TEST_CASE("lstm cell: zero weights give a zero hidden state") {
  num::ParamSet params;
  data::Rng rng(1);
  model::add_lstm_cell(params, "c", 3, 2, 0.1, rng);
  for (auto& [name, p] : params) p.value.fill(0.0);
  num::Tape tape;
  const auto cell = model::bind_cell(tape, params, "c", false);
  const auto out = model::lstm_cell_step(tape.constant(Tensor::vector({1.0, -2.0, 3.0})),
                                         model::zero_state(tape, 2), cell);
  for (double v : out.h.value().values()) CHECK(v == 0.0);
}

TEST_CASE("lstm cell: forget bias 1 with zero input weights keeps c at 0") {
  num::ParamSet params;
  data::Rng rng(2);
  model::add_lstm_cell(params, "c", 3, 2, 0.1, rng);
  CHECK(params.at("c.b").value[2] == 1.0);
  CHECK(params.at("c.b").value[3] == 1.0);
  CHECK(params.at("c.b").value[0] == 0.0);
  params.at("c.w_x").value.fill(0.0);
  params.at("c.w_h").value.fill(0.0);
  num::Tape tape;
  const auto cell = model::bind_cell(tape, params, "c", false);
  const auto out = model::lstm_cell_step(tape.constant(Tensor::vector({0.3, 0.1, -0.7})),
                                         model::zero_state(tape, 2), cell);
  for (double v : out.c.value().values()) CHECK(v == 0.0);
}

TEST_CASE("lstm cell: step matches the reference cell") {
  std::mt19937_64 rng(3);
  num::ParamSet params = single_cell(4, 3, 0.8, 3);
  num::Tape tape;
  const auto cell = model::bind_cell(tape, params, "c", false);
  const Tensor x = random_vector(rng, 4);
  const Tensor h0 = random_vector(rng, 3);
  const Tensor c0 = random_vector(rng, 3);
  const auto out = model::lstm_cell_step(tape.constant(x),
                                         model::CellState{tape.constant(h0), tape.constant(c0)},
                                         cell);
  const auto ref = testing::ref_step(testing::RefCell::from(params, "c"), to_vecs({x})[0],
                                     {to_vecs({h0})[0], to_vecs({c0})[0]});
  CHECK(testing::max_diff(as_vec(out.h), ref.h) < 1e-15);
  CHECK(testing::max_diff(as_vec(out.c), ref.c) < 1e-15);
}

TEST_CASE("lstm cell: gradient matches finite differences") {
  std::mt19937_64 rng(4);
  num::ParamSet params = single_cell(4, 3, 0.8, 4);
  const Tensor x = random_vector(rng, 4);
  const Tensor h0 = random_vector(rng, 3);
  const Tensor c0 = random_vector(rng, 3);
  const auto result = num::grad_check(
      [&](num::Tape& tape) {
        const auto cell = model::bind_cell(tape, params, "c", true);
        const auto out = model::lstm_cell_step(
            tape.constant(x), model::CellState{tape.constant(h0), tape.constant(c0)}, cell);
        const Var hc[] = {out.h, out.c};
        const Var v = num::concat(hc);
        return num::scale(num::dot(v, v), 0.5);
      },
      params, {.samples_per_tensor = 64});
  CHECK(result.max_rel_error < 1e-6);
  CHECK(result.coordinates_checked == params.num_scalars());
}

TEST_CASE("weighted_pool: worked examples") {
  num::Tape tape;
  auto state = [&](std::initializer_list<double> h) {
    return model::CellState{tape.constant(Tensor::vector(h)), tape.constant(Tensor::vector(h))};
  };
  SUBCASE("single edge is copied exactly") {
    const model::CellState in[] = {state({0.123456789, -3.5})};
    const double p[] = {0.37};
    const auto out = model::weighted_pool(in, p);
    CHECK(out.h.value() == in[0].h.value());
  }
  SUBCASE("equal weights") {
    const model::CellState in[] = {state({1, 0}), state({0, 1})};
    const double p[] = {0.5, 0.5};
    const auto out = model::weighted_pool(in, p);
    CHECK(out.h.value()[0] == doctest::Approx(0.5).epsilon(1e-15));
    CHECK(out.h.value()[1] == doctest::Approx(0.5).epsilon(1e-15));
  }
  SUBCASE("renormalized weights") {
    const model::CellState in[] = {state({2, 0}), state({0, 2})};
    const double p[] = {0.2, 0.6};
    const auto out = model::weighted_pool(in, p);
    CHECK(std::fabs(out.h.value()[0] - 0.5) < 1e-15);
    CHECK(std::fabs(out.h.value()[1] - 1.5) < 1e-15);
    CHECK(std::fabs(out.c.value()[1] - 1.5) < 1e-15);
  }
  SUBCASE("errors") {
    const model::CellState in[] = {state({1})};
    const double zero[] = {0.0};
    CHECK_THROWS_AS(model::weighted_pool(in, zero), ModelError);
    CHECK_THROWS_AS(model::weighted_pool({}, {}), ModelError);
  }
}

TEST_CASE("weighted_pool: output lies in the convex hull of its inputs") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> prob(0.01, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    num::Tape tape;
    const std::size_t k = 1 + rng() % 5;
    std::vector<model::CellState> in;
    std::vector<double> p;
    for (std::size_t i = 0; i < k; ++i) {
      in.push_back({tape.constant(random_vector(rng, 6, 3.0)), tape.constant(random_vector(rng, 6))});
      p.push_back(prob(rng));
    }
    const auto out = model::weighted_pool(in, p);
    for (std::size_t j = 0; j < 6; ++j) {
      double lo = INFINITY, hi = -INFINITY;
      for (const auto& s : in) {
        lo = std::min(lo, s.h.value()[j]);
        hi = std::max(hi, s.h.value()[j]);
      }
      CHECK(out.h.value()[j] >= lo - 1e-15);
      CHECK(out.h.value()[j] <= hi + 1e-15);
    }
  }
}

TEST_CASE("lattice lstm: a linear chain equals the sequential lstm") {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 25; ++trial) {
    const std::size_t layers = 1 + trial % 3;
    const std::size_t in = 2 + rng() % 4, hidden = 2 + rng() % 4;
    num::ParamSet params = stacked_cells("s", in, hidden, layers, 0.9, 100 + trial);
    const auto tokens = random_tokens(rng, 1 + rng() % 32);
    const auto chain = lattice::from_token_sequence(tokens);
    std::vector<Tensor> xs;
    for (std::size_t i = 0; i < tokens.size(); ++i) xs.push_back(random_vector(rng, in));

    num::Tape tape;
    std::vector<Var> inputs;
    for (const auto& x : xs) inputs.push_back(tape.constant(x));
    const auto cells = bind_cells(tape, params, "s", layers);
    const auto lat = model::run_lattice_direction(tape, chain, inputs, cells);
    const auto seq = model::run_sequence(tape, inputs, cells);
    const auto ref = testing::ref_sequence(ref_cells(params, "s", layers), to_vecs(xs));

    double worst = 0.0;
    for (std::size_t k = 0; k < layers; ++k) {
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        worst = std::max(worst, testing::max_diff(as_vec(lat.edges[k][t].h), as_vec(seq[k][t].h)));
        worst = std::max(worst, testing::max_diff(as_vec(lat.edges[k][t].c), as_vec(seq[k][t].c)));
        worst = std::max(worst, testing::max_diff(as_vec(lat.nodes[k][t + 1].h), ref[k][t].h));
      }
    }
    CHECK(worst <= 1e-12);
  }
}

TEST_CASE("lattice lstm: symmetric diamond branches agree") {
  const auto l = testing::diamond(0.6, "cat", "cat");
  num::ParamSet params = stacked_cells("s", 3, 4, 2, 0.9, 7);
  std::mt19937_64 rng(7);
  const Tensor cat = random_vector(rng, 3), sat = random_vector(rng, 3);
  num::Tape tape;
  const Var in[] = {tape.constant(cat), tape.constant(cat), tape.constant(sat),
                    tape.constant(sat)};
  const auto cells = bind_cells(tape, params, "s", 2);
  const auto out = model::run_lattice_direction(tape, l, in, cells);
  for (std::size_t k = 0; k < 2; ++k) {
    CHECK(out.edges[k][0].h.value() == out.edges[k][1].h.value());
    CHECK(out.edges[k][2].h.value() == out.edges[k][3].h.value());
    CHECK(testing::max_diff(as_vec(out.nodes[k][3].h), as_vec(out.edges[k][2].h)) < 1e-15);
  }
}

TEST_CASE("lattice lstm: matches a relaxation-order reference on random lattices") {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    const auto l = trial == 0 ? lattice::Lattice{"three", 3,
                                                 {{0, 1, "a", 0.7}, {0, 1, "b", 0.3},
                                                  {1, 2, "c", 0.4}, {0, 2, "d", 0.6}}}
                              : testing::random_lattice(rng, 3, 8, 4);
    const std::size_t layers = 2, in = 3, hidden = 4;
    num::ParamSet params = stacked_cells("s", in, hidden, layers, 0.9, 200 + trial);
    std::vector<Tensor> xs;
    for (std::size_t i = 0; i < l.transitions.size(); ++i) xs.push_back(random_vector(rng, in));
    num::Tape tape;
    std::vector<Var> inputs;
    for (const auto& x : xs) inputs.push_back(tape.constant(x));
    const auto cells = bind_cells(tape, params, "s", layers);
    const auto out = model::run_lattice_direction(tape, l, inputs, cells);
    const auto ref = testing::ref_lattice(l, ref_cells(params, "s", layers), to_vecs(xs));
    for (std::size_t k = 0; k < layers; ++k) {
      for (std::size_t n = 0; n < l.num_nodes; ++n) {
        CHECK(testing::max_diff(as_vec(out.nodes[k][n].h), ref[k][n].h) < 1e-13);
        CHECK(testing::max_diff(as_vec(out.nodes[k][n].c), ref[k][n].c) < 1e-13);
      }
    }
  }
}

TEST_CASE("lattice lstm: transition storage order does not change any state") {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    const auto l = testing::random_lattice(rng, 3, 9, 5);
    num::ParamSet params = stacked_cells("s", 3, 3, 2, 0.9, 300 + trial);
    std::vector<Tensor> xs;
    for (std::size_t i = 0; i < l.transitions.size(); ++i) xs.push_back(random_vector(rng, 3));
    std::vector<std::size_t> perm(l.transitions.size());
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), rng);
    lattice::Lattice shuffled = l;
    for (std::size_t i = 0; i < perm.size(); ++i) shuffled.transitions[i] = l.transitions[perm[i]];

    num::Tape tape;
    std::vector<Var> a, b;
    for (std::size_t i = 0; i < xs.size(); ++i) {
      a.push_back(tape.constant(xs[i]));
      b.push_back(tape.constant(xs[perm[i]]));
    }
    const auto cells = bind_cells(tape, params, "s", 2);
    const auto oa = model::lattice_lstm_forward(tape, l, a, cells, cells);
    const auto ob = model::lattice_lstm_forward(tape, shuffled, b, cells, cells);
    for (std::size_t k = 0; k < 2; ++k) {
      for (std::size_t n = 0; n < l.num_nodes; ++n) {
        CHECK(testing::max_diff(as_vec(oa.forward.nodes[k][n].h), as_vec(ob.forward.nodes[k][n].h)) <= 1e-15);
        CHECK(testing::max_diff(as_vec(oa.backward.nodes[k][n].h), as_vec(ob.backward.nodes[k][n].h)) <= 1e-15);
      }
      for (std::size_t i = 0; i < perm.size(); ++i) {
        CHECK(testing::max_diff(as_vec(oa.forward.edges[k][perm[i]].h), as_vec(ob.forward.edges[k][i].h)) <= 1e-15);
      }
    }
  }
}

TEST_CASE("lattice lstm: backward direction of a chain reads the tokens right to left") {
  std::mt19937_64 rng(10);
  const auto chain = lattice::from_token_sequence({"a", "b", "c", "d"});
  num::ParamSet params = stacked_cells("s", 2, 3, 1, 0.9, 10);
  std::vector<Tensor> xs;
  for (int i = 0; i < 4; ++i) xs.push_back(random_vector(rng, 2));
  num::Tape tape;
  std::vector<Var> inputs;
  for (const auto& x : xs) inputs.push_back(tape.constant(x));
  const auto cells = bind_cells(tape, params, "s", 1);
  const auto out = model::lattice_lstm_forward(tape, chain, inputs, cells, cells);
  auto rev = to_vecs(xs);
  std::reverse(rev.begin(), rev.end());
  const auto ref = testing::ref_sequence(ref_cells(params, "s", 1), rev);
  // After reading d, c, b, a the backward state sits on node 0.
  for (std::size_t t = 0; t < 4; ++t) {
    CHECK(testing::max_diff(as_vec(out.backward.nodes[0][3 - t].h), ref[0][t].h) < 1e-15);
  }
}

TEST_CASE("decode_next: identity, zero and random weights") {
  model::LmConfig cfg{.vocab_size = 5, .embed_dim = 2, .hidden_dim = 5, .layers = 1};
  num::ParamSet params = model::init_lm_params(cfg, 11);
  SUBCASE("identity weights map a one-hot state to itself") {
    auto& w = params.at("decoder.weight").value;
    w.fill(0.0);
    for (std::size_t i = 0; i < 5; ++i) w.at(i, i) = 1.0;
    params.at("decoder.bias").value.fill(0.0);
    num::Tape tape;
    const auto lm = model::bind_lm(tape, params, cfg, false);
    const auto logits = model::decode_next(lm, tape.constant(Tensor::vector({0, 0, 1, 0, 0})));
    CHECK(logits.value() == Tensor::vector({0, 0, 1, 0, 0}));
  }
  SUBCASE("zero weights give a uniform softmax") {
    params.at("decoder.weight").value.fill(0.0);
    params.at("decoder.bias").value.fill(0.0);
    num::Tape tape;
    const auto lm = model::bind_lm(tape, params, cfg, false);
    const auto q = num::softmax(model::decode_next(lm, tape.constant(Tensor::vector({1, 2, 3, 4, 5}))));
    for (double v : q.value().values()) CHECK(std::fabs(v - 0.2) < 1e-15);
  }
  SUBCASE("random weights match a direct product") {
    std::mt19937_64 rng(12);
    const Tensor h = random_vector(rng, 5);
    num::Tape tape;
    const auto lm = model::bind_lm(tape, params, cfg, false);
    const auto logits = model::decode_next(lm, tape.constant(h));
    const auto& w = params.at("decoder.weight").value;
    const auto& b = params.at("decoder.bias").value;
    for (std::size_t r = 0; r < 5; ++r) {
      double s = b[r];
      for (std::size_t c = 0; c < 5; ++c) s += w.at(r, c) * h[c];
      CHECK(std::fabs(logits.value()[r] - s) < 1e-15);
    }
  }
  SUBCASE("bias-free decoder") {
    cfg.decoder_bias = false;
    num::ParamSet nb = model::init_lm_params(cfg, 11);
    CHECK_FALSE(nb.contains("decoder.bias"));
    num::Tape tape;
    const auto lm = model::bind_lm(tape, nb, cfg, false);
    const auto logits = model::decode_next(lm, tape.constant(Tensor(num::Shape{5})));
    for (double v : logits.value().values()) CHECK(v == 0.0);
  }
}

TEST_CASE("lm parameters: names, init determinism and shape checks") {
  model::LmConfig cfg{.vocab_size = 7, .embed_dim = 3, .hidden_dim = 4, .layers = 2};
  const auto a = model::init_lm_params(cfg, 5);
  const auto b = model::init_lm_params(cfg, 5);
  const auto c = model::init_lm_params(cfg, 6);
  CHECK(a.names() == model::lm_param_names(cfg));
  CHECK(a.checksum() == b.checksum());
  CHECK(a.checksum() != c.checksum());
  CHECK(a.at("lm.bwd.1.w_x").value.shape() == num::Shape{16, 4});
  CHECK(a.at("embedding").value.shape() == num::Shape{7, 3});
  CHECK_NOTHROW(model::check_lm_params(a, cfg));
  model::LmConfig wider = cfg;
  wider.hidden_dim = 5;
  CHECK_THROWS_AS(model::check_lm_params(a, wider), ShapeError);
}

TEST_CASE("transfer_weights: copies, preserves checksums, names mismatches") {
  model::LmConfig cfg{.vocab_size = 8, .embed_dim = 3, .hidden_dim = 4, .layers = 2};
  const auto source = model::init_lm_params(cfg, 13);
  auto target = model::transfer_weights(source, cfg);
  for (const auto& [name, p] : source) {
    CHECK(num::checksum(target.at(name).value) == num::checksum(p.value));
  }

  SUBCASE("lattice run on a chain reproduces the sequential run") {
    auto seq_params = source;
    const std::vector<std::size_t> ids{1, 4, 5, 3, 7, 2};
    num::Tape tape;
    const auto seq_lm = model::bind_lm(tape, seq_params, cfg, false);
    const auto lat_lm = model::bind_lm(tape, target, cfg, false);
    const auto seq = model::run_bidirectional_sequence(tape, seq_lm, ids);
    std::vector<std::string> words{"w1", "w4", "w5", "w3", "w7", "w2"};
    const auto chain = lattice::from_token_sequence(words);
    const auto lat = model::lattice_lstm_forward(tape, chain, model::embed(lat_lm, ids),
                                                 lat_lm.forward, lat_lm.backward);
    double worst = 0.0;
    for (std::size_t k = 0; k < cfg.layers; ++k) {
      for (std::size_t t = 0; t < ids.size(); ++t) {
        worst = std::max(worst, testing::max_diff(as_vec(seq.forward[k][t].h),
                                                  as_vec(lat.forward.nodes[k][t + 1].h)));
        worst = std::max(worst, testing::max_diff(as_vec(seq.backward[k][t].h),
                                                  as_vec(lat.backward.nodes[k][t].h)));
      }
    }
    CHECK(worst <= 1e-12);
  }

  SUBCASE("mis-shaped tensor is named") {
    auto bad = source;
    bad.at("lm.fwd.1.w_h").value = Tensor(num::Shape{16, 5});
    try {
      model::transfer_weights(bad, cfg);
      FAIL("expected ShapeError");
    } catch (const ShapeError& e) {
      CHECK(std::string(e.what()).find("lm.fwd.1.w_h") != std::string::npos);
    }
  }
}

TEST_CASE("scalar_mix: worked examples") {
  num::Tape tape;
  const Var reps[] = {tape.constant(Tensor::vector({1, 2})), tape.constant(Tensor::vector({3, 6})),
                      tape.constant(Tensor::vector({5, 1}))};
  const Var one = tape.constant(Tensor::scalar(1.0));
  SUBCASE("equal logits average the layers") {
    const auto out = model::scalar_mix(reps, tape.constant(Tensor::vector({0.4, 0.4, 0.4})), one);
    CHECK(std::fabs(out.value()[0] - 3.0) < 1e-15);
    CHECK(std::fabs(out.value()[1] - 3.0) < 1e-15);
  }
  SUBCASE("one saturated logit selects its layer") {
    const auto out = model::scalar_mix(reps, tape.constant(Tensor::vector({0, 1e6, 0})), one);
    CHECK(out.value() == Tensor::vector({3, 6}));
  }
  SUBCASE("logits (ln 3, 0) weigh 0.75 / 0.25") {
    const Var two[] = {reps[0], reps[1]};
    const auto out =
        model::scalar_mix(two, tape.constant(Tensor::vector({std::log(3.0), 0.0})), one);
    CHECK(std::fabs(out.value()[0] - (0.75 * 1 + 0.25 * 3)) < 1e-15);
    CHECK(std::fabs(out.value()[1] - (0.75 * 2 + 0.25 * 6)) < 1e-15);
  }
  SUBCASE("gamma scales the mix") {
    const auto out = model::scalar_mix(reps, tape.constant(Tensor::vector({0, 0, 0})),
                                       tape.constant(Tensor::scalar(2.0)));
    CHECK(std::fabs(out.value()[0] - 6.0) < 1e-14);
  }
  SUBCASE("count mismatch") {
    CHECK_THROWS_AS(model::scalar_mix(reps, tape.constant(Tensor::vector({0, 0})), one),
                    ShapeError);
  }
}

TEST_CASE("max_pool picks the elementwise maximum") {
  num::Tape tape;
  const Var xs[] = {tape.constant(Tensor::vector({1, -2})), tape.constant(Tensor::vector({0, 3}))};
  CHECK(num::max_pool(xs).value() == Tensor::vector({1, 3}));
}

namespace {

struct ClassifierFixture {
  model::ClassifierConfig cfg{.input_dim = 4, .lm_layers = 1, .hidden_dim = 3, .layers = 2,
                              .num_labels = 3, .init_scale = 0.8};
  num::ParamSet params;
  ClassifierFixture() { model::add_classifier_params(params, cfg, 21); }
};

// Sequential bidirectional classifier on the context vectors of nodes 1..n.
testing::Vec sequential_classifier(const num::ParamSet& params, std::size_t layers,
                                   const std::vector<testing::Vec>& ctx) {
  std::vector<testing::Vec> fwd_in(ctx.begin() + 1, ctx.end());
  std::vector<testing::Vec> bwd_in(fwd_in.rbegin(), fwd_in.rend());
  const auto f = testing::ref_sequence(ref_cells(params, "clf.fwd", layers), fwd_in);
  const auto b = testing::ref_sequence(ref_cells(params, "clf.bwd", layers), bwd_in);
  auto pool = [](const std::vector<testing::RefState>& states) {
    testing::Vec m(states[0].h.size(), -INFINITY);
    for (const auto& s : states) {
      for (std::size_t j = 0; j < m.size(); ++j) m[j] = std::max(m[j], s.h[j]);
    }
    return m;
  };
  testing::Vec feat = pool(f.back());
  const auto bp = pool(b.back());
  feat.insert(feat.end(), bp.begin(), bp.end());
  const auto& w = params.at("clf.out.weight").value;
  const auto& bias = params.at("clf.out.bias").value;
  testing::Vec logits(w.dim(0));
  for (std::size_t r = 0; r < w.dim(0); ++r) {
    logits[r] = bias[r];
    for (std::size_t c = 0; c < feat.size(); ++c) logits[r] += w.at(r, c) * feat[c];
  }
  return logits;
}

}  // namespace

TEST_CASE("classifier: parameter layout") {
  ClassifierFixture fx;
  CHECK(fx.params.names() == model::classifier_param_names(fx.cfg));
  CHECK(fx.params.at("mix.logits").value == Tensor(num::Shape{2}));
  CHECK(fx.params.at("mix.gamma").value[0] == 1.0);
  CHECK(fx.params.at("clf.out.weight").value.shape() == num::Shape{3, 6});
  model::ClassifierConfig one_label = fx.cfg;
  one_label.num_labels = 1;
  num::ParamSet p;
  CHECK_THROWS_AS(model::add_classifier_params(p, one_label, 1), ShapeError);
}

TEST_CASE("classifier: single edge pools exactly one state per direction") {
  ClassifierFixture fx;
  const lattice::Lattice l{"one", 2, {{0, 1, "a", 1.0}}};
  std::mt19937_64 rng(22);
  const Tensor c0 = random_vector(rng, 4), c1 = random_vector(rng, 4);
  num::Tape tape;
  const auto clf = model::bind_classifier(tape, fx.params, fx.cfg, false);
  const Var ctx[] = {tape.constant(c0), tape.constant(c1)};
  const auto logits = model::classifier_forward(tape, l, lattice::reverse(l), ctx, clf);
  const auto ref = sequential_classifier(fx.params, 2, to_vecs({c0, c1}));
  CHECK(testing::max_diff(as_vec(logits), ref) < 1e-15);
}

TEST_CASE("classifier: a linear chain equals the sequential bidirectional classifier") {
  ClassifierFixture fx;
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 20; ++trial) {
    const auto tokens = random_tokens(rng, 1 + rng() % 12);
    const auto chain = lattice::from_token_sequence(tokens);
    std::vector<Tensor> ctx;
    for (std::size_t n = 0; n < chain.num_nodes; ++n) ctx.push_back(random_vector(rng, 4, 2.0));
    num::Tape tape;
    const auto clf = model::bind_classifier(tape, fx.params, fx.cfg, false);
    std::vector<Var> vars;
    for (const auto& c : ctx) vars.push_back(tape.constant(c));
    const auto logits = model::classifier_forward(tape, chain, lattice::reverse(chain), vars, clf);
    CHECK(testing::max_diff(as_vec(logits), sequential_classifier(fx.params, 2, to_vecs(ctx))) <=
          1e-12);
  }
}

TEST_CASE("lm_layer_representations: chain layout") {
  model::LmConfig cfg{.vocab_size = 6, .embed_dim = 2, .hidden_dim = 3, .layers = 2};
  auto params = model::init_lm_params(cfg, 31);
  const auto vocab = data::Vocabulary::from_entries(
      {{"<unk>", 0}, {"<bos>", 0}, {"<eos>", 0}, {"x", 2}, {"y", 1}, {"z", 1}});
  const auto chain = lattice::from_token_sequence({"x", "y"});
  const auto reps =
      model::lm_layer_representations(params, cfg, chain, lattice::reverse(chain), vocab);
  REQUIRE(reps.size() == 3);
  REQUIRE(reps[1].size() == 3);
  const auto& e = params.at("embedding").value;
  // node 1 was entered by "x" (id 3)
  CHECK(reps[1][0][0] == e.at(3, 0));
  CHECK(reps[1][0][1] == e.at(3, 1));
  CHECK(reps[1][0][2] == 0.0);
  CHECK(reps[1][0][3] == e.at(3, 0));
  CHECK(reps[1][0][5] == 0.0);
  for (double v : reps[0][0].values()) CHECK(v == 0.0);
  for (const auto& r : reps[2]) CHECK(r.size() == 6);
}

TEST_CASE("full lattice LM gradient matches finite differences") {
  model::LmConfig cfg{.vocab_size = 7, .embed_dim = 4, .hidden_dim = 3, .layers = 2,
                      .decoder_bias = true, .init_scale = 1.0};
  const auto vocab = data::Vocabulary::from_entries(
      {{"<unk>", 0}, {"<bos>", 0}, {"<eos>", 0}, {"cat", 1}, {"cap", 1}, {"sat", 2}, {"on", 1}});
  std::mt19937_64 rng(41);
  std::vector<lattice::Lattice> lattices{testing::diamond()};
  for (int i = 0; i < 2; ++i) {
    lattices.push_back(testing::random_lattice(rng, 3, 6, 2, {"cat", "cap", "sat", "on", "mat"}));
  }
  for (std::size_t i = 0; i < lattices.size(); ++i) {
    auto params = model::init_lm_params(cfg, 50 + i);
    const auto ex = pipeline::prepare_lm_example(lattices[i], vocab);
    REQUIRE(ex.forward.num_nodes <= 8);
    const auto result = num::grad_check(
        [&](num::Tape& tape) {
          const auto lm = model::bind_lm(tape, params, cfg, true);
          return pipeline::lattice_lm_loss(tape, lm, ex);
        },
        params, {.samples_per_tensor = 16, .seed = i});
    INFO("worst " << result.worst_param << "[" << result.worst_index << "] a=" << result.worst_analytic << " n=" << result.worst_numeric);
    CHECK(result.max_rel_error < 1e-4);
  }
}

TEST_CASE("full classifier gradient matches finite differences") {
  ClassifierFixture fx;
  fx.cfg.lm_layers = 2;
  fx.params = num::ParamSet{};
  model::add_classifier_params(fx.params, fx.cfg, 42);
  fx.params.at("mix.logits").value = Tensor::vector({0.3, -0.2, 0.5});
  std::mt19937_64 rng(43);
  const auto l = testing::random_lattice(rng, 4, 7, 3);
  const auto r = lattice::reverse(l);
  std::vector<std::vector<Tensor>> reps(l.num_nodes);
  for (auto& node : reps) {
    for (int k = 0; k < 3; ++k) node.push_back(random_vector(rng, 4));
  }
  const auto result = num::grad_check(
      [&](num::Tape& tape) {
        const auto clf = model::bind_classifier(tape, fx.params, fx.cfg, true);
        std::vector<Var> ctx;
        for (const auto& node : reps) {
          std::vector<Var> layer;
          for (const auto& t : node) layer.push_back(tape.constant_view(t));
          ctx.push_back(model::scalar_mix(layer, clf.mix_logits, clf.mix_gamma));
        }
        return num::cross_entropy(model::classifier_forward(tape, l, r, ctx, clf), 1);
      },
      fx.params, {.samples_per_tensor = 16});
  INFO("worst " << result.worst_param << " a=" << result.worst_analytic << " n=" << result.worst_numeric);
  CHECK(result.max_rel_error < 1e-4);
}
