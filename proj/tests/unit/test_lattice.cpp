#include <doctest.h>

#include <cmath>
#include <map>
#include <random>
#include <set>

#include "latlm/errors.hpp"
#include "latlm/lattice/lattice.hpp"
#include "support/random_lattice.hpp"

using namespace latlm;
using namespace latlm::lattice;

namespace {

Lattice chain(std::vector<std::string> words) { return from_token_sequence(words); }

std::vector<std::string> words_of(const Path& p) { return p.words; }

}  // namespace

TEST_CASE("validate accepts a chain and reports cycles and unreachable nodes") {
  CHECK(validate(chain({"a", "b", "c"})).valid());

  Lattice cyc;
  cyc.num_nodes = 2;
  cyc.transitions = {{0, 1, "a", 1.0}, {1, 0, "b", 1.0}};
  const auto r = validate(cyc);
  CHECK(r.contains(ViolationKind::kCycle));
  CHECK(r.summary().find("cycle") != std::string::npos);

  Lattice d = testing::diamond();
  d.num_nodes = 5;
  const auto r2 = validate(d);
  CHECK_FALSE(r2.valid());
  CHECK(r2.summary().find("unreachable node n4") != std::string::npos);
}

TEST_CASE("validate flags self-loops, probabilities and start/end counts") {
  Lattice l = chain({"a", "b"});
  l.transitions.push_back({1, 1, "x", 0.5});
  CHECK(validate(l).contains(ViolationKind::kSelfLoop));

  Lattice p = chain({"a"});
  p.transitions[0].prob = 1.5;
  CHECK(validate(p).contains(ViolationKind::kProbabilityOutOfRange));

  Lattice two_starts;
  two_starts.num_nodes = 3;
  two_starts.transitions = {{0, 2, "a", 1.0}, {1, 2, "b", 1.0}};
  CHECK(validate(two_starts).contains(ViolationKind::kMultipleStarts));

  Lattice two_ends;
  two_ends.num_nodes = 3;
  two_ends.transitions = {{0, 1, "a", 0.5}, {0, 2, "b", 0.5}};
  CHECK(validate(two_ends).contains(ViolationKind::kMultipleEnds));

  Lattice out_of_range;
  out_of_range.num_nodes = 2;
  out_of_range.transitions = {{0, 5, "a", 1.0}};
  CHECK(validate(out_of_range).contains(ViolationKind::kNodeOutOfRange));

  Lattice empty;
  CHECK_FALSE(validate(empty).valid());
  CHECK_THROWS_AS(require_valid(two_ends), StructuralError);
}

TEST_CASE("parallel edges between the same pair of nodes are allowed") {
  Lattice l;
  l.num_nodes = 2;
  l.transitions = {{0, 1, "a", 0.5}, {0, 1, "a", 0.5}};
  CHECK(validate(l).valid());
}

TEST_CASE("topological order breaks ties by node id") {
  CHECK(topological_order(chain({"a", "b", "c"})) == std::vector<NodeId>{0, 1, 2, 3});
  CHECK(topological_order(testing::diamond()) == std::vector<NodeId>{0, 1, 2, 3});

  Lattice relabeled;
  relabeled.num_nodes = 4;
  relabeled.transitions = {{0, 2, "x", 0.5}, {0, 1, "y", 0.5}, {2, 3, "z", 1.0}, {1, 3, "z", 1.0}};
  CHECK(topological_order(relabeled) == std::vector<NodeId>{0, 1, 2, 3});

  Lattice backwards;
  backwards.num_nodes = 3;
  backwards.transitions = {{2, 1, "a", 1.0}, {1, 0, "b", 1.0}};
  CHECK(topological_order(backwards) == std::vector<NodeId>{2, 1, 0});
}

TEST_CASE("topological order names an edge on a cycle") {
  Lattice cyc;
  cyc.id = "loop";
  cyc.num_nodes = 3;
  cyc.transitions = {{0, 1, "a", 1.0}, {1, 2, "b", 1.0}, {2, 1, "c", 1.0}};
  try {
    topological_order(cyc);
    FAIL("expected a cycle error");
  } catch (const StructuralError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("cycle") != std::string::npos);
    const bool names_cycle_edge = msg.find("n1 -> n2") != std::string::npos ||
                                  msg.find("n2 -> n1") != std::string::npos;
    CHECK(names_cycle_edge);
  }
}

TEST_CASE("reverse flips a chain") {
  const Lattice r = reverse(chain({"a", "b", "c"}));
  CHECK(validate(r).valid());
  const auto paths = enumerate_paths(r, 10);
  REQUIRE(paths.size() == 1);
  CHECK(paths[0].words == std::vector<std::string>{"c", "b", "a"});
  for (const auto& t : r.transitions) CHECK(t.prob == 1.0);
  CHECK(r.start() == 3);
  CHECK(r.end() == 0);
}

TEST_CASE("reverse is an involution on topology and words") {
  const Lattice d = testing::diamond();
  const Lattice rr = reverse(reverse(d));
  REQUIRE(rr.transitions.size() == d.transitions.size());
  for (std::size_t i = 0; i < d.transitions.size(); ++i) {
    CHECK(rr.transitions[i].prev == d.transitions[i].prev);
    CHECK(rr.transitions[i].next == d.transitions[i].next);
    CHECK(rr.transitions[i].word == d.transitions[i].word);
    CHECK(rr.transitions[i].prob == doctest::Approx(d.transitions[i].prob).epsilon(1e-12));
  }
}

TEST_CASE("reverse keeps the path distribution of a diamond") {
  const Lattice r = reverse(testing::diamond(0.6));
  const auto out_start = [&] {
    std::map<std::string, double> m;
    for (const auto& t : r.transitions) {
      if (t.prev == r.start()) m[t.word] += t.prob;
    }
    return m;
  }();
  // The new start has one edge ("sat"); the branch choice moves to node 1/2 -> 0.
  CHECK(out_start.at("sat") == doctest::Approx(1.0));
  const auto paths = enumerate_paths(r, 10);
  REQUIRE(paths.size() == 2);
  CHECK(paths[0].prob == doctest::Approx(0.6).epsilon(1e-12));
  CHECK(paths[1].prob == doctest::Approx(0.4).epsilon(1e-12));
  CHECK(paths[0].words == std::vector<std::string>{"sat", "cat"});
}

TEST_CASE("reverse rejects invalid input") {
  Lattice bad;
  bad.num_nodes = 2;
  bad.transitions = {{0, 1, "a", 1.0}, {1, 0, "b", 1.0}};
  CHECK_THROWS_AS(reverse(bad), StructuralError);
}

TEST_CASE("from_token_sequence builds a chain") {
  const Lattice l = from_token_sequence({"show", "flights"});
  CHECK(l.num_nodes == 3);
  REQUIRE(l.transitions.size() == 2);
  CHECK(l.transitions[0].prob == 1.0);
  CHECK(l.transitions[1].prob == 1.0);
  CHECK(l.transitions[1].word == "flights");

  const Lattice single = from_token_sequence({"a"});
  CHECK(single.num_nodes == 2);
  CHECK(single.transitions.size() == 1);

  CHECK(one_best_path(chain({"a", "b", "c"})) == std::vector<std::string>{"a", "b", "c"});
  CHECK_THROWS_AS(from_token_sequence({}), StructuralError);
}

TEST_CASE("normalize_outgoing scales each node's outgoing mass") {
  auto two_way = [](double p, double q) {
    Lattice l;
    l.num_nodes = 2;
    l.transitions = {{0, 1, "a", p}, {0, 1, "b", q}};
    return l;
  };
  auto probs = [](const Lattice& l) {
    return std::vector<double>{l.transitions[0].prob, l.transitions[1].prob};
  };
  CHECK(probs(normalize_outgoing(two_way(0.2, 0.2))) == std::vector<double>{0.5, 0.5});
  CHECK(probs(normalize_outgoing(two_way(0.3, 0.7))) == std::vector<double>{0.3, 0.7});
  CHECK(probs(normalize_outgoing(two_way(1.0, 3.0))) == std::vector<double>{0.25, 0.75});

  try {
    normalize_outgoing(two_way(0.0, 0.0));
    FAIL("expected a normalization error");
  } catch (const StructuralError& e) {
    CHECK(std::string(e.what()).find("n0") != std::string::npos);
  }
}

TEST_CASE("wrap_sentinels adds one node and one edge at each end") {
  const Lattice w = wrap_sentinels(chain({"a", "b"}));
  const auto paths = enumerate_paths(w, 10);
  REQUIRE(paths.size() == 1);
  CHECK(paths[0].words == std::vector<std::string>{"<bos>", "a", "b", "<eos>"});

  const Lattice d = testing::diamond();
  const Lattice wd = wrap_sentinels(d);
  CHECK(wd.num_nodes == d.num_nodes + 2);
  CHECK(wd.transitions.size() == d.transitions.size() + 2);
  CHECK(validate(wd).valid());
  CHECK(validate(normalize_outgoing(wd)).valid());
  CHECK(enumerate_paths(wd, 10).size() == 2);
}

TEST_CASE("enumerate_paths lists every path with its product probability") {
  const auto one = enumerate_paths(chain({"a", "b"}), 10);
  REQUIRE(one.size() == 1);
  CHECK(one[0].prob == 1.0);

  const auto two = enumerate_paths(testing::diamond(0.6), 10);
  REQUIRE(two.size() == 2);
  CHECK(two[0].prob == doctest::Approx(0.6));
  CHECK(two[1].prob == doctest::Approx(0.4));

  Lattice twice;
  twice.num_nodes = 3;
  twice.transitions = {{0, 1, "a", 0.6}, {0, 1, "b", 0.4}, {1, 2, "c", 0.5}, {1, 2, "d", 0.5}};
  const auto four = enumerate_paths(twice, 10);
  REQUIRE(four.size() == 4);
  CHECK(four[0].prob == doctest::Approx(0.3));
  CHECK(four[1].prob == doctest::Approx(0.3));
  CHECK(four[2].prob == doctest::Approx(0.2));
  CHECK(four[3].prob == doctest::Approx(0.2));
  // equal probabilities fall back to lexicographic order
  CHECK(four[0].words == std::vector<std::string>{"a", "c"});
  CHECK(four[1].words == std::vector<std::string>{"a", "d"});

  CHECK_THROWS_AS(enumerate_paths(twice, 3), StructuralError);
  CHECK(count_paths(twice) == 4);
}

TEST_CASE("one_best_path picks the most probable path") {
  CHECK(one_best_path(testing::diamond(0.7)) == std::vector<std::string>{"cat", "sat"});
  CHECK(one_best_path(testing::diamond(0.3)) == std::vector<std::string>{"cap", "sat"});

  Lattice sausage;
  sausage.num_nodes = 4;
  sausage.transitions = {{0, 1, "a", 0.4}, {0, 1, "b", 0.6}, {1, 2, "c", 0.7}, {1, 2, "d", 0.3},
                         {2, 3, "e", 0.45}, {2, 3, "f", 0.55}};
  CHECK(one_best_path(sausage) == words_of(enumerate_paths(sausage, 100).front()));

  Lattice tie;
  tie.num_nodes = 2;
  tie.transitions = {{0, 1, "zed", 0.5}, {0, 1, "abc", 0.5}};
  CHECK(one_best_path(tie) == std::vector<std::string>{"abc"});
}

TEST_CASE("oracle edit distance finds the closest path") {
  const Lattice d = testing::diamond(0.9);
  CHECK(oracle_edit_distance(d, {"cap", "sat"}) == 0);
  CHECK(oracle_edit_distance(d, {"cup", "sat"}) == 1);
  CHECK(oracle_edit_distance(d, {"sat"}) == 1);
}

TEST_CASE("structural properties hold on random lattices") {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 300; ++trial) {
    const Lattice l = testing::random_lattice(rng, 2, 9, 4);
    CAPTURE(trial);
    REQUIRE(validate(l).valid());

    const auto order = topological_order(l);
    REQUIRE(order.size() == l.num_nodes);
    std::vector<std::size_t> pos(l.num_nodes);
    for (std::size_t i = 0; i < order.size(); ++i) pos[order[i]] = i;
    for (const auto& t : l.transitions) CHECK(pos[t.prev] < pos[t.next]);

    const Lattice once = normalize_outgoing(l);
    CHECK(normalize_outgoing(once) == once);

    const auto paths = enumerate_paths(l, 100000);
    double total = 0.0;
    for (const auto& p : paths) total += p.prob;
    CHECK(total == doctest::Approx(1.0).epsilon(1e-6));

    if (paths.size() <= 200) CHECK(one_best_path(l) == paths.front().words);

    const Lattice r = reverse(l);
    CHECK(validate(r).valid());
    const auto rpaths = enumerate_paths(r, 100000);
    CHECK(rpaths.size() == paths.size());
    double rtotal = 0.0;
    for (const auto& p : rpaths) rtotal += p.prob;
    CHECK(rtotal == doctest::Approx(1.0).epsilon(1e-6));
  }
}

TEST_CASE("reversal preserves each path's probability") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 100; ++trial) {
    const Lattice l = testing::random_lattice(rng, 2, 7, 3, {"a", "b", "c", "d", "e", "f", "g"});
    std::map<std::vector<std::string>, double> forward;
    for (const auto& p : enumerate_paths(l, 100000)) forward[p.words] += p.prob;
    std::map<std::vector<std::string>, double> backward;
    for (auto p : enumerate_paths(reverse(l), 100000)) {
      std::reverse(p.words.begin(), p.words.end());
      backward[p.words] += p.prob;
    }
    REQUIRE(forward.size() == backward.size());
    for (const auto& [words, prob] : forward) {
      CHECK(backward.at(words) == doctest::Approx(prob).epsilon(1e-9));
    }
  }
}

TEST_CASE("storage order of transitions does not change the results") {
  std::mt19937_64 rng(3);
  for (int trial = 0; trial < 50; ++trial) {
    Lattice l = testing::random_lattice(rng, 3, 8, 3);
    Lattice shuffled = l;
    std::shuffle(shuffled.transitions.begin(), shuffled.transitions.end(), rng);
    CHECK(topological_order(l) == topological_order(shuffled));
    CHECK(one_best_path(l) == one_best_path(shuffled));
    const auto a = enumerate_paths(l, 100000);
    const auto b = enumerate_paths(shuffled, 100000);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i].words == b[i].words);
  }
}

TEST_CASE("forward mass sums incoming path probability") {
  const auto alpha = forward_mass(testing::diamond(0.6));
  CHECK(alpha[0] == 1.0);
  CHECK(alpha[1] == doctest::Approx(0.6));
  CHECK(alpha[2] == doctest::Approx(0.4));
  CHECK(alpha[3] == doctest::Approx(1.0));
}
