#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "latlm/data/text_io.hpp"
#include "latlm/data/vocab.hpp"
#include "latlm/lattice/lattice.hpp"

namespace latlm::data {

// Every stochastic step in data generation and training draws from this
// engine; its name is recorded in dataset manifests.
using Rng = std::mt19937_64;
inline constexpr const char* kRngName = "mt19937_64";

std::vector<double> dirichlet(Rng& rng, std::size_t k, double concentration);

struct ConfusionModel {
  double substitution_rate = 0.4;
  std::size_t branches = 2;
  double deletion_rate = 0.05;
  double concentration = 1.0;
  // Candidate confusions. Edit-distance-1 neighbours of the true word are
  // preferred; the rest are drawn uniformly from the pool.
  std::vector<std::string> pool;

  void check() const;
};

struct ConfusionStats {
  std::size_t positions = 0;
  std::size_t substituted = 0;
  std::size_t deleted = 0;
};

bool edit_distance_one(const std::string& a, const std::string& b);
std::size_t edit_distance(const Sentence& a, const Sentence& b);

// Sausage-shaped lattice over `sentence`: at each position, with probability
// substitution_rate, the true word competes with branches-1 confusables under
// Dirichlet(concentration) weights (the true word is not necessarily the
// most probable); with probability deletion_rate a skip transition bridges
// the position. The result is validated and locally normalized.
lattice::Lattice generate_confusion_lattice(const Sentence& sentence, const ConfusionModel& model,
                                            Rng& rng, std::string id = "utt",
                                            ConfusionStats* stats = nullptr);

// Sentence templates per label. A pattern is a space-separated token list
// where `{a|b|c}` picks one alternative (underscores inside an alternative
// become spaces) and `$name` picks from the shared slot list `name`.
struct TemplateSet {
  std::vector<std::string> labels;
  std::vector<std::vector<std::string>> patterns;  // per label
  std::map<std::string, std::vector<std::string>> slots;

  std::size_t combinations(std::size_t label) const;
  Sentence sample(std::size_t label, Rng& rng) const;
  std::vector<std::string> token_inventory() const;
};

// Five intent-style labels whose keywords have edit-distance-1 neighbours
// across labels.
TemplateSet default_intent_templates();

struct SplitSizes {
  std::size_t train = 200;
  std::size_t valid = 40;
  std::size_t test = 40;
};

struct TaskExample {
  std::string id;
  Sentence clean;
  lattice::Lattice lattice;
  Sentence one_best;
  std::size_t label = 0;
};

struct SyntheticTask {
  std::vector<std::string> labels;
  std::vector<TaskExample> train;
  std::vector<TaskExample> valid;
  std::vector<TaskExample> test;
  KeyValues manifest;
};

// Sizes are per label. Splits are disjoint by clean sentence. Throws
// DataError when a label's templates cannot supply enough distinct sentences.
SyntheticTask make_synthetic_task(const TemplateSet& templates, const SplitSizes& sizes,
                                  ConfusionModel model, std::uint64_t seed);

// Clean sentences drawn uniformly over labels; the stage-1 text corpus.
std::vector<Sentence> sample_text_corpus(const TemplateSet& templates, std::size_t count,
                                         std::uint64_t seed);

}  // namespace latlm::data
