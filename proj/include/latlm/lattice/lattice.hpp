#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace latlm::lattice {

using NodeId = std::uint32_t;

inline constexpr std::string_view kBosWord = "<bos>";
inline constexpr std::string_view kEosWord = "<eos>";

struct Transition {
  NodeId prev = 0;
  NodeId next = 0;
  std::string word;
  double prob = 1.0;

  friend bool operator==(const Transition&, const Transition&) = default;
};

// Edge-labeled weighted DAG. Nodes are the dense range [0, num_nodes);
// start and end are not stored but inferred from degrees.
struct Lattice {
  std::string id;
  std::size_t num_nodes = 0;
  std::vector<Transition> transitions;

  // Unique node without incoming transitions. Throws StructuralError when
  // there is not exactly one.
  NodeId start() const;
  // Unique node without outgoing transitions.
  NodeId end() const;

  friend bool operator==(const Lattice&, const Lattice&) = default;
};

// in[n] / out[n] as transition indices. Lists are sorted by
// (neighbour node, word, prob, index) so every consumer sees the same order
// regardless of how transitions are stored.
struct AdjacencyIndex {
  std::vector<std::vector<std::size_t>> incoming;
  std::vector<std::vector<std::size_t>> outgoing;

  static AdjacencyIndex build(const Lattice& lattice);
};

enum class ViolationKind {
  kEmpty,
  kNodeOutOfRange,
  kSelfLoop,
  kProbabilityOutOfRange,
  kCycle,
  kNoStart,
  kMultipleStarts,
  kNoEnd,
  kMultipleEnds,
  kUnreachableNode,
};

struct Violation {
  ViolationKind kind;
  std::string message;
};

struct ValidationReport {
  std::vector<Violation> violations;

  bool valid() const { return violations.empty(); }
  bool contains(ViolationKind kind) const;
  std::string summary() const;
};

ValidationReport validate(const Lattice& lattice);

// Throws StructuralError carrying the first violation when invalid.
void require_valid(const Lattice& lattice);

// Kahn's algorithm with ascending-NodeId tie-break. Throws StructuralError
// naming an edge on a cycle.
std::vector<NodeId> topological_order(const Lattice& lattice);

// Flips every transition. Transition i of the result is transition i of the
// input, reversed. Reversed probabilities are posterior-renormalized
// (P'(e) = alpha(prev) * P(e) / alpha(next), alpha = forward mass) so the
// reversed lattice is locally normalized and carries the same distribution
// over complete paths.
Lattice reverse(const Lattice& lattice);

Lattice from_token_sequence(const std::vector<std::string>& tokens,
                            std::string id = "chain");

// Divides each outgoing probability by its node's outgoing sum. Nodes whose
// sum already equals 1 within 1e-12 are left untouched, which makes the
// operation idempotent bit-for-bit.
Lattice normalize_outgoing(const Lattice& lattice);

// Prepends a <bos> transition and appends an <eos> transition. Node ids are
// shifted by one so the new start is node 0 and the new end is the last node.
Lattice wrap_sentinels(const Lattice& lattice);

struct Path {
  std::vector<std::string> words;
  double prob = 0.0;
};

using PathSet = std::vector<Path>;

// Every complete start->end path with nonzero probability, sorted by
// descending probability then lexicographically by word sequence. Throws
// StructuralError once more than max_paths paths exist.
PathSet enumerate_paths(const Lattice& lattice, std::size_t max_paths);

// Number of complete paths, saturating at SIZE_MAX.
std::size_t count_paths(const Lattice& lattice);

// Viterbi over log-probabilities; exact ties resolve to the lexicographically
// smallest word sequence.
std::vector<std::string> one_best_path(const Lattice& lattice);

// Edit distance between the closest complete path and `reference`.
std::size_t oracle_edit_distance(const Lattice& lattice,
                                 const std::vector<std::string>& reference);

// Forward mass alpha(n): sum over start->n paths of the product of
// transition probabilities.
std::vector<double> forward_mass(const Lattice& lattice);

}  // namespace latlm::lattice
