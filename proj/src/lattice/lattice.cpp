#include "latlm/lattice/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <queue>
#include <sstream>
#include <tuple>

#include "latlm/errors.hpp"

namespace latlm::lattice {

namespace {

std::string node_name(std::size_t n) { return "n" + std::to_string(n); }

bool in_range(const Lattice& lattice, const Transition& t) {
  return t.prev < lattice.num_nodes && t.next < lattice.num_nodes;
}

void require_in_range(const Lattice& lattice) {
  for (std::size_t i = 0; i < lattice.transitions.size(); ++i) {
    if (!in_range(lattice, lattice.transitions[i])) {
      throw StructuralError("lattice " + lattice.id + ": transition " +
                            std::to_string(i) + " references a node outside [0, " +
                            std::to_string(lattice.num_nodes) + ")");
    }
  }
}

}  // namespace

NodeId Lattice::start() const {
  std::vector<bool> has_in(num_nodes, false);
  for (const auto& t : transitions) {
    if (t.next < num_nodes) has_in[t.next] = true;
  }
  std::vector<NodeId> found;
  for (NodeId n = 0; n < num_nodes; ++n) {
    if (!has_in[n]) found.push_back(n);
  }
  if (found.size() != 1) {
    throw StructuralError("lattice " + id + ": expected exactly one start node, found " +
                          std::to_string(found.size()));
  }
  return found.front();
}

NodeId Lattice::end() const {
  std::vector<bool> has_out(num_nodes, false);
  for (const auto& t : transitions) {
    if (t.prev < num_nodes) has_out[t.prev] = true;
  }
  std::vector<NodeId> found;
  for (NodeId n = 0; n < num_nodes; ++n) {
    if (!has_out[n]) found.push_back(n);
  }
  if (found.size() != 1) {
    throw StructuralError("lattice " + id + ": expected exactly one end node, found " +
                          std::to_string(found.size()));
  }
  return found.front();
}

AdjacencyIndex AdjacencyIndex::build(const Lattice& lattice) {
  require_in_range(lattice);
  AdjacencyIndex index;
  index.incoming.resize(lattice.num_nodes);
  index.outgoing.resize(lattice.num_nodes);
  const auto& ts = lattice.transitions;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    index.outgoing[ts[i].prev].push_back(i);
    index.incoming[ts[i].next].push_back(i);
  }
  for (auto& list : index.incoming) {
    std::sort(list.begin(), list.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(ts[a].prev, ts[a].word, ts[a].prob, a) <
             std::tie(ts[b].prev, ts[b].word, ts[b].prob, b);
    });
  }
  for (auto& list : index.outgoing) {
    std::sort(list.begin(), list.end(), [&](std::size_t a, std::size_t b) {
      return std::tie(ts[a].next, ts[a].word, ts[a].prob, a) <
             std::tie(ts[b].next, ts[b].word, ts[b].prob, b);
    });
  }
  return index;
}

bool ValidationReport::contains(ViolationKind kind) const {
  return std::any_of(violations.begin(), violations.end(),
                     [kind](const Violation& v) { return v.kind == kind; });
}

std::string ValidationReport::summary() const {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "; ";
    out += v.message;
  }
  return out;
}

ValidationReport validate(const Lattice& lattice) {
  ValidationReport report;
  auto add = [&](ViolationKind kind, std::string message) {
    report.violations.push_back({kind, std::move(message)});
  };

  if (lattice.num_nodes == 0 || lattice.transitions.empty()) {
    add(ViolationKind::kEmpty, "empty lattice");
    return report;
  }

  const std::size_t n = lattice.num_nodes;
  std::vector<std::vector<NodeId>> succ(n), pred(n);
  std::vector<std::size_t> in_degree(n, 0), out_degree(n, 0);
  for (std::size_t i = 0; i < lattice.transitions.size(); ++i) {
    const auto& t = lattice.transitions[i];
    if (!in_range(lattice, t)) {
      add(ViolationKind::kNodeOutOfRange,
          "transition " + std::to_string(i) + " references node outside range");
      continue;
    }
    if (!(t.prob >= 0.0 && t.prob <= 1.0)) {
      add(ViolationKind::kProbabilityOutOfRange,
          "probability out of range on transition " + std::to_string(i));
    }
    if (t.prev == t.next) {
      add(ViolationKind::kSelfLoop, "self-loop at node " + node_name(t.prev));
      continue;
    }
    succ[t.prev].push_back(t.next);
    pred[t.next].push_back(t.prev);
    ++out_degree[t.prev];
    ++in_degree[t.next];
  }

  // Kahn sweep for acyclicity.
  {
    std::vector<std::size_t> remaining = in_degree;
    std::vector<NodeId> stack;
    for (NodeId v = 0; v < n; ++v) {
      if (remaining[v] == 0) stack.push_back(v);
    }
    std::size_t seen = 0;
    while (!stack.empty()) {
      NodeId u = stack.back();
      stack.pop_back();
      ++seen;
      for (NodeId v : succ[u]) {
        if (--remaining[v] == 0) stack.push_back(v);
      }
    }
    if (seen != n) {
      for (NodeId v = 0; v < n; ++v) {
        if (remaining[v] > 0) {
          add(ViolationKind::kCycle, "cycle through node " + node_name(v));
          break;
        }
      }
    }
  }

  std::vector<NodeId> starts, ends;
  for (NodeId v = 0; v < n; ++v) {
    const bool isolated = in_degree[v] == 0 && out_degree[v] == 0;
    if (isolated) {
      add(ViolationKind::kUnreachableNode, "unreachable node " + node_name(v));
      continue;
    }
    if (in_degree[v] == 0) starts.push_back(v);
    if (out_degree[v] == 0) ends.push_back(v);
  }
  auto list_nodes = [](const std::vector<NodeId>& nodes) {
    std::string s;
    for (NodeId v : nodes) s += (s.empty() ? "" : ", ") + node_name(v);
    return s;
  };
  if (starts.empty()) add(ViolationKind::kNoStart, "no start node");
  if (starts.size() > 1) {
    add(ViolationKind::kMultipleStarts, "multiple start nodes: " + list_nodes(starts));
  }
  if (ends.empty()) add(ViolationKind::kNoEnd, "no end node");
  if (ends.size() > 1) {
    add(ViolationKind::kMultipleEnds, "multiple end nodes: " + list_nodes(ends));
  }

  if (starts.size() == 1 && ends.size() == 1) {
    auto sweep = [n](NodeId from, const std::vector<std::vector<NodeId>>& adj) {
      std::vector<bool> seen(n, false);
      std::vector<NodeId> stack{from};
      seen[from] = true;
      while (!stack.empty()) {
        NodeId u = stack.back();
        stack.pop_back();
        for (NodeId v : adj[u]) {
          if (!seen[v]) {
            seen[v] = true;
            stack.push_back(v);
          }
        }
      }
      return seen;
    };
    const auto from_start = sweep(starts.front(), succ);
    const auto to_end = sweep(ends.front(), pred);
    for (NodeId v = 0; v < n; ++v) {
      const bool isolated = in_degree[v] == 0 && out_degree[v] == 0;
      if (!isolated && !(from_start[v] && to_end[v])) {
        add(ViolationKind::kUnreachableNode, "unreachable node " + node_name(v));
      }
    }
  }
  return report;
}

void require_valid(const Lattice& lattice) {
  auto report = validate(lattice);
  if (!report.valid()) {
    throw StructuralError("invalid lattice " + lattice.id + ": " + report.summary());
  }
}

std::vector<NodeId> topological_order(const Lattice& lattice) {
  require_in_range(lattice);
  const std::size_t n = lattice.num_nodes;
  std::vector<std::size_t> in_degree(n, 0);
  std::vector<std::vector<NodeId>> succ(n);
  for (const auto& t : lattice.transitions) {
    succ[t.prev].push_back(t.next);
    ++in_degree[t.next];
  }
  std::priority_queue<NodeId, std::vector<NodeId>, std::greater<>> ready;
  for (NodeId v = 0; v < n; ++v) {
    if (in_degree[v] == 0) ready.push(v);
  }
  std::vector<NodeId> order;
  order.reserve(n);
  while (!ready.empty()) {
    NodeId u = ready.top();
    ready.pop();
    order.push_back(u);
    for (NodeId v : succ[u]) {
      if (--in_degree[v] == 0) ready.push(v);
    }
  }
  if (order.size() == n) return order;

  // Every leftover node still has a leftover predecessor; walking backwards
  // through them must revisit a node, and the edge taken there is on a cycle.
  NodeId cursor = 0;
  while (in_degree[cursor] == 0) ++cursor;
  std::vector<bool> visited(n, false);
  std::size_t edge = 0;
  while (!visited[cursor]) {
    visited[cursor] = true;
    for (std::size_t i = 0; i < lattice.transitions.size(); ++i) {
      const auto& t = lattice.transitions[i];
      if (t.next == cursor && in_degree[t.prev] > 0) {
        edge = i;
        cursor = t.prev;
        break;
      }
    }
  }
  const auto& t = lattice.transitions[edge];
  throw StructuralError("lattice " + lattice.id + ": cycle detected at transition " +
                        std::to_string(edge) + " (" + node_name(t.prev) + " -> " +
                        node_name(t.next) + ")");
}

std::vector<double> forward_mass(const Lattice& lattice) {
  const auto order = topological_order(lattice);
  const auto index = AdjacencyIndex::build(lattice);
  std::vector<double> alpha(lattice.num_nodes, 0.0);
  alpha[lattice.start()] = 1.0;
  for (NodeId u : order) {
    for (std::size_t e : index.outgoing[u]) {
      const auto& t = lattice.transitions[e];
      alpha[t.next] += alpha[u] * t.prob;
    }
  }
  return alpha;
}

Lattice reverse(const Lattice& lattice) {
  require_valid(lattice);
  const auto alpha = forward_mass(lattice);
  Lattice out{lattice.id, lattice.num_nodes, {}};
  out.transitions.reserve(lattice.transitions.size());
  for (const auto& t : lattice.transitions) {
    if (alpha[t.next] <= 0.0) {
      throw StructuralError("lattice " + lattice.id + ": zero incoming mass at node " +
                            node_name(t.next));
    }
    out.transitions.push_back({t.next, t.prev, t.word, alpha[t.prev] * t.prob / alpha[t.next]});
  }
  return out;
}

Lattice from_token_sequence(const std::vector<std::string>& tokens, std::string id) {
  if (tokens.empty()) throw StructuralError("cannot build a lattice from an empty token list");
  Lattice out{std::move(id), tokens.size() + 1, {}};
  out.transitions.reserve(tokens.size());
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    out.transitions.push_back(
        {static_cast<NodeId>(i), static_cast<NodeId>(i + 1), tokens[i], 1.0});
  }
  return out;
}

Lattice normalize_outgoing(const Lattice& lattice) {
  const auto index = AdjacencyIndex::build(lattice);
  Lattice out = lattice;
  for (NodeId u = 0; u < lattice.num_nodes; ++u) {
    const auto& edges = index.outgoing[u];
    if (edges.empty()) continue;
    double sum = 0.0;
    for (std::size_t e : edges) {
      const double p = lattice.transitions[e].prob;
      if (!(p >= 0.0) || !std::isfinite(p)) {
        throw StructuralError("lattice " + lattice.id + ": invalid probability at node " +
                              node_name(u));
      }
      sum += p;
    }
    if (!(sum > 0.0)) {
      throw StructuralError("lattice " + lattice.id + ": zero outgoing mass at node " +
                            node_name(u));
    }
    if (std::abs(sum - 1.0) <= 1e-12) continue;
    for (std::size_t e : edges) out.transitions[e].prob = lattice.transitions[e].prob / sum;
  }
  return out;
}

Lattice wrap_sentinels(const Lattice& lattice) {
  require_valid(lattice);
  const NodeId old_start = lattice.start();
  const NodeId old_end = lattice.end();
  Lattice out{lattice.id, lattice.num_nodes + 2, {}};
  out.transitions.reserve(lattice.transitions.size() + 2);
  out.transitions.push_back({0, old_start + 1, std::string(kBosWord), 1.0});
  for (const auto& t : lattice.transitions) {
    out.transitions.push_back({t.prev + 1, t.next + 1, t.word, t.prob});
  }
  out.transitions.push_back(
      {old_end + 1, static_cast<NodeId>(lattice.num_nodes + 1), std::string(kEosWord), 1.0});
  return out;
}

PathSet enumerate_paths(const Lattice& lattice, std::size_t max_paths) {
  require_valid(lattice);
  const auto index = AdjacencyIndex::build(lattice);
  const NodeId end = lattice.end();
  PathSet paths;
  std::vector<std::string> words;

  std::function<void(NodeId, double)> walk = [&](NodeId u, double prob) {
    if (u == end) {
      if (prob > 0.0) {
        if (paths.size() == max_paths) {
          throw StructuralError("lattice " + lattice.id + ": more than " +
                                std::to_string(max_paths) + " paths");
        }
        paths.push_back({words, prob});
      }
      return;
    }
    for (std::size_t e : index.outgoing[u]) {
      const auto& t = lattice.transitions[e];
      words.push_back(t.word);
      walk(t.next, prob * t.prob);
      words.pop_back();
    }
  };
  walk(lattice.start(), 1.0);

  std::sort(paths.begin(), paths.end(), [](const Path& a, const Path& b) {
    if (a.prob != b.prob) return a.prob > b.prob;
    return a.words < b.words;
  });
  return paths;
}

std::size_t count_paths(const Lattice& lattice) {
  const auto order = topological_order(lattice);
  constexpr std::size_t kMax = std::numeric_limits<std::size_t>::max();
  std::vector<std::size_t> count(lattice.num_nodes, 0);
  count[lattice.start()] = 1;
  const auto index = AdjacencyIndex::build(lattice);
  for (NodeId u : order) {
    for (std::size_t e : index.outgoing[u]) {
      const NodeId v = lattice.transitions[e].next;
      count[v] = (count[v] > kMax - count[u]) ? kMax : count[v] + count[u];
    }
  }
  return count[lattice.end()];
}

std::vector<std::string> one_best_path(const Lattice& lattice) {
  require_valid(lattice);
  const auto order = topological_order(lattice);
  const auto index = AdjacencyIndex::build(lattice);
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();

  struct Best {
    double score = kNegInf;
    std::vector<std::string> suffix;
    bool reached = false;
  };
  std::vector<Best> best(lattice.num_nodes);
  best[lattice.end()] = {0.0, {}, true};

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const NodeId u = *it;
    for (std::size_t e : index.outgoing[u]) {
      const auto& t = lattice.transitions[e];
      const Best& next = best[t.next];
      if (!next.reached) continue;
      const double score = std::log(t.prob) + next.score;
      Best& cur = best[u];
      bool take = !cur.reached || score > cur.score;
      if (!take && score == cur.score) {
        // Lexicographic compare of (t.word + next.suffix) against cur.suffix.
        std::vector<std::string> candidate;
        candidate.reserve(next.suffix.size() + 1);
        candidate.push_back(t.word);
        candidate.insert(candidate.end(), next.suffix.begin(), next.suffix.end());
        if (candidate < cur.suffix) {
          cur.suffix = std::move(candidate);
          continue;
        }
      }
      if (take) {
        cur.reached = true;
        cur.score = score;
        cur.suffix.clear();
        cur.suffix.push_back(t.word);
        cur.suffix.insert(cur.suffix.end(), next.suffix.begin(), next.suffix.end());
      }
    }
  }
  return best[lattice.start()].suffix;
}

std::size_t oracle_edit_distance(const Lattice& lattice,
                                 const std::vector<std::string>& reference) {
  require_valid(lattice);
  const auto order = topological_order(lattice);
  const auto index = AdjacencyIndex::build(lattice);
  const std::size_t m = reference.size();
  constexpr std::size_t kInf = std::numeric_limits<std::size_t>::max() / 2;
  std::vector<std::vector<std::size_t>> cost(lattice.num_nodes,
                                             std::vector<std::size_t>(m + 1, kInf));
  const NodeId start = lattice.start();
  for (std::size_t j = 0; j <= m; ++j) cost[start][j] = j;

  for (NodeId v : order) {
    auto& row = cost[v];
    for (std::size_t e : index.incoming[v]) {
      const auto& t = lattice.transitions[e];
      const auto& from = cost[t.prev];
      for (std::size_t j = 0; j <= m; ++j) {
        row[j] = std::min(row[j], from[j] + 1);
        if (j > 0) {
          row[j] = std::min(row[j], from[j - 1] + (t.word == reference[j - 1] ? 0 : 1));
        }
      }
    }
    for (std::size_t j = 1; j <= m; ++j) row[j] = std::min(row[j], row[j - 1] + 1);
  }
  return cost[lattice.end()][m];
}

}  // namespace latlm::lattice
