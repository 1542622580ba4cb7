#include "latlm/model/lattice_lstm.hpp"

#include "latlm/errors.hpp"

namespace latlm::model {

DirectionStates run_lattice_direction(num::Tape& tape, const lattice::Lattice& lattice,
                                      std::span<const num::Var> transition_inputs,
                                      std::span<const CellVars> layers) {
  const auto& ts = lattice.transitions;
  if (transition_inputs.size() != ts.size()) {
    throw ShapeError("lattice " + lattice.id + ": " + std::to_string(transition_inputs.size()) +
                     " inputs for " + std::to_string(ts.size()) + " transitions");
  }
  const auto order = lattice::topological_order(lattice);
  const auto index = lattice::AdjacencyIndex::build(lattice);
  const lattice::NodeId start = lattice.start();

  DirectionStates out;
  out.edges.resize(layers.size());
  out.nodes.resize(layers.size());
  std::vector<num::Var> inputs(transition_inputs.begin(), transition_inputs.end());
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const CellVars& cell = layers[k];
    auto& edges = out.edges[k];
    auto& nodes = out.nodes[k];
    edges.resize(ts.size());
    nodes.resize(lattice.num_nodes);
    std::vector<CellState> pooled_in;
    std::vector<double> probs;
    for (lattice::NodeId n : order) {
      if (n == start) {
        nodes[n] = zero_state(tape, cell.hidden_size);
      } else {
        pooled_in.clear();
        probs.clear();
        for (std::size_t e : index.incoming[n]) {
          pooled_in.push_back(edges[e]);
          probs.push_back(ts[e].prob);
        }
        nodes[n] = weighted_pool(pooled_in, probs);
      }
      for (std::size_t e : index.outgoing[n]) {
        edges[e] = lstm_cell_step(inputs[e], nodes[n], cell);
      }
    }
    for (std::size_t e = 0; e < ts.size(); ++e) inputs[e] = edges[e].h;
  }
  return out;
}

LatticeStates lattice_lstm_forward(num::Tape& tape, const lattice::Lattice& lattice,
                                   const lattice::Lattice& reversed,
                                   std::span<const num::Var> transition_inputs,
                                   std::span<const CellVars> forward_layers,
                                   std::span<const CellVars> backward_layers) {
  if (reversed.transitions.size() != lattice.transitions.size() ||
      reversed.num_nodes != lattice.num_nodes) {
    throw ShapeError("reversed lattice does not match lattice " + lattice.id);
  }
  LatticeStates states;
  states.forward = run_lattice_direction(tape, lattice, transition_inputs, forward_layers);
  states.backward = run_lattice_direction(tape, reversed, transition_inputs, backward_layers);
  return states;
}

LatticeStates lattice_lstm_forward(num::Tape& tape, const lattice::Lattice& lattice,
                                   std::span<const num::Var> transition_inputs,
                                   std::span<const CellVars> forward_layers,
                                   std::span<const CellVars> backward_layers) {
  return lattice_lstm_forward(tape, lattice, lattice::reverse(lattice), transition_inputs,
                              forward_layers, backward_layers);
}

}  // namespace latlm::model
