#pragma once

#include <span>
#include <vector>

#include "latlm/lattice/lattice.hpp"
#include "latlm/model/lstm.hpp"

namespace latlm::model {

struct DirectionStates {
  std::vector<std::vector<CellState>> edges;  // [layer][transition]
  std::vector<std::vector<CellState>> nodes;  // [layer][node]
};

struct LatticeStates {
  DirectionStates forward;
  DirectionStates backward;
};

// One direction of a stacked LatticeLSTM. Nodes are visited in topological
// order; each node's state is the weighted pool of its incoming transition
// states (the start node gets the zero state) and each outgoing transition
// runs the cell on its input with that node state as the previous state.
// Layer k>0 takes layer k-1's transition outputs as inputs.
DirectionStates run_lattice_direction(num::Tape& tape, const lattice::Lattice& lattice,
                                      std::span<const num::Var> transition_inputs,
                                      std::span<const CellVars> layers);

// Forward direction on `lattice`, backward direction on `reversed`
// (lattice::reverse of it; transition indices line up). Node ids are shared,
// so backward.nodes[k][n] is the backward state of original node n.
LatticeStates lattice_lstm_forward(num::Tape& tape, const lattice::Lattice& lattice,
                                   const lattice::Lattice& reversed,
                                   std::span<const num::Var> transition_inputs,
                                   std::span<const CellVars> forward_layers,
                                   std::span<const CellVars> backward_layers);

LatticeStates lattice_lstm_forward(num::Tape& tape, const lattice::Lattice& lattice,
                                   std::span<const num::Var> transition_inputs,
                                   std::span<const CellVars> forward_layers,
                                   std::span<const CellVars> backward_layers);

}  // namespace latlm::model
