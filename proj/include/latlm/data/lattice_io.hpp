#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "latlm/lattice/lattice.hpp"

namespace latlm::data {

// Text lattice format:
//
//   LATTICE <id> <num_nodes> <num_edges>
//   E <prev> <next> <word> <prob>        (num_edges times)
//
// with lattices separated by one blank line. Probabilities are written with
// 17 significant digits so they parse back to the same double.

std::string format_prob(double prob);

// Canonical form: edges ordered by (prev, next, word, prob).
std::string serialize_lattices(std::span<const lattice::Lattice> lattices);

// Throws ParseError carrying the 1-based line number of the first problem.
std::vector<lattice::Lattice> parse_lattices(std::string_view text);

std::vector<lattice::Lattice> read_lattice_file(const std::filesystem::path& path);
void write_lattice_file(const std::filesystem::path& path,
                        std::span<const lattice::Lattice> lattices);

}  // namespace latlm::data
