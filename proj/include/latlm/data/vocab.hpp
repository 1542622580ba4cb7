#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include "latlm/lattice/lattice.hpp"

namespace latlm::data {

using Sentence = std::vector<std::string>;

// Token <-> id bijection with three reserved ids (unk, bos, eos). Regular
// tokens are numbered from 3 by descending count, ties lexicographic.
class Vocabulary {
 public:
  static constexpr std::size_t kUnk = 0;
  static constexpr std::size_t kBos = 1;
  static constexpr std::size_t kEos = 2;
  static constexpr std::string_view kUnkToken = "<unk>";

  Vocabulary();

  // Counts corpus tokens and lattice transition words. Tokens below
  // `min_count` are left out (they map to kUnk). Throws DataError when both
  // inputs are empty.
  static Vocabulary build(std::span<const Sentence> corpus,
                          std::span<const lattice::Lattice> lattices, std::size_t min_count);

  // Rebuilds from (token, count) in id order; the first three entries must be
  // the reserved tokens.
  static Vocabulary from_entries(const std::vector<std::pair<std::string, std::uint64_t>>& entries);

  std::size_t size() const { return tokens_.size(); }
  std::size_t id(std::string_view token) const;
  bool contains(std::string_view token) const;
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  std::uint64_t count(std::size_t id) const { return counts_.at(id); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  std::vector<std::size_t> encode(const Sentence& sentence) const;

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) {
    return a.tokens_ == b.tokens_ && a.counts_ == b.counts_;
  }

 private:
  void push(std::string token, std::uint64_t count);

  std::vector<std::string> tokens_;
  std::vector<std::uint64_t> counts_;
  std::unordered_map<std::string, std::size_t> index_;
};

bool is_reserved_token(std::string_view token);

}  // namespace latlm::data
