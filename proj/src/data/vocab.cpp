#include "latlm/data/vocab.hpp"

#include <algorithm>
#include <map>

#include "latlm/errors.hpp"

namespace latlm::data {

bool is_reserved_token(std::string_view token) {
  return token == Vocabulary::kUnkToken || token == lattice::kBosWord ||
         token == lattice::kEosWord;
}

Vocabulary::Vocabulary() {
  push(std::string(kUnkToken), 0);
  push(std::string(lattice::kBosWord), 0);
  push(std::string(lattice::kEosWord), 0);
}

void Vocabulary::push(std::string token, std::uint64_t count) {
  index_.emplace(token, tokens_.size());
  tokens_.push_back(std::move(token));
  counts_.push_back(count);
}

Vocabulary Vocabulary::build(std::span<const Sentence> corpus,
                             std::span<const lattice::Lattice> lattices, std::size_t min_count) {
  std::map<std::string, std::uint64_t> counts;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) {
      if (!is_reserved_token(tok)) ++counts[tok];
    }
  }
  for (const auto& lat : lattices) {
    for (const auto& t : lat.transitions) {
      if (!is_reserved_token(t.word)) ++counts[t.word];
    }
  }
  if (counts.empty()) throw DataError("cannot build a vocabulary from an empty corpus");

  std::vector<std::pair<std::string, std::uint64_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  Vocabulary vocab;
  for (auto& [tok, count] : ranked) {
    if (count >= min_count) vocab.push(tok, count);
  }
  return vocab;
}

Vocabulary Vocabulary::from_entries(
    const std::vector<std::pair<std::string, std::uint64_t>>& entries) {
  if (entries.size() < 3 || entries[0].first != kUnkToken || entries[1].first != lattice::kBosWord ||
      entries[2].first != lattice::kEosWord) {
    throw DataError("vocabulary must start with the reserved tokens <unk> <bos> <eos>");
  }
  Vocabulary vocab;
  for (std::size_t i = 0; i < 3; ++i) vocab.counts_[i] = entries[i].second;
  for (std::size_t i = 3; i < entries.size(); ++i) {
    const auto& [tok, count] = entries[i];
    if (is_reserved_token(tok) || vocab.index_.count(tok)) {
      throw DataError("duplicate or reserved vocabulary token: " + tok);
    }
    vocab.push(tok, count);
  }
  return vocab;
}

std::size_t Vocabulary::id(std::string_view token) const {
  auto it = index_.find(std::string(token));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocabulary::contains(std::string_view token) const {
  return index_.count(std::string(token)) != 0;
}

std::vector<std::size_t> Vocabulary::encode(const Sentence& sentence) const {
  std::vector<std::size_t> ids;
  ids.reserve(sentence.size());
  for (const auto& tok : sentence) ids.push_back(id(tok));
  return ids;
}

}  // namespace latlm::data
