#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "latlm/data/vocab.hpp"

namespace latlm::data {

// Ordered key=value records (manifests, config files, checkpoint headers).
using KeyValues = std::vector<std::pair<std::string, std::string>>;

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view content);

std::vector<std::string> tokenize(std::string_view line);

// One whitespace-tokenized sentence per line; blank lines are skipped.
std::vector<Sentence> parse_corpus(std::string_view text);
std::vector<Sentence> read_corpus(const std::filesystem::path& path);
std::string format_corpus(std::span<const Sentence> sentences);

struct LabelRecord {
  std::string lattice_id;
  std::string label;
};

// `<lattice_id>\t<label>` per line.
std::vector<LabelRecord> parse_labels(std::string_view text);
std::vector<LabelRecord> read_labels(const std::filesystem::path& path);
std::string format_labels(std::span<const LabelRecord> records);

// Blank lines and lines starting with '#' are ignored.
KeyValues parse_key_values(std::string_view text);
std::string format_key_values(const KeyValues& kv);
const std::string* find_value(const KeyValues& kv, std::string_view key);

}  // namespace latlm::data
