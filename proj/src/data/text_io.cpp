#include "latlm/data/text_io.hpp"

#include <cctype>
#include <fstream>
#include <sstream>

#include "latlm/errors.hpp"

namespace latlm::data {

namespace {

std::vector<std::string_view> split_lines(std::string_view text) {
  std::vector<std::string_view> lines;
  std::size_t begin = 0;
  while (begin < text.size()) {
    std::size_t end = text.find('\n', begin);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(begin, end - begin);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back(line);
    begin = end + 1;
  }
  return lines;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  return s;
}

}  // namespace

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(path.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::string> tokenize(std::string_view line) {
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && std::isspace(static_cast<unsigned char>(line[i]))) ++i;
    std::size_t j = i;
    while (j < line.size() && !std::isspace(static_cast<unsigned char>(line[j]))) ++j;
    if (j > i) tokens.emplace_back(line.substr(i, j - i));
    i = j;
  }
  return tokens;
}

std::vector<Sentence> parse_corpus(std::string_view text) {
  std::vector<Sentence> out;
  for (auto line : split_lines(text)) {
    auto toks = tokenize(line);
    if (!toks.empty()) out.push_back(std::move(toks));
  }
  return out;
}

std::vector<Sentence> read_corpus(const std::filesystem::path& path) {
  return parse_corpus(read_text_file(path));
}

std::string format_corpus(std::span<const Sentence> sentences) {
  std::string out;
  for (const auto& s : sentences) {
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (i) out += ' ';
      out += s[i];
    }
    out += '\n';
  }
  return out;
}

std::vector<LabelRecord> parse_labels(std::string_view text) {
  std::vector<LabelRecord> out;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (trim(lines[i]).empty()) continue;
    const auto tab = lines[i].find('\t');
    if (tab == std::string_view::npos || tab == 0 || tab + 1 >= lines[i].size()) {
      throw ParseError(i + 1, "line " + std::to_string(i + 1) +
                                  ": expected '<lattice_id>\\t<label>'");
    }
    out.push_back({std::string(trim(lines[i].substr(0, tab))),
                   std::string(trim(lines[i].substr(tab + 1)))});
  }
  return out;
}

std::vector<LabelRecord> read_labels(const std::filesystem::path& path) {
  return parse_labels(read_text_file(path));
}

std::string format_labels(std::span<const LabelRecord> records) {
  std::string out;
  for (const auto& r : records) out += r.lattice_id + "\t" + r.label + "\n";
  return out;
}

KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    const auto line = trim(lines[i]);
    if (line.empty() || line.front() == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw ParseError(i + 1, "line " + std::to_string(i + 1) + ": expected key=value");
    }
    kv.emplace_back(std::string(trim(line.substr(0, eq))), std::string(trim(line.substr(eq + 1))));
  }
  return kv;
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

const std::string* find_value(const KeyValues& kv, std::string_view key) {
  for (const auto& [k, v] : kv) {
    if (k == key) return &v;
  }
  return nullptr;
}

}  // namespace latlm::data
