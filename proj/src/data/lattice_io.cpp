#include "latlm/data/lattice_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <tuple>

#include "latlm/data/text_io.hpp"
#include "latlm/errors.hpp"

namespace latlm::data {

namespace {

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < line.size() && line[j] != ' ' && line[j] != '\t') ++j;
    if (j > i) fields.push_back(line.substr(i, j - i));
    i = j;
  }
  return fields;
}

template <typename T>
T parse_number(std::string_view field, std::size_t line, const char* what) {
  T value{};
  const auto* first = field.data();
  const auto* last = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ParseError(line, "line " + std::to_string(line) + ": non-numeric " + what + " '" +
                               std::string(field) + "'");
  }
  return value;
}

}  // namespace

std::string format_prob(double prob) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, prob, std::chars_format::general, 17);
  return std::string(buf, ptr);
}

std::string serialize_lattices(std::span<const lattice::Lattice> lattices) {
  std::string out;
  for (std::size_t k = 0; k < lattices.size(); ++k) {
    const auto& lat = lattices[k];
    if (k) out += '\n';
    out += "LATTICE " + lat.id + " " + std::to_string(lat.num_nodes) + " " +
           std::to_string(lat.transitions.size()) + "\n";
    std::vector<const lattice::Transition*> edges;
    edges.reserve(lat.transitions.size());
    for (const auto& t : lat.transitions) edges.push_back(&t);
    std::stable_sort(edges.begin(), edges.end(), [](const auto* a, const auto* b) {
      return std::tie(a->prev, a->next, a->word, a->prob) <
             std::tie(b->prev, b->next, b->word, b->prob);
    });
    for (const auto* t : edges) {
      out += "E " + std::to_string(t->prev) + " " + std::to_string(t->next) + " " + t->word +
             " " + format_prob(t->prob) + "\n";
    }
  }
  return out;
}

std::vector<lattice::Lattice> parse_lattices(std::string_view text) {
  std::vector<std::string_view> lines;
  {
    std::size_t begin = 0;
    while (begin < text.size()) {
      std::size_t end = text.find('\n', begin);
      if (end == std::string_view::npos) end = text.size();
      std::string_view line = text.substr(begin, end - begin);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.push_back(line);
      begin = end + 1;
    }
  }
  // Trailing blank lines at end of file are tolerated.
  while (!lines.empty() && split_fields(lines.back()).empty()) lines.pop_back();

  std::vector<lattice::Lattice> out;
  std::size_t i = 0;
  while (i < lines.size()) {
    const std::size_t header_line = i + 1;
    const auto header = split_fields(lines[i]);
    if (header.empty()) {
      throw ParseError(header_line, "line " + std::to_string(header_line) +
                                        ": unexpected blank line (lattices are separated by "
                                        "exactly one blank line)");
    }
    if (header.size() != 4 || header[0] != "LATTICE") {
      throw ParseError(header_line, "line " + std::to_string(header_line) +
                                        ": expected 'LATTICE <id> <num_nodes> <num_edges>'");
    }
    lattice::Lattice lat;
    lat.id = std::string(header[1]);
    lat.num_nodes = parse_number<std::size_t>(header[2], header_line, "node count");
    const auto num_edges = parse_number<std::size_t>(header[3], header_line, "edge count");
    ++i;

    lat.transitions.reserve(num_edges);
    for (std::size_t k = 0; k < num_edges; ++k, ++i) {
      const std::size_t line_no = i + 1;
      if (i >= lines.size() || split_fields(lines[i]).empty()) {
        throw ParseError(line_no, "line " + std::to_string(line_no) + ": lattice " + lat.id +
                                      " declares " + std::to_string(num_edges) +
                                      " edges but has " + std::to_string(k));
      }
      const auto f = split_fields(lines[i]);
      if (f.size() != 5 || f[0] != "E") {
        throw ParseError(line_no, "line " + std::to_string(line_no) +
                                      ": expected 'E <prev> <next> <word> <prob>'");
      }
      lattice::Transition t;
      const auto prev = parse_number<std::size_t>(f[1], line_no, "node id");
      const auto next = parse_number<std::size_t>(f[2], line_no, "node id");
      if (prev >= lat.num_nodes || next >= lat.num_nodes) {
        throw ParseError(line_no, "line " + std::to_string(line_no) + ": node id exceeds " +
                                      "declared node count " + std::to_string(lat.num_nodes));
      }
      t.prev = static_cast<lattice::NodeId>(prev);
      t.next = static_cast<lattice::NodeId>(next);
      t.word = std::string(f[3]);
      t.prob = parse_number<double>(f[4], line_no, "probability");
      if (!(t.prob >= 0.0 && t.prob <= 1.0)) {
        throw ParseError(line_no, "line " + std::to_string(line_no) + ": probability " +
                                      std::string(f[4]) + " outside [0, 1]");
      }
      lat.transitions.push_back(std::move(t));
    }
    out.push_back(std::move(lat));

    if (i < lines.size()) {
      const std::size_t line_no = i + 1;
      if (!split_fields(lines[i]).empty()) {
        throw ParseError(line_no, "line " + std::to_string(line_no) + ": lattice " +
                                      out.back().id + " has more edges than its declared " +
                                      std::to_string(num_edges));
      }
      ++i;
    }
  }
  return out;
}

std::vector<lattice::Lattice> read_lattice_file(const std::filesystem::path& path) {
  return parse_lattices(read_text_file(path));
}

void write_lattice_file(const std::filesystem::path& path,
                        std::span<const lattice::Lattice> lattices) {
  write_text_file(path, serialize_lattices(lattices));
}

}  // namespace latlm::data
