#include "latlm/pipeline/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <map>
#include <sstream>

#include "latlm/data/text_io.hpp"
#include "latlm/errors.hpp"

namespace latlm::pipeline {

static_assert(std::endian::native == std::endian::little,
              "checkpoint encoding assumes a little-endian host");

namespace {

std::string join(const std::vector<std::string>& items, char sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
  std::vector<std::string> out;
  if (s.empty()) return out;
  std::size_t pos = 0;
  while (true) {
    const auto next = s.find(sep, pos);
    out.emplace_back(s.substr(pos, next - pos));
    if (next == std::string_view::npos) break;
    pos = next + 1;
  }
  return out;
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::size_t offset() const { return pos_; }
  bool at_end() const { return pos_ == bytes_.size(); }

  std::string_view line() {
    const auto nl = bytes_.find('\n', pos_);
    if (nl == std::string_view::npos) {
      throw ParseError(pos_, "checkpoint truncated at byte " + std::to_string(pos_) +
                                 ": expected a newline-terminated line");
    }
    auto out = bytes_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
    return out;
  }

  std::string_view take(std::size_t n) {
    if (bytes_.size() - pos_ < n) {
      throw ParseError(pos_, "checkpoint truncated at byte " + std::to_string(pos_) + ": need " +
                                 std::to_string(n) + " bytes, " +
                                 std::to_string(bytes_.size() - pos_) + " remain");
    }
    auto out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }

 private:
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

template <typename T>
T parse_number(std::string_view text, std::size_t offset, std::string_view what) {
  T value{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size()) {
    throw ParseError(offset, "byte " + std::to_string(offset) + ": invalid " + std::string(what) +
                                 " '" + std::string(text) + "'");
  }
  return value;
}

}  // namespace

std::string_view stage_name(Stage stage) {
  switch (stage) {
    case Stage::kSeqLm: return "seq-lm";
    case Stage::kLatticeLm: return "lattice-lm";
    case Stage::kClassifier: return "classifier";
  }
  return "?";
}

Stage parse_stage(std::string_view name) {
  for (Stage s : {Stage::kSeqLm, Stage::kLatticeLm, Stage::kClassifier}) {
    if (stage_name(s) == name) return s;
  }
  throw DataError("unknown checkpoint stage '" + std::string(name) + "'");
}

model::ClassifierConfig Checkpoint::classifier_config() const {
  model::ClassifierConfig c;
  c.input_dim = 2 * lm.hidden_dim;
  c.lm_layers = lm.layers;
  c.hidden_dim = clf_hidden;
  c.layers = clf_layers;
  c.num_labels = labels.size();
  return c;
}

std::string serialize_checkpoint(const Checkpoint& ck) {
  std::string out(kCheckpointMagic);
  data::KeyValues header{
      {"format_version", std::to_string(kCheckpointFormatVersion)},
      {"stage", std::string(stage_name(ck.stage))},
      {"vocab_size", std::to_string(ck.vocab.size())},
      {"num_tensors", std::to_string(ck.params.size())},
  };
  std::map<std::string, std::string> rest{
      {"seed", std::to_string(ck.seed)},
      {"embed_dim", std::to_string(ck.lm.embed_dim)},
      {"hidden_dim", std::to_string(ck.lm.hidden_dim)},
      {"layers", std::to_string(ck.lm.layers)},
      {"decoder_bias", ck.lm.decoder_bias ? "1" : "0"},
  };
  if (ck.stage == Stage::kClassifier) {
    rest["clf_hidden"] = std::to_string(ck.clf_hidden);
    rest["clf_layers"] = std::to_string(ck.clf_layers);
    rest["num_labels"] = std::to_string(ck.labels.size());
    rest["labels"] = join(ck.labels, ',');
  }
  for (auto& kv : rest) header.emplace_back(kv.first, kv.second);
  for (const auto& [k, v] : header) out += k + "=" + v + "\n";
  out += "\n";
  for (std::size_t i = 0; i < ck.vocab.size(); ++i) {
    out += std::to_string(ck.vocab.count(i)) + " " + ck.vocab.token(i) + "\n";
  }
  out += "\n";
  for (const auto& [name, p] : ck.params) {
    const auto& shape = p.value.shape();
    out += "T " + name + " " + std::to_string(shape.size());
    for (std::size_t d : shape) out += " " + std::to_string(d);
    out += "\n";
    const auto values = p.value.values();
    out.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(double));
  }
  return out;
}

Checkpoint parse_checkpoint(std::string_view bytes) {
  Reader r(bytes);
  if (bytes.substr(0, kCheckpointMagic.size()) != kCheckpointMagic) {
    throw ParseError(0, "byte 0: not a checkpoint (bad magic)");
  }
  r.take(kCheckpointMagic.size());

  std::map<std::string, std::pair<std::string, std::size_t>> header;
  while (true) {
    const std::size_t at = r.offset();
    const auto line = r.line();
    if (line.empty()) break;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos || eq == 0) {
      throw ParseError(at, "byte " + std::to_string(at) + ": malformed header line '" +
                               std::string(line) + "'");
    }
    header[std::string(line.substr(0, eq))] = {std::string(line.substr(eq + 1)), at};
  }
  auto field = [&](const std::string& key) -> const std::pair<std::string, std::size_t>& {
    const auto it = header.find(key);
    if (it == header.end()) throw ParseError(r.offset(), "checkpoint header lacks " + key);
    return it->second;
  };
  auto number = [&](const std::string& key) {
    const auto& [v, at] = field(key);
    return parse_number<std::size_t>(v, at, key);
  };

  if (number("format_version") != static_cast<std::size_t>(kCheckpointFormatVersion)) {
    throw ParseError(field("format_version").second,
                     "unsupported checkpoint format_version " + field("format_version").first);
  }
  Checkpoint ck;
  ck.stage = parse_stage(field("stage").first);
  const auto& [seed_text, seed_at] = field("seed");
  ck.seed = parse_number<std::uint64_t>(seed_text, seed_at, "seed");
  ck.lm.embed_dim = number("embed_dim");
  ck.lm.hidden_dim = number("hidden_dim");
  ck.lm.layers = number("layers");
  ck.lm.decoder_bias = number("decoder_bias") != 0;
  ck.lm.vocab_size = number("vocab_size");
  if (ck.stage == Stage::kClassifier) {
    ck.clf_hidden = number("clf_hidden");
    ck.clf_layers = number("clf_layers");
    ck.labels = split(field("labels").first, ',');
    if (ck.labels.size() != number("num_labels")) {
      throw ParseError(field("labels").second, "label list does not match num_labels");
    }
  }
  const std::size_t num_tensors = number("num_tensors");

  std::vector<std::pair<std::string, std::uint64_t>> entries;
  while (true) {
    const std::size_t at = r.offset();
    const auto line = r.line();
    if (line.empty()) break;
    const auto sp = line.find(' ');
    if (sp == std::string_view::npos || sp + 1 == line.size()) {
      throw ParseError(at, "byte " + std::to_string(at) + ": malformed vocabulary entry");
    }
    entries.emplace_back(std::string(line.substr(sp + 1)),
                         parse_number<std::uint64_t>(line.substr(0, sp), at, "token count"));
  }
  if (entries.size() != ck.lm.vocab_size) {
    throw ParseError(r.offset(), "vocabulary has " + std::to_string(entries.size()) +
                                     " entries, header says " + std::to_string(ck.lm.vocab_size));
  }
  try {
    ck.vocab = data::Vocabulary::from_entries(entries);
  } catch (const DataError& e) {
    throw ParseError(r.offset(), e.what());
  }

  for (std::size_t i = 0; i < num_tensors; ++i) {
    const std::size_t at = r.offset();
    const auto parts = data::tokenize(r.line());
    if (parts.size() < 3 || parts[0] != "T") {
      throw ParseError(at, "byte " + std::to_string(at) + ": expected tensor record");
    }
    const std::size_t rank = parse_number<std::size_t>(parts[2], at, "rank");
    if (parts.size() != 3 + rank) {
      throw ParseError(at, "byte " + std::to_string(at) + ": tensor " + parts[1] +
                               " declares rank " + std::to_string(rank) + " but lists " +
                               std::to_string(parts.size() - 3) + " dims");
    }
    num::Shape shape;
    for (std::size_t k = 0; k < rank; ++k) {
      shape.push_back(parse_number<std::size_t>(parts[3 + k], at, "dimension"));
    }
    const std::size_t n = num::shape_size(shape);
    const std::size_t data_at = r.offset();
    const auto raw = r.take(n * sizeof(double));
    std::vector<double> values(n);
    if (n) std::memcpy(values.data(), raw.data(), raw.size());
    for (std::size_t k = 0; k < n; ++k) {
      if (!std::isfinite(values[k])) {
        const std::size_t bad = data_at + k * sizeof(double);
        throw ParseError(bad, "byte " + std::to_string(bad) + ": non-finite value in tensor " +
                                  parts[1]);
      }
    }
    if (ck.params.contains(parts[1])) {
      throw ParseError(at, "byte " + std::to_string(at) + ": duplicate tensor " + parts[1]);
    }
    ck.params.add(parts[1], num::Tensor(std::move(shape), std::move(values)));
  }
  if (!r.at_end()) {
    throw ParseError(r.offset(), "byte " + std::to_string(r.offset()) +
                                     ": unexpected trailing data after the last tensor");
  }
  check_stage_params(ck);
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  data::write_text_file(path, serialize_checkpoint(checkpoint));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  return parse_checkpoint(data::read_text_file(path));
}

void check_stage_params(const Checkpoint& ck) {
  if (ck.stage != Stage::kClassifier) {
    try {
      model::check_lm_params(ck.params, ck.lm);
    } catch (const ShapeError& e) {
      throw StageError(std::string(stage_name(ck.stage)) + " checkpoint: " + e.what());
    }
    return;
  }
  const auto lm_names = model::lm_param_names(ck.lm);
  const auto clf_names = model::classifier_param_names(ck.classifier_config());
  num::ParamSet lm, clf;
  for (const auto& [name, p] : ck.params) {
    if (std::binary_search(lm_names.begin(), lm_names.end(), name)) {
      lm.add(name, p.value);
    } else if (std::binary_search(clf_names.begin(), clf_names.end(), name)) {
      clf.add(name, p.value);
    } else {
      throw StageError("classifier checkpoint: unexpected tensor " + name);
    }
  }
  try {
    model::check_lm_params(lm, ck.lm);
  } catch (const ShapeError& e) {
    throw StageError(std::string("classifier checkpoint: ") + e.what());
  }
  for (const auto& name : clf_names) {
    if (!clf.contains(name)) throw StageError("classifier checkpoint: missing tensor " + name);
  }
  if (ck.labels.size() < 2) throw StageError("classifier checkpoint needs at least two labels");
}

void require_stage(const Checkpoint& checkpoint, std::initializer_list<Stage> allowed) {
  if (std::find(allowed.begin(), allowed.end(), checkpoint.stage) != allowed.end()) return;
  std::string want;
  for (Stage s : allowed) {
    if (!want.empty()) want += " or ";
    want += stage_name(s);
  }
  throw StageError("stage mismatch: checkpoint is " + std::string(stage_name(checkpoint.stage)) +
                   ", expected " + want);
}

num::ParamSet lm_params_of(const Checkpoint& checkpoint) {
  num::ParamSet out;
  for (const auto& name : model::lm_param_names(checkpoint.lm)) {
    out.add(name, checkpoint.params.at(name).value);
  }
  return out;
}

}  // namespace latlm::pipeline
