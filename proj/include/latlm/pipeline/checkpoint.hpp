#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "latlm/data/vocab.hpp"
#include "latlm/model/classifier.hpp"
#include "latlm/model/language_model.hpp"
#include "latlm/numerics/params.hpp"

namespace latlm::pipeline {

enum class Stage { kSeqLm, kLatticeLm, kClassifier };

std::string_view stage_name(Stage stage);
// Throws DataError on an unknown tag.
Stage parse_stage(std::string_view name);

inline constexpr std::string_view kCheckpointMagic = "LATLM01\n";
inline constexpr int kCheckpointFormatVersion = 1;

struct Checkpoint {
  Stage stage = Stage::kSeqLm;
  std::uint64_t seed = 0;
  model::LmConfig lm;
  // Classifier stage only.
  std::size_t clf_hidden = 0;
  std::size_t clf_layers = 0;
  std::vector<std::string> labels;
  data::Vocabulary vocab;
  num::ParamSet params;

  model::ClassifierConfig classifier_config() const;
};

// Layout:
//   LATLM01\n
//   key=value header lines, blank line
//   "<count> <token>" per vocabulary entry in id order, blank line
//   per tensor: "T <name> <rank> <dims...>\n" + little-endian float64 data
std::string serialize_checkpoint(const Checkpoint& checkpoint);

// Rejects bad magic, malformed headers, truncated or over-long payloads and
// non-finite values with a ParseError carrying the byte offset. The tensor
// set must match the stage (StageError otherwise).
Checkpoint parse_checkpoint(std::string_view bytes);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

// Checks the parameter names and shapes required by the stage tag.
void check_stage_params(const Checkpoint& checkpoint);

// Throws StageError unless the checkpoint's stage is one of `allowed`.
void require_stage(const Checkpoint& checkpoint, std::initializer_list<Stage> allowed);

// The LM tensors of any checkpoint, as their own set.
num::ParamSet lm_params_of(const Checkpoint& checkpoint);

}  // namespace latlm::pipeline
