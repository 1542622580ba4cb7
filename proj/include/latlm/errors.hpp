#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace latlm {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Filesystem failures: missing input, unwritable output.
class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed or inconsistent data (lattices, corpora, labels).
class DataError : public Error {
 public:
  using Error::Error;
};

class StructuralError : public DataError {
 public:
  using DataError::DataError;
};

// Parse failure with the position it was detected at. `position` is a
// 1-based line number for text formats and a byte offset for binary ones.
class ParseError : public DataError {
 public:
  ParseError(std::size_t position, const std::string& what)
      : DataError(what), position_(position) {}

  std::size_t position() const noexcept { return position_; }

 private:
  std::size_t position_;
};

// Everything model-side: shapes, numerics, stage tags, frozen weights.
class ModelError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public ModelError {
 public:
  using ModelError::ModelError;
};

class NumericError : public ModelError {
 public:
  using ModelError::ModelError;
};

class StageError : public ModelError {
 public:
  using ModelError::ModelError;
};

}  // namespace latlm
