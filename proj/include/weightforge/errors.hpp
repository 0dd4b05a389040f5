#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace wf {

// Base class for everything thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor/vector shapes disagree with the owning spec.
struct DimensionError : Error {
  using Error::Error;
};

// Caller handed in values outside the documented domain (labels, tokens,
// non-finite features, empty batches).
struct InputError : Error {
  using Error::Error;
};

// Configuration values violate their invariants.
struct ConfigError : Error {
  using Error::Error;
};

// A layer selector names tensors that do not exist.
struct SelectorError : Error {
  using Error::Error;
};

// A fitness function returned a non-finite value; keeps the offending
// position for diagnosis.
struct EvaluationError : Error {
  EvaluationError(const std::string& what, std::vector<double> position)
      : Error(what), position(std::move(position)) {}
  std::vector<double> position;
};

// Malformed text input (CSV cells, token lines). Message names row/column.
struct ParseError : Error {
  using Error::Error;
};

// Structural problems in text inputs (missing columns, bad headers).
struct SchemaError : Error {
  using Error::Error;
};

// Binary payload does not match the declared layout.
struct FormatError : Error {
  using Error::Error;
};

// Filesystem-level failure (missing file, unwritable path).
struct FileError : Error {
  using Error::Error;
};

// Two run sets cannot be paired for a statistical comparison.
struct PairingError : Error {
  using Error::Error;
};

}  // namespace wf
