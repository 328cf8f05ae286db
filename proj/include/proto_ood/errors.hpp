#pragma once

#include <stdexcept>
#include <string>

namespace proto_ood {

// Base for everything this library throws on purpose.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor rank/dimension mismatches. Messages name the offending shapes.
struct ShapeError : Error {
  using Error::Error;
};

// Out-of-range class targets, token ids, row indices.
struct IndexError : Error {
  using Error::Error;
};

// Degenerate numeric inputs: zero-norm vectors, non-finite scalars.
struct ValueError : Error {
  using Error::Error;
};

// API contract violations: backward on a consumed tape, mismatched method/arguments.
struct UsageError : Error {
  using Error::Error;
};

// Empty banks, empty splits: an object asked to act before it holds data.
struct StateError : Error {
  using Error::Error;
};

// Bad or inconsistent configuration values.
struct ConfigError : Error {
  using Error::Error;
};

// Corpus/manifest problems: parse failures, unknown labels, split violations.
struct DataError : Error {
  using Error::Error;
};

// Few-shot requests exceeding per-class availability.
struct SamplingError : DataError {
  using DataError::DataError;
};

// Non-finite training loss; message carries the step index.
struct TrainingError : Error {
  using Error::Error;
};

// Filesystem failures.
struct IoError : Error {
  using Error::Error;
};

}  // namespace proto_ood
