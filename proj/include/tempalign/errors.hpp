#pragma once

#include <stdexcept>
#include <string>

namespace tempalign {

// Base class for everything thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shape or axis disagreement between tensors.
struct DimensionError : Error {
  using Error::Error;
};

// A function was called outside its contract (empty input, non-scalar loss, ...).
struct ContractError : Error {
  using Error::Error;
};

// An out-of-range hyperparameter or argument value.
struct ParameterError : Error {
  using Error::Error;
};

// Malformed input file; message carries the line number when known.
struct FormatError : Error {
  using Error::Error;
};

// Semantically invalid data (unknown label, mismatched documents, ...).
struct DataError : Error {
  using Error::Error;
};

// Invalid or inconsistent configuration.
struct ConfigError : Error {
  using Error::Error;
};

// NaN/Inf encountered, or an iterative method failed to converge.
struct NumericError : Error {
  using Error::Error;
};

// File could not be opened or written.
struct IoError : Error {
  using Error::Error;
};

// A dictionary-based alignment was requested but no usable pairs exist.
struct EmptyDictionaryError : DataError {
  using DataError::DataError;
};

}  // namespace tempalign
