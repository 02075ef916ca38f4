#pragma once

#include <stdexcept>
#include <string>

namespace dialgraph {

/// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// Incompatible shapes (matmul inner dims, broadcast, concat, ...).
struct DimensionError : Error {
  using Error::Error;
};

/// Non-finite values where finite ones are required.
struct NumericError : Error {
  using Error::Error;
};

/// A precondition of an operation was violated by the caller.
struct ContractError : Error {
  using Error::Error;
};

/// Malformed input data (dataset records, JSON, ...).
struct ParseError : Error {
  using Error::Error;
};

/// Invalid or unsatisfiable configuration.
struct ConfigError : Error {
  using Error::Error;
};

/// Checkpoint file problems (missing params, shape mismatch, corruption).
struct CheckpointError : Error {
  using Error::Error;
};

}  // namespace dialgraph
