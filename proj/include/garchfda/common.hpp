#pragma once

/// Shared error taxonomy and version tag.
///
/// The three runtime error classes map one-to-one onto the CLI exit codes:
/// SchemaError -> 2, NumericError -> 3, IoError -> 4. Programming-contract
/// violations (bad dimensions, out-of-domain evaluation points) use the
/// standard std::invalid_argument / std::domain_error types instead.

#include <stdexcept>
#include <string>

namespace garchfda {

inline constexpr const char* kVersion = "0.1.0";

/// Input rows, configuration files or command arguments violate the
/// documented schema.
class SchemaError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Filesystem problem: missing, unreadable or unwritable path.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A sampler or estimator produced a non-finite or impossible quantity.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace garchfda
