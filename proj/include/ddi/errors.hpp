#pragma once

#include <stdexcept>
#include <string>

namespace ddi {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad configuration values or unusable run setup. CLI exit code 2.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed input files; message carries file and line. CLI exit code 2.
struct ParseError : Error {
  using Error::Error;
};

// Ill-posed data at runtime: unknown ids, out-of-vocabulary lookups,
// exhausted negative sampling, single-class metric strata. CLI exit code 2.
struct DataError : Error {
  using Error::Error;
};

// Shape mismatch between arrays fed to a primitive. CLI exit code 3.
struct DimensionError : Error {
  using Error::Error;
};

// Operation outside its mathematical domain (empty softmax, non-scalar
// backward seed). CLI exit code 3.
struct DomainError : Error {
  using Error::Error;
};

// Non-finite values where finite ones are required. CLI exit code 3.
struct NumericalError : Error {
  using Error::Error;
};

}  // namespace ddi
