#pragma once

#include <stdexcept>
#include <string>

namespace gensync {

// Base class for all artifact errors. The CLI maps these onto exit codes:
// I/O problems exit 2, everything else exits 1.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionError : Error {
  using Error::Error;
};
struct ContractError : Error {
  using Error::Error;
};
struct LookupError : Error {
  using Error::Error;
};
struct DegenerateRotationError : Error {
  using Error::Error;
};

struct IoError : Error {
  using Error::Error;
};
struct FormatError : Error {
  using Error::Error;
};
struct VersionError : Error {
  using Error::Error;
};

}  // namespace gensync
