#pragma once

#include <stdexcept>

namespace hsr {

// Base class for every error thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor or cube dimensions violate an operation's contract.
struct InvalidShapeError : Error {
  using Error::Error;
};

// API misuse: backward on a non-scalar, reusing a consumed graph,
// reading a missing gradient, duplicate parameter names.
struct ContractError : Error {
  using Error::Error;
};

// Invalid or mutually inconsistent configuration values, including the
// solver step-size stability guard.
struct ConfigError : Error {
  using Error::Error;
};

// Malformed file content: bad magic, truncation, unparsable rows.
struct FormatError : Error {
  using Error::Error;
};

// Spectral inputs without usable coverage (all-zero response bands and
// similar degeneracies).
struct DegenerateInputError : Error {
  using Error::Error;
};

// Non-finite values appeared during an iterative computation.
struct DivergenceError : Error {
  using Error::Error;
};

}  // namespace hsr
