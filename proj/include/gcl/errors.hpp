#pragma once

#include <stdexcept>

namespace gcl {

// Tensor dimensions do not line up.
struct ShapeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// A value is outside its mathematical domain (non-finite input, bad count, ...).
struct DomainError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Dataset contents are unusable for the requested operation.
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File could not be parsed; message carries the offending line number.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// An API was called against its documented contract (stale tape, negative eps, ...).
struct ContractError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Training produced a non-finite loss; message names the iteration.
struct DivergenceError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace gcl
