#pragma once

#include <stdexcept>

namespace citeflux {

// Filesystem problems: missing inputs, unreadable or unwritable paths.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Input violates a documented file schema (corpus.json, params.json, ...).
struct SchemaError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure: degenerate parameters, supercritical process, non-finite
// objective.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller broke a precondition: bad argument values, mismatched lengths,
// unknown ids.
struct InvalidInput : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

}  // namespace citeflux
