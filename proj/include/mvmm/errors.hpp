#pragma once

#include <stdexcept>
#include <string>

namespace mvmm {

// Wrong number of axes or mismatched dimensions.
struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A documented precondition on argument values was violated.
struct ContractError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// Malformed user input (files, configs).
struct InputError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// An iterative solver failed or the requested structure is unattainable.
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mvmm
