#pragma once

#include <stdexcept>
#include <string>

namespace lcs2s {

/// Tensor operands whose shapes do not fit the operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// NaN or infinity where a finite value is required.
class NumericError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// A precondition of an operation was violated by the caller.
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Token, charge, or other id outside its table.
class VocabError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

/// Malformed or inconsistent input data (corpus lines, checkpoints, specs).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace lcs2s
