#pragma once

#include <stdexcept>
#include <string>

namespace dropdec {

// Invalid numeric content: negative probability, NaN, sum outside tolerance.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operands disagree on vocabulary / vector size.
class DimensionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Out-of-range or malformed argument (k, gamma, beta, token id, ...).
class ParameterError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Operation applied to an empty collection.
class EmptyInputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Model or corpus file could not be read, parsed, or validated.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A guaranteed internal invariant failed; indicates a bug, not bad input.
class InternalError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

}  // namespace dropdec
