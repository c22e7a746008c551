#pragma once

#include <stdexcept>
#include <string>

namespace krm {

// Index out of range, function undefined at a point, incompatible spaces.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Caller violated an operation's stated precondition.
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A diagnostic construction could not find the configuration its premise
// promises (e.g. no escaping mass within the probed horizon).
class PremiseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input document; the message names the offending field.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace krm
