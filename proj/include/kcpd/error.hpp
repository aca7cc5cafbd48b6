#pragma once

#include <stdexcept>
#include <string>

namespace kcpd {

/// Bad input: malformed file, invalid parameter, violated precondition.
/// The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Failure talking to an external service (after retries).
class ServiceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace kcpd
