#pragma once

#include <stdexcept>
#include <string>

namespace paris {

// Base of every exception thrown by the library. Callers that only want to
// distinguish "our" failures from std ones catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace paris
