#pragma once

#include <stdexcept>
#include <string>

namespace jigcm {

// Base class for all library errors. The CLI maps each subclass to an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid configuration or arguments (exit code 2).
class UsageError : public Error {
 public:
  using Error::Error;
};

// Unreadable, corrupt or inconsistent input data (exit code 3).
class DataError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf loss, singular systems and similar (exit code 4).
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace jigcm
