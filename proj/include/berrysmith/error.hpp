#pragma once

#include <stdexcept>
#include <string>

namespace berrysmith {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition of an operation was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Input data is missing, unreadable or inconsistent.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Command-line or configuration file problem.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace berrysmith
