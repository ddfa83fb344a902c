#pragma once

#include <stdexcept>
#include <string>

namespace strokewave {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller broke a documented precondition (bad shape, out-of-range config).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// File-system or codec failure. The message carries the offending path.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A file was readable but its contents do not match the expected schema.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace strokewave
