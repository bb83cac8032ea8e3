#pragma once

#include <stdexcept>
#include <string>

namespace dvtg {

// Error categories map onto CLI exit codes: usage=1, data/validation=2,
// numeric failure=3.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& msg) : Error(msg) {}
};

// Bad file contents, invalid shapes, violated invariants.
class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(msg) {}
};

class ShapeError : public DataError {
 public:
  explicit ShapeError(const std::string& msg) : DataError(msg) {}
};

// NaN losses, diverged optimization, missing gradients.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(msg) {}
};

}  // namespace dvtg
