#pragma once

#include <stdexcept>
#include <string>

namespace nonsing {

/// Base class for every domain error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  DimensionError(const std::string& what, long expected, long found)
      : Error(what + ": expected dimension " + std::to_string(expected) + ", found " +
              std::to_string(found)),
        expected_(expected),
        found_(found) {}

  long expected() const noexcept { return expected_; }
  long found() const noexcept { return found_; }

 private:
  long expected_;
  long found_;
};

class IndexError : public Error {
 public:
  IndexError(const std::string& what, long index, long bound)
      : Error(what + ": index " + std::to_string(index) + " out of range [0, " +
              std::to_string(bound) + ")") {}
};

/// Invalid configuration values (negative radii, empty grids, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed files: IDX headers, checkpoints.
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace nonsing
