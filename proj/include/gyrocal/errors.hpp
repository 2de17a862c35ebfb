#pragma once

#include <stdexcept>
#include <string>

namespace gyrocal {

/// Malformed or missing input data (files, CSV rows, manifests).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& msg) : std::runtime_error(msg) {}
};

/// Numerical failure: singular solve, diverging optimization, non-finite values.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace gyrocal
