#pragma once

#include <Eigen/Dense>

#include <stdexcept>
#include <string>

namespace amfir {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

// The two input channels of every sample.
enum class Modality { kRgb, kFlow };

inline constexpr Modality other(Modality m) {
  return m == Modality::kRgb ? Modality::kFlow : Modality::kRgb;
}

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent input data (files, dimension mismatches).
class DataError : public Error {
 public:
  using Error::Error;
};

// A precondition on caller-supplied configuration was violated.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss or gradient.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace amfir
