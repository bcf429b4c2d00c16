#pragma once

#include <stdexcept>
#include <string>

namespace wsfn {

// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Mismatched counts or dimensions between ensembles, fields, and objectives.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Input is valid in principle but outside what the toolkit supports
// (unequal-count couplings, caps exceeded, ...).
class UnsupportedError : public Error {
 public:
  using Error::Error;
};

// The objective does not provide the requested accessor (e.g. explicit
// Hessian blocks for network objectives).
class CapabilityError : public Error {
 public:
  using Error::Error;
};

// Non-finite values, singular systems, failed factorizations.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed configuration or bad user-supplied parameters.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace wsfn
