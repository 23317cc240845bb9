#pragma once

#include <stdexcept>
#include <string>

namespace swapsim {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand dimensions do not match the operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A matrix violates a physicality constraint (Hermiticity, positivity, trace).
class PhysicalityError : public Error {
 public:
  using Error::Error;
};

/// Heralding failed: the photon was lost with certainty.
class VacuumError : public Error {
 public:
  using Error::Error;
};

/// Invalid estimator input (missing settings, zero counts, rank deficiency).
class EstimationError : public Error {
 public:
  using Error::Error;
};

/// Invalid experiment or CLI configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace swapsim
