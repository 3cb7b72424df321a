#pragma once

#include <stdexcept>
#include <string>

namespace spmbd {

/// Base class for all solver errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or inputs (bad h, empty ensemble, unsatisfiable sampler, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A particle or ensemble invariant was violated (non-finite location, zero weight, ...).
class InvariantError : public Error {
 public:
  using Error::Error;
};

/// The reconstructed solution has zero L1 mass, so it cannot be resampled.
class DegenerateSolutionError : public Error {
 public:
  using Error::Error;
};

/// A cell average or field value became non-finite.
class NumericalBlowupError : public Error {
 public:
  using Error::Error;
};

/// A relative error was requested against a reference of zero norm.
class UndefinedMetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace spmbd
