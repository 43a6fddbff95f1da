#pragma once

#include <stdexcept>
#include <string>

namespace fedad {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration: dimension mismatches, invalid hyperparameters, bad grids.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// API misuse: stale caches, mismatched vector lengths, missing SVDD center.
class UsageError : public Error {
 public:
  using Error::Error;
};

// NaN/Inf produced during a forward pass, training step, or scoring.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Malformed input files (CSV, schema, checkpoint).
class DataError : public Error {
 public:
  using Error::Error;
};

// Metric undefined for the given labels (e.g. single-class AUROC).
class MetricError : public Error {
 public:
  using Error::Error;
};

}  // namespace fedad
