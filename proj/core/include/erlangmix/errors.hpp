#pragma once

#include <stdexcept>
#include <string>

namespace erlangmix {

// Parameter-domain violations use std::domain_error; the classes below cover
// the remaining failure kinds so callers (the CLI in particular) can map them
// onto distinct exit codes.

/// Invalid run configuration: schedules, hyperparameters, presets, flags.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent survival data.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerical breakdown (e.g. every urn weight underflowing).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace erlangmix
