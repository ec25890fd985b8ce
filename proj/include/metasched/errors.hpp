#pragma once

#include <stdexcept>
#include <string>

namespace metasched {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Tensor/parameter shape disagreement.
struct ShapeError : Error {
  using Error::Error;
};

// Non-finite value produced where the contract requires finite results.
struct NumericError : Error {
  using Error::Error;
};

// API misuse (consumed tape, missing parameter, duplicate name, ...).
struct UsageError : Error {
  using Error::Error;
};

// Invalid configuration value or unknown configuration key.
struct ConfigError : Error {
  using Error::Error;
};

// Inner-loop adaptation produced a non-finite loss; carries the step index.
struct AdaptError : Error {
  AdaptError(const std::string& what, int step_index)
      : Error(what), step(step_index) {}
  int step;
};

}  // namespace metasched
