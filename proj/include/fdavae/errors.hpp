#pragma once

#include <stdexcept>
#include <string>

namespace fdavae {

struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Invalid configuration values or malformed config files.
struct ConfigError : Error {
  using Error::Error;
};

// Tensor/image dimension mismatches; message names expected vs actual.
struct ShapeError : Error {
  using Error::Error;
};

// File system and serialization failures.
struct IoError : Error {
  using Error::Error;
};

// Corrupt, truncated, or incompatible checkpoint files.
struct CheckpointError : Error {
  using Error::Error;
};

// A loss component became non-finite during training.
struct DivergenceError : Error {
  DivergenceError(const std::string& component, long step)
      : Error("non-finite loss component '" + component + "' at step " +
              std::to_string(step)),
        component(component), step(step) {}
  std::string component;
  long step;
};

}  // namespace fdavae
