#pragma once

#include <stdexcept>
#include <string>

namespace advx {

/// Invalid layer schedule, hyperparameters, or mismatched shapes between
/// components that were configured together.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad data handed to an operation (wrong patch size, label out of range...).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operation called in the wrong order, e.g. backward without a forward pass.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// NaN or Inf showed up in an activation, gradient, or loss.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Reading or writing a file failed.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace advx
