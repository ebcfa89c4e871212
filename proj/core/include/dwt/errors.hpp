#pragma once

#include <stdexcept>
#include <string>

namespace dwt {

/// Invalid configuration: extents, enum values, schema or option keys.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid runtime input such as out-of-range token ids or empty targets.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A NaN or Inf appeared where finite values were required.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dwt
