#pragma once

#include <stdexcept>

#include "dcfm/tensorlab/tensor.hpp"  // ShapeError

namespace dcfm {

// File-format or filesystem failure; the message names the offending file.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Invalid user configuration (bad key, out-of-range value, unknown class).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

}  // namespace dcfm
