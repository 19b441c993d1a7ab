#pragma once

#include <stdexcept>
#include <string>

namespace demix {

// Invalid run configuration (unknown keys, out-of-range parameters).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A numerical kernel could not produce a result (unbalanced transport,
// solver breakdown, non-convergence).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace demix
