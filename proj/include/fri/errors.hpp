#pragma once

#include <stdexcept>
#include <string>

namespace fri {

// configuration / user-input problems (CLI exit code 2)
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

// numerical failures: SVD non-convergence, degenerate roots, ... (exit code 3)
struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fri
