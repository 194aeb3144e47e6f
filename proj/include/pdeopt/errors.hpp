#pragma once

#include <stdexcept>

namespace pdeopt {

// Rejected input or configuration; the CLI maps this to exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Numerical failure (singular factorization, non-convergence); exit code 3.
struct SolverError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pdeopt
