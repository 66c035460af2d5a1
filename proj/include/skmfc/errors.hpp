#pragma once

#include <stdexcept>
#include <string>

namespace skmfc {

/// Invalid configuration or precondition violation (CLI exit code 2).
struct ConfigError : std::invalid_argument {
    explicit ConfigError(const std::string& what) : std::invalid_argument(what) {}
};

/// Numerical failure: blow-up, under-resolution, non-convergence promoted to
/// an error (CLI exit code 3).
struct SolverError : std::runtime_error {
    explicit SolverError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace skmfc
