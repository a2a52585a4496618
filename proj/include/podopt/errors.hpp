#pragma once

#include <stdexcept>
#include <string>

namespace podopt {

// Configuration / input contract violations. CLI exit code 2.
struct ConfigError : std::invalid_argument {
  explicit ConfigError(const std::string& msg) : std::invalid_argument(msg) {}
};

// A certified bound failed to dominate a directly computed error. CLI exit code 3.
struct RigorError : std::runtime_error {
  explicit RigorError(const std::string& msg) : std::runtime_error(msg) {}
};

// Iterative solver failed to converge (carries context in the message). CLI exit code 4.
struct SolverError : std::runtime_error {
  explicit SolverError(const std::string& msg) : std::runtime_error(msg) {}
};

// Degenerate data (e.g. all-zero snapshots) that admits no basis.
struct EmptyBasisError : std::runtime_error {
  explicit EmptyBasisError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace podopt
