#pragma once

#include <stdexcept>
#include <string>

namespace readmit {

// Bad input data or arguments: the caller gave us something that violates a
// documented precondition or schema.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
};

// Malformed or missing configuration (files, specs, CLI-level settings).
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

// A numeric procedure failed at runtime (non-convergence, non-finite values).
class ComputeError : public std::runtime_error {
 public:
  explicit ComputeError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace readmit
