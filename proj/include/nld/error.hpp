#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace nld {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an input was violated (bad domain, under-resolved grid,
/// non-normalized kernel, negative resource sample, ...).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed: non-convergence, loss of positivity,
/// monotonicity fault, or absence of a positive steady state.
class SolverError : public Error {
 public:
  using Error::Error;
};

/// Experiment configuration could not be parsed or validated.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(what), problems_{what} {}
  ConfigError(const std::string& what, std::vector<std::string> problems)
      : Error(what), problems_(std::move(problems)) {}

  /// One entry per validation problem.
  const std::vector<std::string>& problems() const { return problems_; }

 private:
  std::vector<std::string> problems_;
};

}  // namespace nld
