#pragma once

#include <stdexcept>
#include <string>

namespace negdelay {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters, violated preconditions, malformed configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure did not reach its stated accuracy.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

/// The data cannot support the requested analysis (empty class, flat
/// trace, zero denominator, unreachable detection target, ...).
class AnalysisError : public Error {
 public:
  using Error::Error;
};

/// Process exit status for an exception escaping a subcommand.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConvergenceError*>(&e)) return 3;
  if (dynamic_cast<const AnalysisError*>(&e)) return 4;
  return 2;
}

}  // namespace negdelay
