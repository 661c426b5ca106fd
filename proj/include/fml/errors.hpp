#ifndef FML_ERRORS_HPP
#define FML_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace fml {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input: malformed configuration, bad operator literal, out-of-range parameter.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Operators defined over different site universes were combined.
class UniverseMismatch : public Error {
 public:
  using Error::Error;
};

/// A dense representation would exceed the configured dimension limit.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// An argument lies outside the domain of the operation (time outside the period, n = 0, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// An iterative numerical procedure failed to reach the requested accuracy.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace fml

#endif  // FML_ERRORS_HPP
