#pragma once

#include <stdexcept>
#include <string>

namespace lesionlab {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration: shape mismatches, violated config invariants.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed caller input (out-of-vocabulary tokens, empty lists, bad ranges).
class InputError : public Error {
 public:
  using Error::Error;
};

/// Unknown unit, task or parameter.
class LookupError : public Error {
 public:
  using Error::Error;
};

/// API misuse such as running backward twice on one graph.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Corrupt or inconsistent persisted data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values where finite ones are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Correlation of a constant vector.
class UndefinedCorrelation : public Error {
 public:
  using Error::Error;
};

/// A pipeline stage was invoked before its prerequisite.
class DependencyError : public Error {
 public:
  DependencyError(std::string prerequisite, const std::string& message)
      : Error(message), prerequisite_(std::move(prerequisite)) {}
  const std::string& prerequisite() const noexcept { return prerequisite_; }

 private:
  std::string prerequisite_;
};

/// A recorded artifact no longer matches its manifest fingerprint.
class StalenessError : public Error {
 public:
  using Error::Error;
};

}  // namespace lesionlab
