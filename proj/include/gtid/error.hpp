#pragma once

#include <stdexcept>
#include <string>

namespace gtid {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Incompatible tensor or matrix shapes.
class DimensionError : public Error {
public:
  using Error::Error;
};

class IndexError : public Error {
public:
  using Error::Error;
};

/// A documented precondition of an operation does not hold.
class PreconditionError : public Error {
public:
  using Error::Error;
};

/// Value outside the mathematical domain of an op, or a non-finite result.
class NumericDomainError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

/// Malformed user data (files, label vectors, empty samples).
class InputError : public Error {
public:
  using Error::Error;
};

/// A metric whose denominator is zero for the given data.
class UndefinedMetricError : public Error {
public:
  using Error::Error;
};

class TrainingDivergenceError : public Error {
public:
  TrainingDivergenceError(const std::string& what, int epoch)
      : Error(what), epoch_(epoch) {}
  int epoch() const { return epoch_; }

private:
  int epoch_;
};

} // namespace gtid
