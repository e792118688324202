#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace p2n {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

class IoError : public Error {
public:
  using Error::Error;
};

class FormatError : public Error {
public:
  using Error::Error;
};

class ShapeError : public Error {
public:
  using Error::Error;
};

class ParameterError : public Error {
public:
  using Error::Error;
};

/// Invalid or incomplete configuration. `field()` names the offending key.
class ConfigError : public Error {
public:
  ConfigError(std::string field, const std::string& what)
      : Error(field + ": " + what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

private:
  std::string field_;
};

class MissingReferenceError : public Error {
public:
  using Error::Error;
};

/// Raised when a training loss turns non-finite.
class DivergenceError : public Error {
public:
  explicit DivergenceError(long iteration)
      : Error("training diverged: non-finite loss at iteration " + std::to_string(iteration)),
        iteration_(iteration) {}
  long iteration() const noexcept { return iteration_; }

private:
  long iteration_;
};

class IndeterminateError : public Error {
public:
  using Error::Error;
};

}  // namespace p2n
