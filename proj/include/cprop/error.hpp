#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cprop {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Bad parameters: precondition violations, malformed or missing config keys.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// A text file that does not follow one of the documented formats.
class FormatError : public Error {
public:
  FormatError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// Numerical failure: a solver that did not converge, a residual check that failed.
class NumericalError : public Error {
public:
  using Error::Error;
};

}  // namespace cprop
