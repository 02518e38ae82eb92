#pragma once

#include <stdexcept>
#include <string>

namespace evo {

/// Base of all errors raised by the library.
class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Invalid parameter or usage. The CLI maps this to exit code 2.
class ParameterError : public Error {
  public:
    using Error::Error;
};

/// Malformed or inconsistent input data (files, tensors, datasets).
class DataError : public Error {
  public:
    using Error::Error;
};

/// A statistical estimator could not produce a value.
class EstimationError : public Error {
  public:
    using Error::Error;
};

/// Parse failure with the offending line number (1-based).
class ParseError : public DataError {
  public:
    ParseError(const std::string &what, std::size_t line)
        : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const { return line_; }

  private:
    std::size_t line_;
};

}  // namespace evo
