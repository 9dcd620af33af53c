#pragma once

#include <stdexcept>
#include <string>

namespace fatality {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent user input: CSV rows, vocabularies, configs, splits.
class DataError : public Error {
 public:
  using Error::Error;
};

// Weight file that cannot be decoded or does not match the expected layout.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

// Shape or precondition violation inside the numerical code.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Non-finite loss or activations during training.
class NumericalError : public Error {
 public:
  NumericalError(const std::string& what, long step) : Error(what), step_(step) {}
  long step() const noexcept { return step_; }

 private:
  long step_;
};

}  // namespace fatality
