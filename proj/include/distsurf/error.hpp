#pragma once

#include <stdexcept>
#include <string>

namespace distsurf {

// Malformed or missing input. The CLI maps this to exit code 2.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values or a failed numerical routine. Exit code 3.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public InputError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : InputError(what + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class EmptyWindow : public InputError {
 public:
  EmptyWindow() : InputError("event window is empty; distance surface undefined") {}
};

class NonFiniteInput : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

class InsufficientSamples : public InputError {
 public:
  using InputError::InputError;
};

class OutOfRange : public InputError {
 public:
  using InputError::InputError;
};

class NoOverlap : public InputError {
 public:
  NoOverlap() : InputError("no evaluable events overlap between estimate and ground truth") {}
};

}  // namespace distsurf
