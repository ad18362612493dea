#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mddm {

// Input values violate a documented precondition (non-finite, unwrapped, ...).
class InvalidInput : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Argument combination is not allowed (k >= N, bad ranges, shape mismatch).
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Function evaluated outside its mathematical domain (r <= 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Two particles closer than the physical floor of the force field.
class OverlapError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A forward pass or loss produced a non-finite value during training.
class TrainingDivergence : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Monte-Carlo check could not gather enough conditioned samples.
class InsufficientSamples : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed text input; carries the 1-based line number where parsing failed.
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Persisted file is well-formed but breaks a data invariant or version contract.
class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace mddm
