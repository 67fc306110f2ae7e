#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mvkm {

/// Root of every error thrown by the library.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// A bad argument or precondition violation at an API boundary.
class ArgumentError : public Error {
public:
  using Error::Error;
};

class IoError : public Error {
public:
  using Error::Error;
};

/// Malformed input row. `line()` is 1-based and counts the header.
class ParseError : public Error {
public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

/// Structural invariant violated, e.g. duplicate (student, attempt).
class IntegrityError : public Error {
public:
  using Error::Error;
};

/// Value outside its permitted range, e.g. graded score above 1.
class RangeError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

/// Non-finite objective during training.
class TrainingError : public Error {
public:
  TrainingError(int epoch, const std::string& what)
      : Error("epoch " + std::to_string(epoch) + ": " + what), epoch_(epoch) {}
  int epoch() const noexcept { return epoch_; }

private:
  int epoch_;
};

class ColdStartError : public Error {
public:
  using Error::Error;
};

/// Input with no usable structure, e.g. clustering identical rows.
class DegenerateInputError : public Error {
public:
  using Error::Error;
};

class EmptySequenceError : public Error {
public:
  using Error::Error;
};

}  // namespace mvkm
