#pragma once

#include <stdexcept>
#include <string>

namespace afe {

// Caller passed something outside an operation's contract.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Operation invoked on an object that is not ready for it (untrained model,
// unbuilt bank, empty codebook).
class InvalidState : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed tensor file. field() names the offending header field or
// "payload".
class FormatError : public IoError {
 public:
  FormatError(std::string field, std::string detail)
      : IoError("npft " + field + ": " + detail),
        field_(std::move(field)),
        detail_(std::move(detail)) {}

  const std::string& field() const noexcept { return field_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  std::string field_;
  std::string detail_;
};

class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace afe
