#pragma once

#include <stdexcept>
#include <string>

namespace mocotp {

// Base for all library errors. The CLI maps subclasses to exit codes:
// validation/format -> 1, everything else -> 2.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Broken caller contract (bad shapes, out-of-range arguments).
class ContractError : public Error {
 public:
  explicit ContractError(const std::string& msg) : Error(msg) {}
};

// Input data violates a documented invariant (duplicate ids, unknown class).
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& msg) : Error(msg) {}
};

// Unparseable file contents; carries the offending line when known.
class FormatError : public Error {
 public:
  explicit FormatError(const std::string& msg) : Error(msg) {}
  FormatError(const std::string& msg, std::size_t line)
      : Error(msg + " (line " + std::to_string(line) + ")"), line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_ = 0;
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& msg) : Error(msg) {}
};

}  // namespace mocotp
