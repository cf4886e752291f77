#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace geoecon {

// Exit codes surfaced by the CLI: 2 missing/unreadable input, 3 validation
// failure, 4 broken internal invariant.
class Error : public std::runtime_error {
public:
  Error(std::string msg, int exit_code)
      : std::runtime_error(std::move(msg)), exit_code_(exit_code) {}
  int exit_code() const noexcept { return exit_code_; }

private:
  int exit_code_;
};

class IoError : public Error {
public:
  explicit IoError(std::string msg) : Error(std::move(msg), 2) {}
};

class ValidationError : public Error {
public:
  explicit ValidationError(std::string msg) : Error(std::move(msg), 3) {}
};

class InternalError : public Error {
public:
  explicit InternalError(std::string msg) : Error(std::move(msg), 4) {}
};

}  // namespace geoecon
