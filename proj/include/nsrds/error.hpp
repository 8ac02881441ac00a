#pragma once

#include <stdexcept>
#include <string>

namespace nsrds {

// Failure classes map onto CLI exit codes (see nsrds/cli.hpp).
enum class ErrorKind {
  kInput,        // malformed or out-of-contract arguments
  kSpaceMismatch,
  kOracleSizeCap,
  kSupportOverflow,
  kNotInvertible,
  kCensored,     // statistical fit has nothing to fit
  kInternal,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace nsrds
