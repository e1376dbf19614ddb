#pragma once

#include <stdexcept>
#include <string>

namespace massext {

// Raised when an operation's mathematical hypothesis does not hold for the
// supplied parameters (as opposed to a malformed argument).
class PreconditionError : public std::domain_error {
 public:
  explicit PreconditionError(const std::string& what) : std::domain_error(what) {}
};

class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace massext
