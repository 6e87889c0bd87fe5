#pragma once

#include <stdexcept>
#include <string>

namespace kdpg {

/// Base of every failure raised by the library. The `kind` string is stable
/// and is what the CLI and tests match on.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& what)
      : std::runtime_error(kind + ": " + what), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Raised for malformed user configuration (maps to CLI exit code 2).
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error("ConfigError", what) {}
};

}  // namespace kdpg
