#pragma once

#include <stdexcept>
#include <string>

namespace loggas {

/// Failure classes, mapped one-to-one onto the CLI exit codes.
enum class ErrorKind
{
  validation = 2,
  numerical = 3,
  io = 4
};

class Error : public std::runtime_error
{
public:
  Error(ErrorKind kind, std::string code, const std::string& message)
    : std::runtime_error(message)
    , kind_(kind)
    , code_(std::move(code))
  {}

  ErrorKind kind() const { return kind_; }
  /// Short machine-readable tag, e.g. "support_not_normalized".
  const std::string& code() const { return code_; }
  int exit_code() const { return static_cast<int>(kind_); }

private:
  ErrorKind kind_;
  std::string code_;
};

inline Error rejected_input(const std::string& message)
{
  return Error(ErrorKind::validation, "rejected_input", message);
}

inline Error numerical_failure(std::string code, const std::string& message)
{
  return Error(ErrorKind::numerical, std::move(code), message);
}

} // namespace loggas
