#pragma once

#include <stdexcept>
#include <string>

namespace wavemoment {

enum class ErrorKind {
  InvalidArgument,
  Format,
  Dimension,
  Truncation,
  Io,
  Cfl,
  BlowUp,
  Convergence,
  Divergence,
  Support,
  NotApplicable,
  Membership,
  Config,
};

inline const char *to_string(ErrorKind kind) {
  switch (kind) {
  case ErrorKind::InvalidArgument: return "invalid-argument";
  case ErrorKind::Format: return "format";
  case ErrorKind::Dimension: return "dimension";
  case ErrorKind::Truncation: return "truncation";
  case ErrorKind::Io: return "io";
  case ErrorKind::Cfl: return "cfl";
  case ErrorKind::BlowUp: return "blow-up";
  case ErrorKind::Convergence: return "convergence";
  case ErrorKind::Divergence: return "divergence";
  case ErrorKind::Support: return "support";
  case ErrorKind::NotApplicable: return "not-applicable";
  case ErrorKind::Membership: return "membership";
  case ErrorKind::Config: return "config";
  }
  return "unknown";
}

/// Every failure raised by the library carries a kind so callers (and the CLI
/// exit-code mapping) can branch without parsing messages.
class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string &what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string &what) {
  throw Error(kind, what);
}

} // namespace wavemoment
