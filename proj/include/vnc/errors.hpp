#pragma once

#include <stdexcept>
#include <string>

namespace vnc {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raised by the expression front end. `line`/`column` are 1-based.
struct ParseError : Error {
  enum class Kind { Syntax, UnknownSymbol, EmptyInput };

  ParseError(Kind k, std::string message, int line_, int column_)
      : Error(std::move(message)), kind(k), line(line_), column(column_) {}

  Kind kind;
  int line;
  int column;
};

/// Expression evaluated outside its domain (log of nonpositive, division by
/// zero, ...). Evaluation failure, not a crash.
struct DomainError : Error {
  using Error::Error;
};

struct NotPositiveDefinite : Error {
  using Error::Error;
};

struct InvalidSystem : Error {
  using Error::Error;
};

struct RankDeficientConstraints : Error {
  using Error::Error;
};

struct NotTransversal : Error {
  using Error::Error;
};

struct SingularMatrix : Error {
  using Error::Error;
};

/// The invariance-enforcing control does not exist or is not unique at the
/// requested state and the caller refused the fallback policy.
struct ControlUnavailable : Error {
  using Error::Error;
};

struct StepFailure : Error {
  using Error::Error;
};

struct GridMismatch : Error {
  using Error::Error;
};

struct ConfigError : Error {
  using Error::Error;
};

}  // namespace vnc
