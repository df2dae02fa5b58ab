#pragma once

#include "stlisp/value.hpp"

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace stlisp {

class LispError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ReadError : public LispError {
 public:
  ReadError(const std::string& what, std::size_t line, std::size_t column)
      : LispError(std::to_string(line) + ":" + std::to_string(column) + ": " +
                  what),
        line_(line),
        column_(column) {}

  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

class EvalError : public LispError {
 public:
  using LispError::LispError;
};

/// Rejected definition or top-level form (stobj discipline, malformed
/// declare, translation-time loop$ errors).
class DefinitionError : public LispError {
 public:
  using LispError::LispError;
};

/// A guard, OF-TYPE or builtin-argument check failed at runtime.
class GuardViolation : public EvalError {
 public:
  enum class Phase { Call, IterationStart, Assignment, Builtin };

  struct Detail {
    Phase phase = Phase::Builtin;
    Value form;             // offending call or guard term
    Value variable;         // loop/formal variable named by the check, or NIL
    Value value;            // offending value
    std::string predicate;  // e.g. "ACL2-NUMBERP"
    std::optional<std::uint64_t> iteration;
  };

  explicit GuardViolation(Detail d);

  const Detail& detail() const noexcept { return detail_; }
  /// Renders `(PRED (CDR (ASSOC-EQ-SAFE 'VAR ALIST)))` when a loop variable
  /// is known, else an empty string.
  std::string checkpoint() const;

 private:
  static std::string render(const Detail& d);
  Detail detail_;
};

class MeasureError : public EvalError {
 public:
  using EvalError::EvalError;
};

class IterationCapError : public EvalError {
 public:
  using EvalError::EvalError;
};

}  // namespace stlisp
