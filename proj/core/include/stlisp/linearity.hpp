#pragma once

#include "stlisp/value.hpp"
#include "stlisp/world.hpp"

#include <optional>
#include <string>
#include <vector>

namespace stlisp {

/// Syntactic single-threadedness discipline for stobjs.
///
///   R1  A stobj name occurs only in a stobj argument position typed for
///       that stobj (or as a returned value).
///   R2  A call returning a stobj has its result immediately rebound to the
///       same name by let/let* /mv-let (or stobj-let outputs), or is the
///       returned value; a rebound stobj must then be returned.
///   R3  A stobj is never bound to a different name and never appears
///       twice in one argument list.
///   R4  Both branches of an `if` return the same stobjs.
///
/// Calls to creators are legal only as the default of a table get.
struct Violation {
  std::string rule;  // "R1".."R4", or "SYNTAX"
  Value form;
  std::string message;
};

struct LinearityReport {
  std::vector<Violation> violations;
  Shape stobjs_in;
  std::optional<Shape> stobjs_out;

  bool ok() const noexcept { return violations.empty(); }
  std::string describe() const;
};

/// Checks a `(defun name formals ... body)` form. Stobj formals are those
/// listed in `(declare (xargs :stobjs ...))`. Self-calls are resolved by
/// inferring the output shape from non-recursive branches.
LinearityReport check_defun(const World& world, const Value& defun_form);

/// Checks a top-level expression with every global stobj in scope.
LinearityReport check_top_level(const World& world, const Value& form);

/// Checks an expression with the given stobjs in scope.
LinearityReport check_term(const World& world, const Value& term,
                           const std::vector<Value>& stobjs_in_scope);

}  // namespace stlisp
