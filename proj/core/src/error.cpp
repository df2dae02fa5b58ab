#include "stlisp/error.hpp"

#include "stlisp/sexpr.hpp"

namespace stlisp {

GuardViolation::GuardViolation(Detail d)
    : EvalError(render(d)), detail_(std::move(d)) {}

std::string GuardViolation::checkpoint() const {
  if (detail_.variable.is_nil() || detail_.predicate.empty()) return {};
  return "(" + detail_.predicate + " (CDR (ASSOC-EQ-SAFE '" +
         detail_.variable.symbol_name() + " ALIST)))";
}

std::string GuardViolation::render(const Detail& d) {
  std::string out;
  switch (d.phase) {
    case Phase::Call:
      out = "guard violation in call " + show(d.form) + ": guard " +
            d.predicate + " is false";
      break;
    case Phase::IterationStart:
      out = "loop :GUARD " + show(d.form) + " is false at iteration start";
      break;
    case Phase::Assignment:
      out = "OF-TYPE violation: assignment to " + show(d.variable) + " of " +
            show(d.value) + " is not " + d.predicate;
      break;
    case Phase::Builtin:
      out = "guard violation in " + show(d.form) + ": argument " +
            (d.variable.is_nil() ? std::string() : show(d.variable) + " = ") +
            show(d.value) + " fails " + d.predicate;
      break;
  }
  if (d.iteration) out += " (iteration " + std::to_string(*d.iteration) + ")";
  if (!d.variable.is_nil() && !d.predicate.empty() && d.iteration)
    out += "; failed obligation: (" + d.predicate +
           " (CDR (ASSOC-EQ-SAFE '" + d.variable.symbol_name() + " ALIST)))";
  return out;
}

}  // namespace stlisp
