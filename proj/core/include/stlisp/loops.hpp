#pragma once

#include "stlisp/value.hpp"
#include "stlisp/world.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

namespace stlisp {

class Interpreter;

// ---------------------------------------------------------------------------
// Measures

/// A natural n becomes (n); a proper list is nfix'd elementwise; anything
/// else becomes (0).
Value lex_fix(const Value& v);
/// Strict order on lex-fixed lists: shorter is smaller, then the first
/// differing element decides.
bool lex_less(const Value& a, const Value& b);

// ---------------------------------------------------------------------------
// Parsed loop$ forms

/// Statement tree of a DO or FINALLY body.
struct Stmt {
  enum class Kind { Seq, If, Let, LetStar, MvLet, Setq, MvSetq, Return, LoopFinish };

  Kind kind = Kind::Seq;
  Value form;
  std::vector<std::shared_ptr<const Stmt>> children;  // Seq
  Value test;                                         // If
  std::shared_ptr<const Stmt> then_branch, else_branch;
  std::vector<std::pair<Value, Value>> bindings;  // Let/LetStar: (var, expr)
  std::vector<Value> vars;                        // MvLet/Setq/MvSetq targets
  Value expr;                                     // MvLet/Setq/MvSetq/Return
  std::shared_ptr<const Stmt> body;               // Let/LetStar/MvLet
};
using StmtPtr = std::shared_ptr<const Stmt>;

/// Parses the DO-body statement grammar. Throws DefinitionError on a
/// stray construct (a statement form in expression position or the reverse).
StmtPtr parse_statement(const Value& form);

/// Throws DefinitionError if `expr` uses progn/setq/mv-setq/return/
/// loop-finish outside statement position.
void check_expression(const Value& expr);

std::vector<Value> statement_free_variables(const StmtPtr& stmt);

struct WithBinding {
  Value var;
  Value type;  // NIL (none), INTEGER or T
  Value init;  // NIL when omitted
};

struct LoopSpec {
  enum class Kind { For, Do };

  Kind kind = Kind::Do;
  Value form;

  // FOR
  Value for_var;
  Value range;
  Value accumulator;  // SUM or COLLECT
  Value for_body;

  // DO
  std::vector<WithBinding> with;
  Shape values{Value{}};  // default (NIL)
  Value measure;          // NIL when absent
  Value guard;            // NIL when absent
  Value do_body;
  Value finally_body;
  bool has_finally = false;

  /// WITH variables then the stobjs named in :VALUES.
  std::vector<Value> settables() const;
  const WithBinding* with_binding(const Value& var) const;
};

/// Parses a `(loop$ ...)` form. With a world, :VALUES entries are checked
/// against the defined stobjs. Throws DefinitionError.
LoopSpec parse_loop(const Value& form, const World* world);

/// Closed `(LAMBDA formals body)` object.
struct LambdaObject {
  std::vector<Value> formals;
  Value body;

  Value to_value() const;
  static LambdaObject from_value(const Value& v);
};

/// Measure expression for a DO loop without :MEASURE: `(nfix v)` when
/// exactly one WITH variable only ever counts down by a positive literal,
/// `(len v)` when it is only ever replaced by its cdr. Throws
/// DefinitionError asking for :MEASURE otherwise.
Value guess_measure(const LoopSpec& spec);

/// Translates a DO or FINALLY body into a one-argument lambda over the
/// environment alist whose every leaf is an exit triple.
///   settables  - assignable variables
///   alist_vars - every variable carried in the alist (settables first)
///   return_arity - length of :VALUES
LambdaObject translate_do_body(const Value& body,
                               const std::vector<Value>& settables,
                               const std::vector<Value>& alist_vars,
                               const LoopSpec& spec, bool is_finally);

/// Everything needed to run one loop$ occurrence, built once.
struct CompiledLoop {
  LoopSpec spec;

  // DO
  std::vector<Value> settables;
  std::vector<Value> alist_vars;  // settables, then read-only free variables
  StmtPtr body;
  StmtPtr finally_body;
  LambdaObject do_fn;
  std::optional<LambdaObject> finally_fn;
  LambdaObject measure_fn;
  Value measure_expr;
  bool measure_guessed = false;
  std::optional<LambdaObject> guard_fn;

  // FOR: (LAMBDA (var free...) body)
  LambdaObject for_fn;
  std::vector<Value> for_free;
};

std::shared_ptr<CompiledLoop> compile_loop(const World& world, const Value& form);

/// Diagnostics threaded through do$ in place of its elided trailing
/// arguments.
struct DoDiagnostics {
  Value form;
  std::uint64_t iterations = 0;
  std::uint64_t finally_runs = 0;
  std::vector<Value> measure_chain;  // lex-fixed measure of each alist
};

/// Initial values for `alist_vars`: WITH initialisations in order (each
/// visible to the next, OF-TYPE checked), then current values of settable
/// stobjs and other free variables from `env`.
std::vector<Value> initial_loop_values(Interpreter& interp,
                                       const CompiledLoop& loop,
                                       const Value& env);

/// The measured recursive interpreter of DO loops. Returns the :RETURN
/// value (a list when :VALUES has several entries).
Value do_loop(Interpreter& interp, const CompiledLoop& loop, Value alist,
              DoDiagnostics& diag);

/// Imperative execution with mutable slots; no measure evaluation.
Value native_exec(Interpreter& interp, const CompiledLoop& loop,
                  const Value& env);

/// FOR ... IN ... SUM/COLLECT.
Value for_loop(Interpreter& interp, const CompiledLoop& loop, const Value& env);

/// Evaluates a loop$ form on the interpreter's configured path.
Value eval_loop(Interpreter& interp, const Value& form, const Value& env);

/// Builds the alist `((v1 . x1) ...)`.
Value make_alist(const std::vector<Value>& vars, const std::vector<Value>& vals);

}  // namespace stlisp
