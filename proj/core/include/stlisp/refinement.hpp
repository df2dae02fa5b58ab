#pragma once

#include "stlisp/interpreter.hpp"
#include "stlisp/value.hpp"

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace stlisp {

/// `(encapsulate (((name arg...) => out) ...) (defthm n formula)...)`.
/// Registers the signatures as constrained functions that dispatch to
/// their attachments and records each defthm as a dynamically checked
/// constraint. Other body forms are ignored. When the signatures include
/// RANK and PROC-IDS, SUM-RANK and REPORT-COMPLETION-OR-ERROR-AND-RETURN
/// are defined alongside.
TopLevelResult process_encapsulate(Interpreter& interp, const Value& form);

/// `(defattach sig fn)`; arity and stobj shapes must agree.
TopLevelResult process_defattach(Interpreter& interp, const Value& form);

/// The four scheduler constraints, used when an encapsulate has none.
std::vector<Constraint> default_scheduler_constraints();

/// Sum over `(proc-ids)` of `(nfix (rank p st))`.
Integer sum_rank(Interpreter& interp, const Value& st);

struct SchedulerRun {
  std::vector<Integer> rank_chain;  // before the first exec, then after each
  std::vector<Value> picks;         // processes executed, in order
  std::string report;
  Value final_state;
};

/// Drives pick/ready/exec on the bank's `st` until a pick is not ready,
/// storing the final state back. Throws MeasureError as soon as sum-rank
/// fails to decrease, and EvalError after `max_steps` execs.
SchedulerRun run_scheduler(Interpreter& interp, const Value& st_name,
                           std::uint64_t max_steps = 1'000'000);

using StateGenerator = std::function<Value(Interpreter&, std::mt19937_64&)>;

/// Fresh state followed by up to `max_execs` execs of randomly chosen
/// ready processes.
StateGenerator random_reachable_states(const Value& st_name,
                                       unsigned max_execs = 6);

struct Counterexample {
  std::string constraint;
  std::string bindings;  // e.g. "P = 0, Q = 1"
  std::string state;     // logical view
  std::string error;     // non-empty when evaluation itself failed
};

struct ConstraintReport {
  std::uint64_t trials = 0;
  std::uint64_t checks = 0;
  std::uint64_t failures = 0;
  std::vector<Counterexample> examples;  // the first few failures

  std::string describe() const;
};

/// Samples states with `generator` and evaluates every recorded constraint,
/// drawing free non-stobj variables from `(proc-ids)`. Runs under
/// copy-on-write semantics so formulas may reuse the state.
ConstraintReport check_constraints(Interpreter& interp, std::uint64_t seed,
                                   std::uint64_t trials,
                                   const StateGenerator& generator = {});

}  // namespace stlisp
