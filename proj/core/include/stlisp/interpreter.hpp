#pragma once

#include "stlisp/stobj.hpp"
#include "stlisp/value.hpp"
#include "stlisp/world.hpp"

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace stlisp {

struct CompiledLoop;
struct LambdaObject;

/// Parsed `(defun name formals [doc] (declare ...)* body)`.
struct DefunParts {
  Value name;
  std::vector<Value> formals;
  Value body;
  Value guard;
  Value measure;
  std::vector<Value> stobjs;
  std::vector<std::string> ignored_xargs;
};

/// Throws DefinitionError on malformed syntax or declare forms.
DefunParts parse_defun(const Value& form);

enum class LoopPath { Logical, Native };
enum class StobjSemantics { CopyOnWrite, InPlace };

struct Config {
  LoopPath loop_path = LoopPath::Logical;
  StobjSemantics stobj_semantics = StobjSemantics::CopyOnWrite;
  bool guard_check = true;
  /// OF-TYPE and :GUARD checks on the native path (needs guard_check too).
  bool native_loop_checks = true;
  std::uint64_t native_cap = 10'000'000;
  bool check_ownership = true;
  std::size_t max_call_depth = 2000;
  /// Test-only: added to every integer a native DO loop returns.
  long long native_fault_for_testing = 0;

  /// do$ recursion over copy-on-write stobjs.
  static Config logical() { return Config{}; }
  /// Imperative loops over in-place stobjs.
  static Config native() {
    Config c;
    c.loop_path = LoopPath::Native;
    c.stobj_semantics = StobjSemantics::InPlace;
    return c;
  }
};

/// Observer for do$ iterations: one call per do-fn application.
struct DoTraceStep {
  std::uint64_t iteration = 0;
  Value alist;
  Value triple;
  Value measure;  // lex-fixed measure of `alist`
};

/// Top-level outcome of one form.
struct TopLevelResult {
  Value value;
  std::string text;
  bool is_event = false;
};

/// One interpreter instance: a world, a bank of live global stobjs and a
/// configuration. Not thread-safe; distinct instances are independent.
class Interpreter {
 public:
  explicit Interpreter(Config config = {});
  ~Interpreter();
  Interpreter(const Interpreter&) = delete;
  Interpreter& operator=(const Interpreter&) = delete;

  Config& config() noexcept { return config_; }
  const Config& config() const noexcept { return config_; }
  World& world() noexcept { return world_; }
  const World& world() const noexcept { return world_; }

  /// Evaluates `form` under `env` (an alist). May return a Values object.
  Value eval(const Value& form, const Value& env = {});
  /// As `eval` but splits multiple values.
  std::vector<Value> eval_values(const Value& form, const Value& env = {});

  /// Processes a top-level form: events, or a linearity-checked expression
  /// whose stobj outputs are stored back into the bank.
  TopLevelResult process(const Value& form);
  /// Reads and processes every form in `source`.
  std::vector<TopLevelResult> process_source(std::string_view source);

  /// apply$: `fn` is a function name or a `(LAMBDA formals body)` object.
  Value apply(const Value& fn, std::span<const Value> args);
  Value call(const Value& fn_name, std::span<const Value> args,
             const Value& call_form = {});

  Value apply_lambda(const LambdaObject& fn, std::span<const Value> args);

  /// Undo back through event `index`; retracts undone stobj names.
  void undo(std::uint64_t index);
  /// Removes `names` as keys from every live stobj-table (copy-on-write:
  /// every table reachable from the bank).
  void retract_stobj_tables(const std::vector<Value>& names);

  // Stobj bank.
  Value global_stobj(const Value& name) const;
  void set_global_stobj(const Value& name, Value v);
  const std::unordered_map<Value, Value, IdentityHash, IdentityEq>& bank()
      const noexcept {
    return bank_;
  }
  /// Alist of (name . logical view), sorted by name.
  Value bank_logical_view() const;
  /// Replace the bank with deep copies of `other`'s stobjs, re-represented
  /// for this interpreter's semantics.
  void sync_bank_from(const Interpreter& other);
  /// Switches semantics, re-representing every live stobj in the bank.
  void set_stobj_semantics(StobjSemantics semantics);

  std::shared_ptr<StobjInstance> create_instance(
      const std::shared_ptr<const StobjSpec>& spec);
  /// Every live in-place instance that has a table field.
  std::vector<std::shared_ptr<StobjInstance>> live_table_owners();

  /// Lines produced by printing builtins (report-completion-or-error...).
  std::vector<std::string>& output() noexcept { return output_; }
  std::vector<std::string>& warnings() noexcept { return warnings_; }

  /// Installs a do$ observer; returns the previous one.
  using DoObserver = std::function<void(const DoTraceStep&)>;
  DoObserver set_do_observer(DoObserver obs);
  const DoObserver& do_observer() const noexcept { return do_observer_; }

  std::shared_ptr<CompiledLoop> compiled_loop(const Value& form);

  // Call-depth and measure bookkeeping used by the evaluator.
  struct Frame {
    const Function* fn;
    std::optional<Value> measure;
  };
  std::vector<Frame>& frames() noexcept { return frames_; }

 private:
  TopLevelResult process_event(const Value& form);
  TopLevelResult define(const Value& form);
  TopLevelResult defstobj(const Value& form);
  void register_tree(const std::shared_ptr<StobjInstance>& inst);
  void adopt_bank(
      const std::unordered_map<Value, Value, IdentityHash, IdentityEq>& source);

  Config config_;
  World world_;
  std::unordered_map<Value, Value, IdentityHash, IdentityEq> bank_;
  std::vector<std::weak_ptr<StobjInstance>> table_owners_;
  std::vector<std::string> output_;
  std::vector<std::string> warnings_;
  DoObserver do_observer_;
  std::unordered_map<const void*, std::pair<Value, std::shared_ptr<CompiledLoop>>>
      loop_cache_;
  std::vector<Frame> frames_;
};

/// Looks up `key` by identity in an alist; NIL when absent. Total.
Value assoc_eq_safe(const Value& key, const Value& alist);
/// Equality-based lookup that tolerates non-alists. Total.
Value hons_assoc_equal(const Value& key, const Value& alist);
Value true_list_fix(const Value& v);

/// Installs the builtin function table into `world`.
void install_builtins(World& world);

/// Free variables of a term, in first-occurrence order.
std::vector<Value> free_variables(const Value& term);

}  // namespace stlisp
