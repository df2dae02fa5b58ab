#pragma once

#include "stlisp/stobj.hpp"
#include "stlisp/value.hpp"

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <unordered_map>
#include <vector>

namespace stlisp {

class Interpreter;

/// Per-output (or per-input) stobj shape: NIL for an ordinary value, else
/// the stobj name occupying that position.
using Shape = std::vector<Value>;

std::string show_shape(const Shape& s);

struct Function {
  enum class Kind { Builtin, Defun, Stobj, Constrained };
  using Invoke = std::function<Value(Interpreter&, std::span<const Value> args,
                                     const Value& call_form)>;

  Value name;
  Kind kind = Kind::Builtin;
  int arity = 0;  // -1: variadic
  Shape stobjs_in;
  Shape stobjs_out;
  Invoke invoke;

  // Defun only.
  std::vector<Value> formals;
  Value body;
  Value guard;    // NIL when absent
  Value measure;  // NIL when absent

  bool is_creator = false;       // only legal as a tbl-get default
  bool stobj_let_only = false;   // tbl-get / tbl-put

  // Stobj-generated functions: owning spec and field index (-1: none).
  std::shared_ptr<const StobjSpec> stobj;
  int field = -1;
};

struct Signature {
  Value name;
  Shape inputs;
  Shape outputs;
};

struct Constraint {
  Value name;
  Value formula;
};

enum class EventKind { Defun, Defstobj, Signature, Defattach };

struct Event {
  std::uint64_t index = 0;
  EventKind kind = EventKind::Defun;
  Value name;
  Value form;
  std::vector<Value> functions;  // function names introduced
  std::shared_ptr<const StobjSpec> stobj;
  std::vector<Signature> signatures;
  std::vector<Constraint> constraints;
  // Defattach: signature, attached function, and the attachment it
  // displaced (NIL if none).
  Value attach_signature;
  Value attach_function;
  Value previous_attachment;
};

std::string_view event_kind_name(EventKind k);

/// Ordered event log plus the tables derived from it. Event indices grow
/// strictly and are never reused, even after undo.
class World {
 public:
  World();

  const Function* find_function(const Value& name) const;
  bool is_defined(const Value& name) const;
  void add_function(std::shared_ptr<Function> fn);
  void remove_function(const Value& name);

  const StobjSpec* find_stobj(const Value& name) const;
  std::shared_ptr<const StobjSpec> stobj_spec(const Value& name) const;
  bool is_stobj(const Value& name) const { return find_stobj(name) != nullptr; }
  std::vector<Value> stobj_names() const;

  const Signature* find_signature(const Value& name) const;
  std::optional<Value> attachment(const Value& signature) const;
  std::vector<Constraint> constraints() const;

  /// Appends and applies an event; returns its index.
  std::uint64_t record(Event e);
  /// Removes events with index >= `index`, most recent first, returning them
  /// in removal order. Throws EvalError if no event has that index.
  std::vector<Event> truncate(std::uint64_t index);

  const std::vector<Event>& events() const noexcept { return events_; }
  std::uint64_t next_index() const noexcept { return next_index_; }
  std::optional<std::uint64_t> index_of(const Value& name) const;

 private:
  friend class Interpreter;
  void set_attachment(const Value& sig, const Value& fn);

  std::vector<Event> events_;
  std::uint64_t next_index_ = 1;
  std::unordered_map<Value, std::shared_ptr<Function>, IdentityHash, IdentityEq>
      functions_;
  std::unordered_map<Value, std::shared_ptr<const StobjSpec>, IdentityHash,
                     IdentityEq>
      stobjs_;
  std::unordered_map<Value, Signature, IdentityHash, IdentityEq> signatures_;
  std::unordered_map<Value, Value, IdentityHash, IdentityEq> attachments_;
};

}  // namespace stlisp
