#pragma once

#include "stlisp/stobj_table.hpp"
#include "stlisp/value.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace stlisp {

class Interpreter;
class World;

struct FieldSpec {
  enum class Kind { Scalar, Table };

  Value name;
  Kind kind = Kind::Scalar;
  Value initial;             // scalar initial value
  bool integer_type = false; // `:type integer`

  // Generated function names. Scalars use accessor/updater; tables use the
  // hash-table-field convention minus get?.
  Value accessor, updater, recognizer;
  Value get, put, boundp, rem, count, clear;
};

struct StobjSpec {
  Value name;
  std::vector<FieldSpec> fields;
  Value creator;
  Value recognizer;

  /// Every generated function name, in definition order.
  std::vector<Value> generated_names() const;
  const FieldSpec* field_by_function(const Value& fn) const;
};

/// Parses `(defstobj name field...)`. Throws DefinitionError.
std::shared_ptr<const StobjSpec> parse_defstobj(const Value& form);

/// A live single-threaded object. Scalar fields hold plain values; a table
/// field holds a StobjTable. A one-field stobj stores its field directly.
class StobjInstance final : public detail::Object {
 public:
  enum class OwnerKind { None, Bank, Table };

  using Slot = std::variant<Value, StobjTable>;

  StobjInstance(std::shared_ptr<const StobjSpec> spec,
                StobjTable::Rep table_rep);

  const StobjSpec& spec() const noexcept { return *spec_; }
  const std::shared_ptr<const StobjSpec>& spec_ptr() const noexcept {
    return spec_;
  }

  std::size_t field_count() const noexcept { return spec_->fields.size(); }
  const Value& scalar(std::size_t i) const;
  void set_scalar(std::size_t i, Value v);
  const StobjTable& table(std::size_t i) const;
  StobjTable& table(std::size_t i);

  /// Proper list of field values; table fields appear as alists.
  Value logical_view() const;

  /// Shallow copy sharing children; the basis of copy-on-write updates.
  std::shared_ptr<StobjInstance> clone() const;
  using SpecResolver =
      std::function<std::shared_ptr<const StobjSpec>(const Value& name)>;
  /// Recursive copy re-materialising every table with `rep`; `resolve`
  /// maps stobj names to the target world's specs.
  std::shared_ptr<StobjInstance> deep_copy(
      StobjTable::Rep rep, const SpecResolver& resolve = {}) const;

  OwnerKind owner() const noexcept { return owner_; }
  const void* owner_id() const noexcept { return owner_id_; }
  void set_owner(OwnerKind kind, const void* id) noexcept {
    owner_ = kind;
    owner_id_ = id;
  }

 private:
  Slot& slot(std::size_t i);
  const Slot& slot(std::size_t i) const;

  std::shared_ptr<const StobjSpec> spec_;
  std::variant<Slot, std::vector<Slot>> storage_;
  OwnerKind owner_ = OwnerKind::None;
  const void* owner_id_ = nullptr;
};

/// Fresh instance with initial field values.
std::shared_ptr<StobjInstance> create_stobj(
    std::shared_ptr<const StobjSpec> spec, StobjTable::Rep table_rep);

/// Recognizer over logical views: a proper list of the right arity whose
/// scalar fields meet their type and whose table fields are alists.
bool recognize(const StobjSpec& spec, const Value& x);

/// The logical view of `v` if it is a stobj; otherwise `v` itself.
Value logical_of(const Value& v);

/// Installs creator, recognizer, accessors, updaters and table operations
/// for `spec` into the interpreter's world.
void install_stobj_functions(Interpreter& interp,
                             const std::shared_ptr<const StobjSpec>& spec);

/// Parsed `(stobj-let ((child (tbl-get 'child parent (create-child)))...)
///             (outputs...) producer consumer)`.
struct StobjLetForm {
  struct Binding {
    Value child;
    std::size_t field = 0;
    Value default_form;
  };
  Value form;
  Value parent;
  std::shared_ptr<const StobjSpec> parent_spec;
  std::vector<Binding> bindings;
  std::vector<Value> outputs;
  Value producer;
  Value consumer;
};

/// Throws DefinitionError on malformed syntax.
StobjLetForm parse_stobj_let(const World& world, const Value& form);

/// tbl-put with the key's recognizer and single-owner checks enforced.
void table_put(Interpreter& interp, StobjTable& table, const Value& key,
               const Value& child, const Value& form);

/// Evaluates `(stobj-let bindings outputs producer consumer)`.
Value eval_stobj_let(Interpreter& interp, const Value& form, const Value& env);

}  // namespace stlisp
