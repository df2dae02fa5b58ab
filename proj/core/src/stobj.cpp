#include "stlisp/stobj.hpp"

#include "stlisp/error.hpp"
#include "stlisp/interpreter.hpp"
#include "stlisp/sexpr.hpp"

#include <unordered_set>

namespace stlisp {

namespace {

Value suffixed(const Value& base, std::string_view prefix,
               std::string_view suffix) {
  return sym(std::string(prefix) + base.symbol_name() + std::string(suffix));
}

[[noreturn]] void bad_defstobj(const Value& form, const std::string& why) {
  throw DefinitionError("defstobj: " + why + " in " + show(form));
}

FieldSpec parse_field(const Value& form, const Value& field) {
  const Sym& s = Sym::get();
  FieldSpec f;
  if (field.is_symbol()) {
    if (field.is_keyword())
      bad_defstobj(form, "unsupported option " + show(field));
    f.name = field;
  } else if (field.is_cons() && field.car().is_symbol() &&
             !field.car().is_keyword()) {
    f.name = field.car();
    auto opts = to_vector(field.cdr());
    if (opts.size() % 2 != 0)
      bad_defstobj(form, "odd keyword list for field " + show(f.name));
    for (std::size_t i = 0; i < opts.size(); i += 2) {
      const Value& key = opts[i];
      const Value& val = opts[i + 1];
      if (key.eq(s.kw_type)) {
        if (val.is_cons() && val.car().eq(s.stobj_table) && val.cdr().is_nil()) {
          f.kind = FieldSpec::Kind::Table;
        } else if (val.eq(s.integer)) {
          f.integer_type = true;
          if (f.initial.is_nil()) f.initial = num(0);
        } else if (val.eq(s.t)) {
          // unrestricted scalar
        } else {
          bad_defstobj(form, "unsupported field type " + show(val) +
                                 " (only scalars and (stobj-table))");
        }
      } else if (key.eq(s.kw_initially)) {
        f.initial = val;
      } else {
        bad_defstobj(form, "unsupported field option " + show(key));
      }
    }
  } else {
    bad_defstobj(form, "malformed field " + show(field));
  }
  if (f.kind == FieldSpec::Kind::Table) {
    f.get = suffixed(f.name, "", "-GET");
    f.put = suffixed(f.name, "", "-PUT");
    f.boundp = suffixed(f.name, "", "-BOUNDP");
    f.rem = suffixed(f.name, "", "-REM");
    f.count = suffixed(f.name, "", "-COUNT");
    f.clear = suffixed(f.name, "", "-CLEAR");
    f.initial = Value{};
  } else {
    if (f.integer_type && !f.initial.is_integer())
      bad_defstobj(form, "initial value of " + show(f.name) + " is not an integer");
    f.accessor = f.name;
    f.updater = suffixed(f.name, "UPDATE-", "");
  }
  f.recognizer = suffixed(f.name, "", "P");
  return f;
}

}  // namespace

std::vector<Value> StobjSpec::generated_names() const {
  std::vector<Value> out{creator, recognizer};
  for (const auto& f : fields) {
    out.push_back(f.recognizer);
    if (f.kind == FieldSpec::Kind::Table) {
      for (const Value& n : {f.get, f.put, f.boundp, f.rem, f.count, f.clear})
        out.push_back(n);
    } else {
      out.push_back(f.accessor);
      out.push_back(f.updater);
    }
  }
  return out;
}

const FieldSpec* StobjSpec::field_by_function(const Value& fn) const {
  for (const auto& f : fields) {
    for (const Value& n : {f.accessor, f.updater, f.get, f.put, f.boundp, f.rem,
                           f.count, f.clear, f.recognizer})
      if (!n.is_nil() && n.eq(fn)) return &f;
  }
  return nullptr;
}

std::shared_ptr<const StobjSpec> parse_defstobj(const Value& form) {
  auto items = to_vector(form);
  if (items.size() < 2 || !items[1].is_symbol() || items[1].is_keyword() ||
      items[1].is_nil() || items[1].is_t())
    bad_defstobj(form, "expected (defstobj name field...)");
  auto spec = std::make_shared<StobjSpec>();
  spec->name = items[1];
  spec->creator = suffixed(spec->name, "CREATE-", "");
  spec->recognizer = suffixed(spec->name, "", "P");
  if (items.size() == 2) bad_defstobj(form, "a stobj needs at least one field");
  std::unordered_set<std::string> seen;
  for (std::size_t i = 2; i < items.size(); ++i) {
    FieldSpec f = parse_field(form, items[i]);
    if (!seen.insert(f.name.symbol_name()).second)
      bad_defstobj(form, "duplicate field " + show(f.name));
    spec->fields.push_back(std::move(f));
  }
  return spec;
}

StobjInstance::StobjInstance(std::shared_ptr<const StobjSpec> spec,
                             StobjTable::Rep table_rep)
    : Object(Kind::Stobj), spec_(std::move(spec)) {
  auto make_slot = [&](const FieldSpec& f) -> Slot {
    if (f.kind == FieldSpec::Kind::Table) return StobjTable(table_rep);
    return f.initial;
  };
  if (spec_->fields.size() == 1) {
    storage_.emplace<Slot>(make_slot(spec_->fields.front()));
  } else {
    std::vector<Slot> slots;
    slots.reserve(spec_->fields.size());
    for (const auto& f : spec_->fields) slots.push_back(make_slot(f));
    storage_.emplace<std::vector<Slot>>(std::move(slots));
  }
}

StobjInstance::Slot& StobjInstance::slot(std::size_t i) {
  if (auto* single = std::get_if<Slot>(&storage_)) return *single;
  return std::get<std::vector<Slot>>(storage_).at(i);
}

const StobjInstance::Slot& StobjInstance::slot(std::size_t i) const {
  if (const auto* single = std::get_if<Slot>(&storage_)) return *single;
  return std::get<std::vector<Slot>>(storage_).at(i);
}

const Value& StobjInstance::scalar(std::size_t i) const {
  return std::get<Value>(slot(i));
}

void StobjInstance::set_scalar(std::size_t i, Value v) {
  std::get<Value>(slot(i)) = std::move(v);
}

const StobjTable& StobjInstance::table(std::size_t i) const {
  return std::get<StobjTable>(slot(i));
}

StobjTable& StobjInstance::table(std::size_t i) {
  return std::get<StobjTable>(slot(i));
}

Value StobjInstance::logical_view() const {
  std::vector<Value> fields;
  fields.reserve(field_count());
  for (std::size_t i = 0; i < field_count(); ++i) {
    const Slot& s = slot(i);
    if (const auto* v = std::get_if<Value>(&s))
      fields.push_back(*v);
    else
      fields.push_back(std::get<StobjTable>(s).logical_view());
  }
  return list_from(fields);
}

std::shared_ptr<StobjInstance> StobjInstance::clone() const {
  auto copy = std::make_shared<StobjInstance>(spec_, StobjTable::Rep::Alist);
  copy->storage_ = storage_;
  return copy;
}

std::shared_ptr<StobjInstance> StobjInstance::deep_copy(
    StobjTable::Rep rep, const SpecResolver& resolve) const {
  auto spec = resolve ? resolve(spec_->name) : spec_;
  if (!spec) spec = spec_;
  auto copy = std::make_shared<StobjInstance>(spec, rep);
  for (std::size_t i = 0; i < field_count(); ++i) {
    const Slot& s = slot(i);
    if (const auto* v = std::get_if<Value>(&s)) {
      copy->set_scalar(i, *v);
      continue;
    }
    StobjTable& dst = copy->table(i);
    // entries() is most-recent-first; replay oldest first to keep the order.
    std::vector<std::pair<Value, Value>> entries;
    std::get<StobjTable>(s).for_each_child(
        [&](const Value& k, const Value& child) { entries.emplace_back(k, child); });
    for (auto it = entries.rbegin(); it != entries.rend(); ++it) {
      auto child = Value::stobj(it->second.stobj().deep_copy(rep, resolve));
      child.stobj().set_owner(OwnerKind::Table, &dst);
      dst.put(it->first, child);
    }
  }
  return copy;
}

std::shared_ptr<StobjInstance> create_stobj(
    std::shared_ptr<const StobjSpec> spec, StobjTable::Rep table_rep) {
  return std::make_shared<StobjInstance>(std::move(spec), table_rep);
}

bool recognize(const StobjSpec& spec, const Value& x) {
  if (!is_proper_list(x) || length(x) != spec.fields.size()) return false;
  const Value* p = &x;
  for (const auto& f : spec.fields) {
    const Value& v = p->car();
    if (f.kind == FieldSpec::Kind::Table) {
      if (!is_proper_list(v)) return false;
      for (const Value* q = &v; q->is_cons(); q = &q->cdr())
        if (!q->car().is_cons()) return false;
    } else if (f.integer_type && !v.is_integer()) {
      return false;
    }
    p = &p->cdr();
  }
  return true;
}

Value logical_of(const Value& v) {
  return v.is_stobj() ? v.stobj().logical_view() : v;
}

namespace {

StobjInstance& expect_stobj(const StobjSpec& spec, const Value& v,
                            const Value& form) {
  if (!v.is_stobj() || !v.stobj().spec().name.eq(spec.name))
    throw EvalError("expected a live " + show(spec.name) + " stobj in " +
                    show(form) + ", got " + show(v));
  return v.stobj();
}

// Copy-on-write parents are replaced; in-place parents are mutated.
Value updatable(Interpreter& interp, const Value& v) {
  if (interp.config().stobj_semantics == StobjSemantics::InPlace) return v;
  return Value::stobj(v.stobj().clone());
}

void check_table_key(Interpreter& interp, const Value& key, const Value& form) {
  if (!key.is_symbol() || !interp.world().is_stobj(key))
    throw EvalError("stobj-table key " + show(key) +
                    " is not a currently defined stobj, in " + show(form));
}

std::shared_ptr<Function> stobj_fn(const Value& name, int arity, Shape in,
                                   Shape out,
                                   std::shared_ptr<const StobjSpec> spec,
                                   int field, Function::Invoke invoke) {
  auto fn = std::make_shared<Function>();
  fn->name = name;
  fn->kind = Function::Kind::Stobj;
  fn->arity = arity;
  fn->stobjs_in = std::move(in);
  fn->stobjs_out = std::move(out);
  fn->stobj = std::move(spec);
  fn->field = field;
  fn->invoke = std::move(invoke);
  return fn;
}

}  // namespace

void table_put(Interpreter& interp, StobjTable& table, const Value& key,
               const Value& child, const Value& form) {
  check_table_key(interp, key, form);
  auto spec = interp.world().stobj_spec(key);
  if (!child.is_stobj() || !child.stobj().spec().name.eq(key) ||
      !recognize(*spec, child.stobj().logical_view()))
    throw EvalError("stobj-table put: value for key " + show(key) +
                    " does not satisfy " + show(spec->recognizer) + ", in " +
                    show(form));
  StobjInstance& inst = child.stobj();
  if (interp.config().stobj_semantics == StobjSemantics::InPlace &&
      interp.config().check_ownership) {
    bool foreign_table = inst.owner() == StobjInstance::OwnerKind::Table &&
                         inst.owner_id() != &table;
    if (foreign_table || inst.owner() == StobjInstance::OwnerKind::Bank)
      throw EvalError("single-threadedness violated: " + show(key) +
                      " instance already has another owner, in " + show(form));
  }
  if (interp.config().stobj_semantics == StobjSemantics::InPlace)
    inst.set_owner(StobjInstance::OwnerKind::Table, &table);
  table.put(key, child);
}

void install_stobj_functions(Interpreter& interp,
                             const std::shared_ptr<const StobjSpec>& spec) {
  World& w = interp.world();
  const Value name = spec->name;
  const Value nil;

  auto creator = stobj_fn(spec->creator, 0, {}, {name}, spec, -1,
                          [spec](Interpreter& I, std::span<const Value>,
                                 const Value&) {
                            return Value::stobj(I.create_instance(spec));
                          });
  creator->is_creator = true;
  w.add_function(creator);

  w.add_function(stobj_fn(
      spec->recognizer, 1, {nil}, {nil}, spec, -1,
      [spec](Interpreter&, std::span<const Value> a, const Value&) {
        return Value::boolean(recognize(*spec, logical_of(a[0])));
      }));

  for (std::size_t i = 0; i < spec->fields.size(); ++i) {
    const FieldSpec& f = spec->fields[i];
    const int idx = static_cast<int>(i);
    const bool integer_type = f.integer_type;
    const bool is_table = f.kind == FieldSpec::Kind::Table;
    w.add_function(stobj_fn(
        f.recognizer, 1, {nil}, {nil}, spec, idx,
        [integer_type, is_table](Interpreter&, std::span<const Value> a,
                                 const Value&) {
          if (is_table || !integer_type) return Value::t();
          return Value::boolean(a[0].is_integer());
        }));

    if (!is_table) {
      w.add_function(stobj_fn(
          f.accessor, 1, {name}, {nil}, spec, idx,
          [spec, i](Interpreter&, std::span<const Value> a, const Value& form) {
            return expect_stobj(*spec, a[0], form).scalar(i);
          }));
      w.add_function(stobj_fn(
          f.updater, 2, {nil, name}, {name}, spec, idx,
          [spec, i, integer_type](Interpreter& I, std::span<const Value> a,
                                  const Value& form) {
            expect_stobj(*spec, a[1], form);
            if (integer_type && !a[0].is_integer() && I.config().guard_check) {
              GuardViolation::Detail d;
              d.phase = GuardViolation::Phase::Builtin;
              d.form = form;
              d.value = a[0];
              d.predicate = "INTEGERP";
              if (form.is_cons() && form.cdr().is_cons() &&
                  form.cdr().car().is_symbol())
                d.variable = form.cdr().car();
              throw GuardViolation(d);
            }
            Value out = updatable(I, a[1]);
            out.stobj().set_scalar(i, a[0]);
            return out;
          }));
      continue;
    }

    w.add_function(stobj_fn(
        f.boundp, 2, {nil, name}, {nil}, spec, idx,
        [spec, i](Interpreter&, std::span<const Value> a, const Value& form) {
          return Value::boolean(
              expect_stobj(*spec, a[1], form).table(i).boundp(a[0]));
        }));
    w.add_function(stobj_fn(
        f.count, 1, {name}, {nil}, spec, idx,
        [spec, i](Interpreter&, std::span<const Value> a, const Value& form) {
          return num(static_cast<long long>(
              expect_stobj(*spec, a[0], form).table(i).count()));
        }));
    w.add_function(stobj_fn(
        f.rem, 2, {nil, name}, {name}, spec, idx,
        [spec, i](Interpreter& I, std::span<const Value> a, const Value& form) {
          expect_stobj(*spec, a[1], form);
          Value out = updatable(I, a[1]);
          auto& table = out.stobj().table(i);
          if (auto child = table.get(a[0]); child && child->is_stobj())
            if (I.config().stobj_semantics == StobjSemantics::InPlace)
              child->stobj().set_owner(StobjInstance::OwnerKind::None, nullptr);
          table.rem(a[0]);
          return out;
        }));
    w.add_function(stobj_fn(
        f.clear, 1, {name}, {name}, spec, idx,
        [spec, i](Interpreter& I, std::span<const Value> a, const Value& form) {
          expect_stobj(*spec, a[0], form);
          Value out = updatable(I, a[0]);
          out.stobj().table(i).clear();
          return out;
        }));
    // get/put exist for stobj-let and the C++ API only.
    auto get = stobj_fn(
        f.get, 3, {nil, name, nil}, {nil}, spec, idx,
        [](Interpreter&, std::span<const Value>, const Value& form) -> Value {
          throw EvalError("table get may only appear as a stobj-let binding: " +
                          show(form));
        });
    get->stobj_let_only = true;
    w.add_function(get);
    auto put = stobj_fn(
        f.put, 3, {nil, nil, name}, {name}, spec, idx,
        [](Interpreter&, std::span<const Value>, const Value& form) -> Value {
          throw EvalError("table put happens only as a stobj-let write-back: " +
                          show(form));
        });
    put->stobj_let_only = true;
    w.add_function(put);
  }
}

StobjLetForm parse_stobj_let(const World& world, const Value& form) {
  const Sym& s = Sym::get();
  auto items = to_vector(form);
  if (items.size() != 5)
    throw DefinitionError(
        "stobj-let expects (stobj-let bindings outputs producer consumer): " +
        show(form));
  StobjLetForm out;
  out.form = form;
  out.producer = items[3];
  out.consumer = items[4];
  for (const Value& b : to_vector(items[1])) {
    auto parts = b.is_cons() ? to_vector(b) : std::vector<Value>{};
    if (parts.size() != 2 || !parts[0].is_symbol() || !parts[1].is_cons())
      throw DefinitionError("malformed stobj-let binding " + show(b));
    StobjLetForm::Binding bind;
    bind.child = parts[0];
    auto call = to_vector(parts[1]);
    const Function* fn = world.find_function(call.front());
    if (!fn || !fn->stobj || fn->field < 0 ||
        !fn->stobj->fields[fn->field].get.eq(call.front()))
      throw DefinitionError("stobj-let binding " + show(b) +
                            " must use a stobj-table get accessor");
    if (call.size() != 4)
      throw DefinitionError("table get in " + show(b) +
                            " needs (get 'name parent (create-name))");
    const Value& key_form = call[1];
    if (!key_form.is_cons() || !key_form.car().eq(s.quote) ||
        !key_form.cdr().car().eq(bind.child))
      throw DefinitionError("stobj-let child " + show(bind.child) +
                            " must be fetched under its own quoted name");
    if (!call[2].is_symbol())
      throw DefinitionError("stobj-let parent must be a variable in " + show(b));
    if (!out.parent.is_nil() && !out.parent.eq(call[2]))
      throw DefinitionError("stobj-let bindings must share one parent in " +
                            show(form));
    for (const auto& prev : out.bindings)
      if (prev.child.eq(bind.child))
        throw DefinitionError("stobj-let binds " + show(bind.child) +
                              " twice in " + show(form));
    out.parent = call[2];
    out.parent_spec = fn->stobj;
    bind.field = static_cast<std::size_t>(fn->field);
    bind.default_form = call[3];
    out.bindings.push_back(std::move(bind));
  }
  if (out.bindings.empty())
    throw DefinitionError("stobj-let needs at least one binding: " + show(form));
  out.outputs = to_vector(items[2]);
  for (const Value& o : out.outputs)
    if (!o.is_symbol() || o.is_nil())
      throw DefinitionError("malformed stobj-let output " + show(o));
  return out;
}

Value eval_stobj_let(Interpreter& interp, const Value& form, const Value& env) {
  const StobjLetForm sl = parse_stobj_let(interp.world(), form);
  Value parent = interp.eval(sl.parent, env);
  expect_stobj(*sl.parent_spec, parent, form);

  Value inner = env;
  for (const auto& b : sl.bindings) {
    check_table_key(interp, b.child, form);
    const auto& table = parent.stobj().table(b.field);
    Value child;
    if (auto hit = table.get(b.child)) {
      child = *hit;
    } else {
      const Value& d = b.default_form;
      auto creator = interp.world().stobj_spec(b.child)->creator;
      if (!d.is_cons() || !d.car().eq(creator) || !d.cdr().is_nil())
        throw EvalError("stobj-let default " + show(d) + " does not match key " +
                        show(b.child) + "; expected (" + show(creator) + ")");
      child = interp.eval(d, env);
    }
    inner = Value::cons(Value::cons(b.child, child), inner);
  }

  Value produced = interp.eval(sl.producer, inner);
  std::vector<Value> vals = produced.is_values() ? produced.values()
                                                 : std::vector<Value>{produced};
  if (vals.size() != sl.outputs.size())
    throw EvalError("stobj-let producer returned " + std::to_string(vals.size()) +
                    " values for " + std::to_string(sl.outputs.size()) +
                    " outputs in " + show(form));

  Value new_parent = parent;
  bool copied = false;
  Value outer = env;
  for (std::size_t i = 0; i < sl.outputs.size(); ++i) {
    const Value& out = sl.outputs[i];
    auto b = std::find_if(sl.bindings.begin(), sl.bindings.end(),
                          [&](const auto& bb) { return bb.child.eq(out); });
    if (b == sl.bindings.end()) {
      outer = Value::cons(Value::cons(out, vals[i]), outer);
      continue;
    }
    if (!copied) {
      new_parent = updatable(interp, parent);
      copied = true;
    }
    table_put(interp, new_parent.stobj().table(b->field), out, vals[i], form);
  }
  outer = Value::cons(Value::cons(sl.parent, new_parent), outer);
  return interp.eval(sl.consumer, outer);
}

}  // namespace stlisp
