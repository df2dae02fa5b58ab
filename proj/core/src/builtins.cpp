#include "stlisp/error.hpp"
#include "stlisp/interpreter.hpp"
#include "stlisp/loops.hpp"
#include "stlisp/sexpr.hpp"

namespace stlisp {

namespace {

using Args = std::span<const Value>;

// Argument expression `i` of a call form, or NIL.
Value arg_form(const Value& call_form, std::size_t i) {
  if (!call_form.is_cons()) return {};
  const Value* p = &call_form.cdr();
  for (std::size_t k = 0; k < i && p->is_cons(); ++k) p = &p->cdr();
  return p->is_cons() ? p->car() : Value{};
}

[[noreturn]] void guard_fail(const Value& form, std::size_t i,
                             const char* predicate, const Value& value) {
  GuardViolation::Detail d;
  d.phase = GuardViolation::Phase::Builtin;
  d.form = form;
  d.value = value;
  d.predicate = predicate;
  Value a = arg_form(form, i);
  if (a.is_symbol() && !a.is_keyword() && !a.is_t()) d.variable = a;
  throw GuardViolation(d);
}

const Integer& zero() {
  static const Integer z = 0;
  return z;
}

// Integer argument under guard checking; 0 otherwise (the logical
// completion for non-numbers).
const Integer& int_arg(Interpreter& I, Args a, std::size_t i, const Value& form) {
  if (a[i].is_integer()) return a[i].as_integer();
  if (I.config().guard_check) guard_fail(form, i, "ACL2-NUMBERP", a[i]);
  return zero();
}

bool listp(const Value& v) { return v.is_nil() || v.is_cons(); }

const Value& list_arg(Interpreter& I, Args a, std::size_t i, const Value& form) {
  static const Value nil;
  if (listp(a[i])) return a[i];
  if (I.config().guard_check) guard_fail(form, i, "LISTP", a[i]);
  return nil;
}

void true_list_arg(Interpreter& I, Args a, std::size_t i, const Value& form) {
  if (!is_proper_list(a[i]) && I.config().guard_check)
    guard_fail(form, i, "TRUE-LISTP", a[i]);
}

bool natp(const Value& v) { return v.is_integer() && v.as_integer() >= 0; }

Value nfix(const Value& v) { return natp(v) ? v : num(0); }

void add(World& w, std::string_view name, int arity, Function::Invoke fn) {
  auto f = std::make_shared<Function>();
  f->name = sym(name);
  f->kind = Function::Kind::Builtin;
  f->arity = arity;
  if (arity >= 0) {
    f->stobjs_in.assign(static_cast<std::size_t>(arity), Value{});
  }
  f->stobjs_out = {Value{}};
  f->invoke = std::move(fn);
  w.add_function(std::move(f));
}

Value compare(Interpreter& I, Args a, const Value& form,
              bool (*op)(const Integer&, const Integer&)) {
  const Integer& x = int_arg(I, a, 0, form);
  const Integer& y = int_arg(I, a, 1, form);
  return Value::boolean(op(x, y));
}

}  // namespace

Value assoc_eq_safe(const Value& key, const Value& alist) {
  for (const Value* p = &alist; p->is_cons(); p = &p->cdr()) {
    const Value& pair = p->car();
    if (pair.is_cons() && pair.car().eq(key)) return pair;
  }
  return {};
}

Value hons_assoc_equal(const Value& key, const Value& alist) {
  for (const Value* p = &alist; p->is_cons(); p = &p->cdr()) {
    const Value& pair = p->car();
    if (pair.is_cons() && equal(pair.car(), key)) return pair;
  }
  return {};
}

Value true_list_fix(const Value& v) {
  std::vector<Value> items;
  for (const Value* p = &v; p->is_cons(); p = &p->cdr()) items.push_back(p->car());
  if (items.size() == length(v) && is_proper_list(v)) return v;
  return list_from(items);
}

void install_builtins(World& w) {
  add(w, "CAR", 1, [](Interpreter& I, Args a, const Value& f) {
    const Value& l = list_arg(I, a, 0, f);
    return l.is_cons() ? l.car() : Value{};
  });
  add(w, "CDR", 1, [](Interpreter& I, Args a, const Value& f) {
    const Value& l = list_arg(I, a, 0, f);
    return l.is_cons() ? l.cdr() : Value{};
  });
  add(w, "CADR", 1, [](Interpreter& I, Args a, const Value& f) {
    const Value& l = list_arg(I, a, 0, f);
    return l.is_cons() && l.cdr().is_cons() ? l.cdr().car() : Value{};
  });
  add(w, "CDDR", 1, [](Interpreter& I, Args a, const Value& f) {
    const Value& l = list_arg(I, a, 0, f);
    return l.is_cons() && l.cdr().is_cons() ? l.cdr().cdr() : Value{};
  });
  add(w, "CADDR", 1, [](Interpreter& I, Args a, const Value& f) {
    const Value& l = list_arg(I, a, 0, f);
    if (l.is_cons() && l.cdr().is_cons() && l.cdr().cdr().is_cons())
      return l.cdr().cdr().car();
    return Value{};
  });
  add(w, "CONS", 2, [](Interpreter&, Args a, const Value&) {
    return Value::cons(a[0], a[1]);
  });
  add(w, "LIST", -1, [](Interpreter&, Args a, const Value&) {
    return list_from(a);
  });
  add(w, "CONSP", 1, [](Interpreter&, Args a, const Value&) {
    return Value::boolean(a[0].is_cons());
  });
  add(w, "ATOM", 1, [](Interpreter&, Args a, const Value&) {
    return Value::boolean(!a[0].is_cons());
  });
  add(w, "ENDP", 1, [](Interpreter& I, Args a, const Value& f) {
    return Value::boolean(!list_arg(I, a, 0, f).is_cons());
  });
  add(w, "NULL", 1, [](Interpreter&, Args a, const Value&) {
    return Value::boolean(a[0].is_nil());
  });
  add(w, "NOT", 1, [](Interpreter&, Args a, const Value&) {
    return Value::boolean(a[0].is_nil());
  });
  add(w, "EQ", 2, [](Interpreter&, Args a, const Value&) {
    // Small integers are eq in the host Lisp; mirror that.
    if (a[0].is_integer() && a[1].is_integer())
      return Value::boolean(a[0].as_integer() == a[1].as_integer());
    return Value::boolean(a[0].eq(a[1]));
  });
  add(w, "EQUAL", 2, [](Interpreter&, Args a, const Value&) {
    return Value::boolean(equal(a[0], a[1]));
  });
  add(w, "NATP", 1, [](Interpreter&, Args a, const Value&) {
    return Value::boolean(natp(a[0]));
  });
  add(w, "INTEGERP", 1, [](Interpreter&, Args a, const Value&) {
    return Value::boolean(a[0].is_integer());
  });
  add(w, "ACL2-NUMBERP", 1, [](Interpreter&, Args a, const Value&) {
    return Value::boolean(a[0].is_integer());
  });
  add(w, "STRINGP", 1, [](Interpreter&, Args a, const Value&) {
    return Value::boolean(a[0].is_string());
  });
  add(w, "SYMBOLP", 1, [](Interpreter&, Args a, const Value&) {
    return Value::boolean(a[0].is_nil() || a[0].is_symbol());
  });
  add(w, "TRUE-LISTP", 1, [](Interpreter&, Args a, const Value&) {
    return Value::boolean(is_proper_list(a[0]));
  });
  add(w, "NFIX", 1, [](Interpreter&, Args a, const Value&) { return nfix(a[0]); });
  add(w, "ZP", 1, [](Interpreter& I, Args a, const Value& f) {
    if (!natp(a[0])) {
      if (I.config().guard_check) guard_fail(f, 0, "NATP", a[0]);
      return Value::t();
    }
    return Value::boolean(a[0].as_integer() == 0);
  });
  add(w, "ZEROP", 1, [](Interpreter& I, Args a, const Value& f) {
    return Value::boolean(int_arg(I, a, 0, f) == 0);
  });
  add(w, "+", -1, [](Interpreter& I, Args a, const Value& f) {
    Integer sum = 0;
    for (std::size_t i = 0; i < a.size(); ++i) sum += int_arg(I, a, i, f);
    return Value::integer(std::move(sum));
  });
  add(w, "*", -1, [](Interpreter& I, Args a, const Value& f) {
    Integer prod = 1;
    for (std::size_t i = 0; i < a.size(); ++i) prod *= int_arg(I, a, i, f);
    return Value::integer(std::move(prod));
  });
  add(w, "-", -1, [](Interpreter& I, Args a, const Value& f) -> Value {
    if (a.size() == 1) return Value::integer(-int_arg(I, a, 0, f));
    if (a.size() != 2)
      throw EvalError("- expects 1 or 2 arguments: " + show(f));
    return Value::integer(int_arg(I, a, 0, f) - int_arg(I, a, 1, f));
  });
  add(w, "1+", 1, [](Interpreter& I, Args a, const Value& f) {
    return Value::integer(int_arg(I, a, 0, f) + 1);
  });
  add(w, "1-", 1, [](Interpreter& I, Args a, const Value& f) {
    return Value::integer(int_arg(I, a, 0, f) - 1);
  });
  add(w, "MAX", 2, [](Interpreter& I, Args a, const Value& f) {
    const Integer& x = int_arg(I, a, 0, f);
    const Integer& y = int_arg(I, a, 1, f);
    return Value::integer(x > y ? x : y);
  });
  add(w, "MIN", 2, [](Interpreter& I, Args a, const Value& f) {
    const Integer& x = int_arg(I, a, 0, f);
    const Integer& y = int_arg(I, a, 1, f);
    return Value::integer(x < y ? x : y);
  });
  add(w, "<", 2, [](Interpreter& I, Args a, const Value& f) {
    return compare(I, a, f, [](const Integer& x, const Integer& y) { return x < y; });
  });
  add(w, ">", 2, [](Interpreter& I, Args a, const Value& f) {
    return compare(I, a, f, [](const Integer& x, const Integer& y) { return x > y; });
  });
  add(w, "<=", 2, [](Interpreter& I, Args a, const Value& f) {
    return compare(I, a, f, [](const Integer& x, const Integer& y) { return x <= y; });
  });
  add(w, ">=", 2, [](Interpreter& I, Args a, const Value& f) {
    return compare(I, a, f, [](const Integer& x, const Integer& y) { return x >= y; });
  });
  add(w, "=", 2, [](Interpreter& I, Args a, const Value& f) {
    return compare(I, a, f, [](const Integer& x, const Integer& y) { return x == y; });
  });
  add(w, "/=", 2, [](Interpreter& I, Args a, const Value& f) {
    return compare(I, a, f, [](const Integer& x, const Integer& y) { return x != y; });
  });
  add(w, "LEN", 1, [](Interpreter&, Args a, const Value&) {
    return num(static_cast<long long>(length(a[0])));
  });
  add(w, "NTH", 2, [](Interpreter& I, Args a, const Value& f) {
    Integer n = int_arg(I, a, 0, f);
    const Value* p = &a[1];
    for (; n > 0 && p->is_cons(); --n) p = &p->cdr();
    return p->is_cons() ? p->car() : Value{};
  });
  add(w, "APPEND", 2, [](Interpreter& I, Args a, const Value& f) {
    true_list_arg(I, a, 0, f);
    std::vector<Value> items;
    for (const Value* p = &a[0]; p->is_cons(); p = &p->cdr()) items.push_back(p->car());
    Value out = a[1];
    for (auto it = items.rbegin(); it != items.rend(); ++it) out = Value::cons(*it, out);
    return out;
  });
  add(w, "REVERSE", 1, [](Interpreter& I, Args a, const Value& f) {
    true_list_arg(I, a, 0, f);
    Value out;
    for (const Value* p = &a[0]; p->is_cons(); p = &p->cdr())
      out = Value::cons(p->car(), out);
    return out;
  });
  add(w, "MEMBER-EQUAL", 2, [](Interpreter& I, Args a, const Value& f) {
    true_list_arg(I, a, 1, f);
    for (const Value* p = &a[1]; p->is_cons(); p = &p->cdr())
      if (equal(p->car(), a[0])) return *p;
    return Value{};
  });
  add(w, "TRUE-LIST-FIX", 1, [](Interpreter&, Args a, const Value&) {
    return true_list_fix(a[0]);
  });
  add(w, "HONS-ASSOC-EQUAL", 2, [](Interpreter&, Args a, const Value&) {
    return hons_assoc_equal(a[0], a[1]);
  });
  add(w, "ASSOC-EQ-SAFE", 2, [](Interpreter&, Args a, const Value&) {
    return assoc_eq_safe(a[0], a[1]);
  });
  add(w, "IMPLIES", 2, [](Interpreter&, Args a, const Value&) {
    return Value::boolean(a[0].is_nil() || !a[1].is_nil());
  });
  add(w, "LEX-FIX", 1, [](Interpreter&, Args a, const Value&) {
    return lex_fix(a[0]);
  });
  add(w, "L<", 2, [](Interpreter&, Args a, const Value&) {
    return Value::boolean(lex_less(lex_fix(a[0]), lex_fix(a[1])));
  });
  add(w, "APPLY$", 2, [](Interpreter& I, Args a, const Value& f) {
    if (!is_proper_list(a[1]))
      throw EvalError("apply$ needs a proper argument list: " + show(f));
    auto args = to_vector(a[1]);
    return I.apply(a[0], args);
  });
  // OF-TYPE check emitted by the DO-body translator: (check 'var 'type val).
  add(w, "LOOP$-OF-TYPE-CHECK", 3, [](Interpreter& I, Args a, const Value& f) {
    const Value& type = a[1];
    if (I.config().guard_check && type.eq(Sym::get().integer) &&
        !a[2].is_integer()) {
      GuardViolation::Detail d;
      d.phase = GuardViolation::Phase::Assignment;
      d.form = f;
      d.variable = a[0];
      d.value = a[2];
      d.predicate = "INTEGERP";
      throw GuardViolation(d);
    }
    return a[2];
  });
}

}  // namespace stlisp
