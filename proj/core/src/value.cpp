#include "stlisp/value.hpp"

#include "stlisp/error.hpp"
#include "stlisp/stobj.hpp"

#include <mutex>
#include <unordered_map>

namespace stlisp {

namespace {

struct SymbolObject final : detail::Object {
  explicit SymbolObject(std::string n)
      : Object(Kind::Symbol), name(std::move(n)) {}
  const std::string name;
};

struct IntegerObject final : detail::Object {
  explicit IntegerObject(Integer n) : Object(Kind::Integer), value(std::move(n)) {}
  const Integer value;
};

struct StringObject final : detail::Object {
  explicit StringObject(std::string s)
      : Object(Kind::String), text(std::move(s)) {}
  const std::string text;
};

struct ValuesObject final : detail::Object {
  explicit ValuesObject(std::vector<Value> v)
      : Object(Kind::Values), items(std::move(v)) {}
  const std::vector<Value> items;
};

class SymbolTable {
 public:
  std::shared_ptr<detail::Object> intern(std::string_view name) {
    std::lock_guard lock(mu_);
    auto it = table_.find(std::string(name));
    if (it != table_.end()) return it->second;
    auto obj = std::make_shared<SymbolObject>(std::string(name));
    table_.emplace(std::string(name), obj);
    return obj;
  }

  static SymbolTable& instance() {
    static SymbolTable table;
    return table;
  }

 private:
  std::mutex mu_;
  std::unordered_map<std::string, std::shared_ptr<detail::Object>> table_;
};

}  // namespace

// Friend of Value so the destructor can unlink long cdr chains iteratively.
struct ConsCell final : detail::Object {
  ConsCell(Value a, Value d)
      : Object(Kind::Cons), car(std::move(a)), cdr(std::move(d)) {}

  ~ConsCell() override {
    auto next = std::move(cdr.obj_);
    while (next && next.use_count() == 1 && next->kind == Kind::Cons) {
      auto* cell = static_cast<ConsCell*>(next.get());
      auto after = std::move(cell->cdr.obj_);
      next = std::move(after);
    }
  }

  Value car;
  Value cdr;
};

namespace {

const SymbolObject& as_symbol(const detail::Object* o) {
  return *static_cast<const SymbolObject*>(o);
}

const char* kind_name(Kind k) {
  switch (k) {
    case Kind::Nil: return "nil";
    case Kind::Symbol: return "symbol";
    case Kind::Integer: return "integer";
    case Kind::String: return "string";
    case Kind::Cons: return "cons";
    case Kind::Stobj: return "stobj";
    case Kind::Values: return "multiple values";
  }
  return "?";
}

[[noreturn]] void kind_error(const char* wanted, const Value& v) {
  throw EvalError(std::string("expected ") + wanted + ", got " + kind_name(v.kind()));
}

}  // namespace

Value Value::symbol(std::string_view name) {
  if (name == "NIL") return Value{};
  return Value(SymbolTable::instance().intern(name));
}

Value Value::integer(Integer n) {
  return Value(std::make_shared<IntegerObject>(std::move(n)));
}

Value Value::integer(long long n) { return integer(Integer(n)); }

Value Value::string(std::string text) {
  return Value(std::make_shared<StringObject>(std::move(text)));
}

Value Value::cons(Value car, Value cdr) {
  return Value(std::make_shared<ConsCell>(std::move(car), std::move(cdr)));
}

Value Value::stobj(std::shared_ptr<StobjInstance> instance) {
  return Value(std::shared_ptr<detail::Object>(std::move(instance)));
}

Value Value::values(std::vector<Value> vals) {
  if (vals.size() == 1) return vals.front();
  return Value(std::make_shared<ValuesObject>(std::move(vals)));
}

Value Value::t() {
  static const Value t_value = symbol("T");
  return t_value;
}

bool Value::is_keyword() const noexcept {
  return is_symbol() && !as_symbol(obj_.get()).name.empty() &&
         as_symbol(obj_.get()).name.front() == ':';
}

bool Value::is_t() const noexcept { return eq(t()); }

const std::string& Value::symbol_name() const {
  static const std::string nil_name = "NIL";
  if (is_nil()) return nil_name;
  if (!is_symbol()) kind_error("a symbol", *this);
  return as_symbol(obj_.get()).name;
}

const Integer& Value::as_integer() const {
  if (!is_integer()) kind_error("an integer", *this);
  return static_cast<const IntegerObject*>(obj_.get())->value;
}

const std::string& Value::as_string() const {
  if (!is_string()) kind_error("a string", *this);
  return static_cast<const StringObject*>(obj_.get())->text;
}

const Value& Value::car() const {
  static const Value nil;
  if (is_nil()) return nil;
  if (!is_cons()) kind_error("a cons", *this);
  return static_cast<const ConsCell*>(obj_.get())->car;
}

const Value& Value::cdr() const {
  static const Value nil;
  if (is_nil()) return nil;
  if (!is_cons()) kind_error("a cons", *this);
  return static_cast<const ConsCell*>(obj_.get())->cdr;
}

StobjInstance& Value::stobj() const {
  if (!is_stobj()) kind_error("a stobj", *this);
  return *static_cast<StobjInstance*>(obj_.get());
}

std::shared_ptr<StobjInstance> Value::stobj_ptr() const {
  if (!is_stobj()) kind_error("a stobj", *this);
  return std::static_pointer_cast<StobjInstance>(obj_);
}

const std::vector<Value>& Value::values() const {
  if (!is_values()) kind_error("multiple values", *this);
  return static_cast<const ValuesObject*>(obj_.get())->items;
}

bool equal(const Value& a, const Value& b) {
  const Value* x = &a;
  const Value* y = &b;
  while (true) {
    if (x->eq(*y)) return true;
    if (x->kind() != y->kind()) return false;
    switch (x->kind()) {
      case Kind::Nil:
      case Kind::Symbol:
        return false;
      case Kind::Integer:
        return x->as_integer() == y->as_integer();
      case Kind::String:
        return x->as_string() == y->as_string();
      case Kind::Stobj:
        return x->stobj().spec().name.eq(y->stobj().spec().name) &&
               equal(x->stobj().logical_view(), y->stobj().logical_view());
      case Kind::Values: {
        const auto& xs = x->values();
        const auto& ys = y->values();
        if (xs.size() != ys.size()) return false;
        for (std::size_t i = 0; i < xs.size(); ++i)
          if (!equal(xs[i], ys[i])) return false;
        return true;
      }
      case Kind::Cons:
        if (!equal(x->car(), y->car())) return false;
        x = &x->cdr();
        y = &y->cdr();
        break;
    }
  }
}

Value list(std::initializer_list<Value> items) {
  return list_from(std::span<const Value>(items.begin(), items.size()));
}

Value list_from(std::span<const Value> items) {
  Value out;
  for (auto it = items.rbegin(); it != items.rend(); ++it)
    out = Value::cons(*it, std::move(out));
  return out;
}

bool is_proper_list(const Value& v) {
  const Value* p = &v;
  while (p->is_cons()) p = &p->cdr();
  return p->is_nil();
}

std::size_t length(const Value& v) {
  std::size_t n = 0;
  for (const Value* p = &v; p->is_cons(); p = &p->cdr()) ++n;
  return n;
}

std::vector<Value> to_vector(const Value& l) {
  std::vector<Value> out;
  const Value* p = &l;
  for (; p->is_cons(); p = &p->cdr()) out.push_back(p->car());
  if (!p->is_nil()) throw EvalError("expected a proper list");
  return out;
}

const Sym& Sym::get() {
  static const Sym s = [] {
    Sym r;
    r.t = Value::t();
    r.quote = sym("QUOTE");
    r.lambda = sym("LAMBDA");
    r.if_ = sym("IF");
    r.let = sym("LET");
    r.let_star = sym("LET*");
    r.mv_let = sym("MV-LET");
    r.mv = sym("MV");
    r.mv_list = sym("MV-LIST");
    r.progn = sym("PROGN");
    r.setq = sym("SETQ");
    r.mv_setq = sym("MV-SETQ");
    r.return_ = sym("RETURN");
    r.loop_finish = sym("LOOP-FINISH");
    r.declare = sym("DECLARE");
    r.xargs = sym("XARGS");
    r.stobj_let = sym("STOBJ-LET");
    r.loop = sym("LOOP$");
    r.and_ = sym("AND");
    r.or_ = sym("OR");
    r.cond = sym("COND");
    r.defun = sym("DEFUN");
    r.defstobj = sym("DEFSTOBJ");
    r.encapsulate = sym("ENCAPSULATE");
    r.defattach = sym("DEFATTACH");
    r.defthm = sym("DEFTHM");
    r.local = sym("LOCAL");
    r.include_book = sym("INCLUDE-BOOK");
    r.defwarrant = sym("DEFWARRANT");
    r.defbadge = sym("DEFBADGE");
    r.alist = sym("ALIST");
    r.assoc_eq_safe = sym("ASSOC-EQ-SAFE");
    r.cdr = sym("CDR");
    r.cons = sym("CONS");
    r.list = sym("LIST");
    r.nfix = sym("NFIX");
    r.len = sym("LEN");
    r.implies = sym("IMPLIES");
    r.kw_return = sym(":RETURN");
    r.kw_loop_finish = sym(":LOOP-FINISH");
    r.kw_values = sym(":VALUES");
    r.kw_measure = sym(":MEASURE");
    r.kw_guard = sym(":GUARD");
    r.kw_stobjs = sym(":STOBJS");
    r.kw_type = sym(":TYPE");
    r.kw_initially = sym(":INITIALLY");
    r.with = sym("WITH");
    r.do_ = sym("DO");
    r.finally = sym("FINALLY");
    r.of_type = sym("OF-TYPE");
    r.for_ = sym("FOR");
    r.in = sym("IN");
    r.sum = sym("SUM");
    r.collect = sym("COLLECT");
    r.equals = sym("=");
    r.integer = sym("INTEGER");
    r.stobj_table = sym("STOBJ-TABLE");
    r.arrow = sym("=>");
    r.star = sym("*");
    r.of_type_check = sym("LOOP$-OF-TYPE-CHECK");
    return r;
  }();
  return s;
}

}  // namespace stlisp
