#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <cstdint>
#include <initializer_list>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace stlisp {

using Integer = boost::multiprecision::cpp_int;

class StobjInstance;

enum class Kind : std::uint8_t {
  Nil,
  Symbol,
  Integer,
  String,
  Cons,
  Stobj,
  Values,  // multiple values, arity >= 2; never stored inside data
};

class Value;

namespace detail {

struct Object {
  explicit Object(Kind k) noexcept : kind(k) {}
  virtual ~Object() = default;
  Object(const Object&) = delete;
  Object& operator=(const Object&) = delete;

  const Kind kind;
};

}  // namespace detail

/// Handle to an object-language value. NIL is the null handle; every other
/// value is a shared, immutable object (stobj instances excepted).
class Value {
 public:
  Value() noexcept = default;

  /// Interns `name` verbatim (no case folding). "NIL" yields the NIL value.
  static Value symbol(std::string_view name);
  static Value integer(Integer n);
  static Value integer(long long n);
  static Value string(std::string text);
  static Value cons(Value car, Value cdr);
  static Value stobj(std::shared_ptr<StobjInstance> instance);
  /// Arity 1 collapses to the single value.
  static Value values(std::vector<Value> vals);
  static Value t();
  static Value boolean(bool b) { return b ? t() : Value{}; }

  Kind kind() const noexcept { return obj_ ? obj_->kind : Kind::Nil; }
  bool is_nil() const noexcept { return !obj_; }
  bool is_symbol() const noexcept { return kind() == Kind::Symbol; }
  /// NIL counts as a symbol in the object language, but not here.
  bool is_integer() const noexcept { return kind() == Kind::Integer; }
  bool is_string() const noexcept { return kind() == Kind::String; }
  bool is_cons() const noexcept { return kind() == Kind::Cons; }
  bool is_stobj() const noexcept { return kind() == Kind::Stobj; }
  bool is_values() const noexcept { return kind() == Kind::Values; }
  bool is_keyword() const noexcept;
  bool is_t() const noexcept;

  const std::string& symbol_name() const;
  const Integer& as_integer() const;
  const std::string& as_string() const;
  /// NIL for NIL; throws EvalError on other non-conses.
  const Value& car() const;
  const Value& cdr() const;
  StobjInstance& stobj() const;
  std::shared_ptr<StobjInstance> stobj_ptr() const;
  const std::vector<Value>& values() const;

  /// Pointer identity. Symbols are interned, so this is `eq` on symbols.
  bool eq(const Value& other) const noexcept { return obj_ == other.obj_; }
  const void* identity() const noexcept { return obj_.get(); }

 private:
  explicit Value(std::shared_ptr<detail::Object> obj) noexcept
      : obj_(std::move(obj)) {}

  friend struct ConsCell;
  std::shared_ptr<detail::Object> obj_;
};

/// Hash/equality on identity; intended for symbol-keyed maps.
struct IdentityHash {
  std::size_t operator()(const Value& v) const noexcept {
    return std::hash<const void*>{}(v.identity());
  }
};
struct IdentityEq {
  bool operator()(const Value& a, const Value& b) const noexcept {
    return a.eq(b);
  }
};

/// Structural equality. Stobjs compare by logical view.
bool equal(const Value& a, const Value& b);

Value list(std::initializer_list<Value> items);
Value list_from(std::span<const Value> items);
bool is_proper_list(const Value& v);
/// Length of the proper prefix (ignores a dotted tail).
std::size_t length(const Value& v);
/// Throws EvalError on an improper list.
std::vector<Value> to_vector(const Value& list);

inline Value sym(std::string_view name) { return Value::symbol(name); }
inline Value num(long long n) { return Value::integer(n); }

/// Well-known interned symbols, resolved once.
struct Sym {
  Value t, quote, lambda, if_, let, let_star, mv_let, mv, mv_list, progn,
      setq, mv_setq, return_, loop_finish, declare, xargs, stobj_let, loop,
      and_, or_, cond, defun, defstobj, encapsulate, defattach, defthm,
      local, include_book, defwarrant, defbadge, alist, assoc_eq_safe, cdr,
      cons, list, nfix, len, implies, kw_return, kw_loop_finish, kw_values,
      kw_measure, kw_guard, kw_stobjs, kw_type, kw_initially, with, do_,
      finally, of_type, for_, in, sum, collect, equals, integer, stobj_table,
      arrow, star, of_type_check;

  static const Sym& get();
};

}  // namespace stlisp
