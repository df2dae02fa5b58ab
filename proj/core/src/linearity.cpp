#include "stlisp/linearity.hpp"

#include "stlisp/error.hpp"
#include "stlisp/interpreter.hpp"
#include "stlisp/loops.hpp"
#include "stlisp/sexpr.hpp"

#include <algorithm>

namespace stlisp {

std::string LinearityReport::describe() const {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "\n";
    out += "[" + v.rule + "] " + v.message;
  }
  return out;
}

namespace {

using OptShape = std::optional<Shape>;
using Scope = std::vector<Value>;

bool contains(const std::vector<Value>& xs, const Value& v) {
  return std::any_of(xs.begin(), xs.end(), [&](const Value& x) { return x.eq(v); });
}

bool is_variable(const Value& v) {
  return v.is_symbol() && !v.is_keyword() && !v.is_t();
}

bool is_declare(const Value& v) {
  return v.is_cons() && v.car().eq(Sym::get().declare);
}

Shape ordinary(std::size_t n = 1) { return Shape(n, Value{}); }

bool same_shape(const Shape& a, const Shape& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!a[i].eq(b[i])) return false;
  return true;
}

const Value& last_body_form(const Value& rest) {
  static const Value nil;
  const Value* p = &rest;
  while (p->is_cons() && p->cdr().is_cons() && is_declare(p->car())) p = &p->cdr();
  return p->is_cons() ? p->car() : nil;
}

struct Checker {
  const World& world;
  std::vector<Violation> violations;

  // Defun being checked (NIL at top level).
  Value self;
  Shape self_in;
  OptShape self_out;

  void fail(const char* rule, const Value& form, std::string msg) {
    violations.push_back({rule, form, std::move(msg)});
  }

  bool stobj_name(const Value& v) const { return v.is_symbol() && world.is_stobj(v); }

  // A term in single-value, non-stobj position.
  void ordinary_term(const Value& t, const Scope& scope, const Value& ctx) {
    if (stobj_name(t)) {
      fail("R1", ctx, "stobj " + show(t) + " used as an ordinary value in " + show(ctx));
      return;
    }
    OptShape s = term(t, scope);
    if (!s) return;
    if (s->size() != 1) {
      fail("SYNTAX", ctx, "multiple values of " + show(t) + " used in " + show(ctx));
    } else if (!s->front().is_nil()) {
      fail("R2", ctx, "stobj " + show(s->front()) + " returned by " + show(t) +
                          " must be rebound to " + show(s->front()) +
                          " or returned, in " + show(ctx));
    }
  }

  // Checks that every stobj in `rebound` appears in `result`.
  void require_returned(const std::vector<Value>& rebound, const OptShape& result,
                        const Value& form) {
    if (!result) return;
    for (const Value& st : rebound)
      if (!contains(*result, st))
        fail("R2", form, "stobj " + show(st) + " is updated in " + show(form) +
                             " but not returned");
  }

  // Binds `var` to a value of shape `s` (one position). Returns true when a
  // stobj is being rebound.
  bool bind_position(const Value& var, const Value& s, bool unknown, const Value& form) {
    if (unknown) return stobj_name(var);
    if (!s.is_nil()) {
      if (!var.eq(s)) {
        fail("R3", form, "stobj " + show(s) + " may not be bound to another name (" +
                             show(var) + ") in " + show(form));
        return false;
      }
      return true;
    }
    if (stobj_name(var))
      fail("R1", form, "stobj name " + show(var) + " bound to an ordinary value in " +
                           show(form));
    return false;
  }

  OptShape call(const Value& t, const Scope& scope) {
    const Value& head = t.car();
    auto args = is_proper_list(t.cdr()) ? to_vector(t.cdr()) : std::vector<Value>{};
    Shape in;
    OptShape out;
    const Function* fn = nullptr;
    if (!self.is_nil() && head.eq(self)) {
      in = self_in;
      out = self_out;
      if (args.size() != in.size()) {
        fail("SYNTAX", t, show(head) + " expects " + std::to_string(in.size()) +
                              " arguments in " + show(t));
        return out;
      }
    } else {
      fn = world.find_function(head);
      if (!fn) {
        fail("SYNTAX", t, "undefined function " + show(head) + " in " + show(t));
        for (const Value& a : args) ordinary_term(a, scope, t);
        return ordinary();
      }
      if (fn->is_creator) {
        fail("R1", t, "creator " + show(head) +
                          " may only appear as the default of a stobj-table get: " +
                          show(t));
        return fn->stobjs_out;
      }
      if (fn->stobj_let_only) {
        fail("SYNTAX", t, show(head) + " may only be used through stobj-let: " + show(t));
        return fn->stobjs_out;
      }
      if (fn->arity >= 0 && args.size() != static_cast<std::size_t>(fn->arity)) {
        fail("SYNTAX", t, show(head) + " expects " + std::to_string(fn->arity) +
                              " arguments in " + show(t));
        return fn->stobjs_out;
      }
      in = fn->arity >= 0 ? fn->stobjs_in : ordinary(args.size());
      out = fn->stobjs_out;
    }
    std::vector<Value> seen;
    for (std::size_t i = 0; i < args.size(); ++i) {
      const Value& expected = in[i];
      const Value& a = args[i];
      if (expected.is_nil()) {
        ordinary_term(a, scope, t);
        continue;
      }
      if (!a.is_symbol()) {
        term(a, scope);
        fail("R2", t, "argument " + std::to_string(i + 1) + " of " + show(head) +
                          " must be the stobj variable " + show(expected) + ", not " +
                          show(a));
        continue;
      }
      if (!a.eq(expected)) {
        fail("R1", t, "argument " + std::to_string(i + 1) + " of " + show(head) +
                          " must be the stobj " + show(expected) + ", not " + show(a));
        continue;
      }
      if (!contains(scope, a))
        fail("R1", t, "stobj " + show(a) + " is not available in " + show(t));
      if (contains(seen, a))
        fail("R3", t, "stobj " + show(a) + " passed twice in " + show(t));
      seen.push_back(a);
    }
    return out;
  }

  OptShape term(const Value& t, const Scope& scope) {
    const Sym& s = Sym::get();
    if (t.is_symbol()) {
      if (!is_variable(t) || t.is_nil()) return ordinary();
      if (stobj_name(t)) {
        if (!contains(scope, t))
          fail("R1", t, "stobj " + show(t) + " is not available here");
        return Shape{t};
      }
      return ordinary();
    }
    if (!t.is_cons()) return ordinary();
    if (!is_proper_list(t)) {
      fail("SYNTAX", t, "improper form " + show(t));
      return ordinary();
    }
    const Value& h = t.car();
    auto items = to_vector(t);

    if (h.is_cons()) {  // lambda application
      for (std::size_t i = 1; i < items.size(); ++i) ordinary_term(items[i], scope, t);
      try {
        LambdaObject fn = LambdaObject::from_value(h);
        ordinary_term(fn.body, {}, t);
      } catch (const LispError& e) {
        fail("SYNTAX", t, e.what());
      }
      return ordinary();
    }

    if (h.eq(s.quote)) return ordinary();
    if (h.eq(s.if_)) {
      if (items.size() != 4) {
        fail("SYNTAX", t, "if expects 3 arguments: " + show(t));
        return ordinary();
      }
      ordinary_term(items[1], scope, t);
      OptShape a = term(items[2], scope);
      OptShape b = term(items[3], scope);
      if (!a) return b;
      if (!b) return a;
      if (!same_shape(*a, *b))
        fail("R4", t, "branches of " + show(t) + " return different stobjs: " +
                          show_shape(*a) + " vs " + show_shape(*b));
      return a;
    }
    if (h.eq(s.and_) || h.eq(s.or_)) {
      for (std::size_t i = 1; i < items.size(); ++i) ordinary_term(items[i], scope, t);
      return ordinary();
    }
    if (h.eq(s.cond)) {
      for (std::size_t i = 1; i < items.size(); ++i) {
        if (!items[i].is_cons() || !is_proper_list(items[i])) {
          fail("SYNTAX", t, "malformed cond clause " + show(items[i]));
          continue;
        }
        for (const Value& c : to_vector(items[i])) ordinary_term(c, scope, t);
      }
      return ordinary();
    }
    if (h.eq(s.let) || h.eq(s.let_star)) {
      if (items.size() < 3 || !is_proper_list(items[1])) {
        fail("SYNTAX", t, "malformed let " + show(t));
        return ordinary();
      }
      const bool seq = h.eq(s.let_star);
      Scope inner = scope;
      std::vector<Value> rebound;
      for (const Value& b : to_vector(items[1])) {
        if (!b.is_cons() || !is_variable(b.car()) || length(b) != 2) {
          fail("SYNTAX", t, "malformed binding " + show(b));
          continue;
        }
        const Value& var = b.car();
        OptShape bs = term(b.cdr().car(), seq ? inner : scope);
        if (bs && bs->size() != 1) {
          fail("SYNTAX", t, "multiple values bound by let in " + show(t));
          continue;
        }
        if (bind_position(var, bs ? bs->front() : Value{}, !bs, t)) {
          rebound.push_back(var);
          if (!contains(inner, var)) inner.push_back(var);
        } else if (!stobj_name(var)) {
          // ordinary binding; nothing to track
        }
      }
      OptShape body = term(last_body_form(t.cdr().cdr()), inner);
      require_returned(rebound, body, t);
      return body;
    }
    if (h.eq(s.mv_let)) {
      if (items.size() < 4 || !is_proper_list(items[1])) {
        fail("SYNTAX", t, "malformed mv-let " + show(t));
        return ordinary();
      }
      auto vars = to_vector(items[1]);
      OptShape es = term(items[2], scope);
      if (es && es->size() != vars.size()) {
        fail("SYNTAX", t, "mv-let binds " + std::to_string(vars.size()) + " variables to " +
                              std::to_string(es->size()) + " values in " + show(t));
        es.reset();
      }
      Scope inner = scope;
      std::vector<Value> rebound;
      for (std::size_t i = 0; i < vars.size(); ++i)
        if (bind_position(vars[i], es ? (*es)[i] : Value{}, !es, t)) {
          rebound.push_back(vars[i]);
          if (!contains(inner, vars[i])) inner.push_back(vars[i]);
        }
      OptShape body = term(last_body_form(t.cdr().cdr().cdr()), inner);
      require_returned(rebound, body, t);
      return body;
    }
    if (h.eq(s.mv)) {
      Shape out;
      for (std::size_t i = 1; i < items.size(); ++i) {
        OptShape a = term(items[i], scope);
        if (a && a->size() != 1) fail("SYNTAX", t, "nested multiple values in " + show(t));
        Value pos = a && a->size() == 1 ? a->front() : Value{};
        if (!pos.is_nil() && contains(out, pos))
          fail("R3", t, "stobj " + show(pos) + " returned twice in " + show(t));
        out.push_back(pos);
      }
      return out;
    }
    if (h.eq(s.mv_list)) {
      if (items.size() == 3) {
        OptShape a = term(items[2], scope);
        if (a)
          for (const Value& p : *a)
            if (!p.is_nil())
              fail("R2", t, "stobj " + show(p) + " may not be placed in a list: " + show(t));
      }
      return ordinary();
    }
    if (h.eq(s.stobj_let)) return stobj_let(t, scope);
    if (h.eq(s.loop)) return loop(t, scope);
    for (const Value& st : {s.progn, s.setq, s.mv_setq, s.return_, s.loop_finish})
      if (h.eq(st)) {
        fail("SYNTAX", t, show(h) + " is only legal in a loop$ DO or FINALLY body: " +
                              show(t));
        return ordinary();
      }
    if (h.eq(s.declare) || h.eq(s.lambda)) {
      fail("SYNTAX", t, "misplaced " + show(h) + " form: " + show(t));
      return ordinary();
    }
    return call(t, scope);
  }

  OptShape stobj_let(const Value& t, const Scope& scope) {
    StobjLetForm sl;
    try {
      sl = parse_stobj_let(world, t);
    } catch (const LispError& e) {
      fail("SYNTAX", t, e.what());
      return ordinary();
    }
    if (!contains(scope, sl.parent))
      fail("R1", t, "stobj-let parent " + show(sl.parent) + " is not an available stobj");
    Scope inner;
    for (const Value& v : scope)
      if (!v.eq(sl.parent)) inner.push_back(v);
    std::vector<Value> children;
    for (const auto& b : sl.bindings) {
      if (!stobj_name(b.child)) {
        fail("SYNTAX", t, "stobj-let child " + show(b.child) + " is not a stobj");
        continue;
      }
      const Value& d = b.default_form;
      const StobjSpec* cs = world.find_stobj(b.child);
      if (!d.is_cons() || !d.car().eq(cs->creator) || !d.cdr().is_nil())
        fail("SYNTAX", t, "stobj-let default for " + show(b.child) + " must be (" +
                              show(cs->creator) + ")");
      if (contains(scope, b.child))
        fail("R3", t, "stobj-let child " + show(b.child) + " is already bound");
      children.push_back(b.child);
      inner.push_back(b.child);
    }
    OptShape ps = term(sl.producer, inner);
    if (ps && ps->size() != sl.outputs.size()) {
      fail("SYNTAX", t, "stobj-let producer returns " + std::to_string(ps->size()) +
                            " values for " + std::to_string(sl.outputs.size()) +
                            " outputs");
      ps.reset();
    }
    Scope outer = scope;
    bool parent_updated = false;
    std::vector<Value> rebound;
    for (std::size_t i = 0; i < sl.outputs.size(); ++i) {
      const Value& o = sl.outputs[i];
      const Value pos = ps ? (*ps)[i] : Value{};
      if (contains(children, o)) {
        if (ps && !pos.eq(o))
          fail("R2", t, "stobj-let output " + show(o) + " must be the updated child");
        parent_updated = true;
        continue;
      }
      if (bind_position(o, pos, !ps, t)) {
        rebound.push_back(o);
        if (!contains(outer, o)) outer.push_back(o);
      }
    }
    // Children not listed as outputs must not have been updated; the
    // producer returns them only through the outputs list.
    if (ps)
      for (const Value& p : *ps)
        if (!p.is_nil() && contains(children, p) && !contains(sl.outputs, p))
          fail("R2", t, "updated child " + show(p) + " is not a stobj-let output");
    if (parent_updated) rebound.push_back(sl.parent);
    OptShape body = term(sl.consumer, outer);
    require_returned(rebound, body, t);
    return body;
  }

  void stmt(const StmtPtr& st, const Scope& scope, const LoopSpec& spec) {
    switch (st->kind) {
      case Stmt::Kind::Seq:
        for (const auto& c : st->children) stmt(c, scope, spec);
        return;
      case Stmt::Kind::If:
        ordinary_term(st->test, scope, st->form);
        stmt(st->then_branch, scope, spec);
        stmt(st->else_branch, scope, spec);
        return;
      case Stmt::Kind::Let:
      case Stmt::Kind::LetStar:
        for (const auto& [v, e] : st->bindings) {
          if (stobj_name(v))
            fail("R3", st->form, "DO-body let may not bind stobj " + show(v));
          ordinary_term(e, scope, st->form);
        }
        stmt(st->body, scope, spec);
        return;
      case Stmt::Kind::MvLet: {
        OptShape s = term(st->expr, scope);
        if (s)
          for (const Value& p : *s)
            if (!p.is_nil())
              fail("R3", st->form, "DO-body mv-let may not bind stobj " + show(p));
        stmt(st->body, scope, spec);
        return;
      }
      case Stmt::Kind::Setq: {
        const Value& v = st->vars.front();
        OptShape s = term(st->expr, scope);
        if (!s) return;
        Value want = stobj_name(v) ? v : Value{};
        if (s->size() != 1 || !s->front().eq(want))
          fail(want.is_nil() ? "R2" : "R3", st->form,
               "setq of " + show(v) + " needs a value of shape " + show_shape({want}) +
                   ", got " + show_shape(*s));
        return;
      }
      case Stmt::Kind::MvSetq: {
        OptShape s = term(st->expr, scope);
        if (!s) return;
        Shape want;
        for (const Value& v : st->vars) want.push_back(stobj_name(v) ? v : Value{});
        if (!same_shape(*s, want))
          fail("R3", st->form, "mv-setq expects shape " + show_shape(want) + ", got " +
                                   show_shape(*s));
        return;
      }
      case Stmt::Kind::Return: {
        OptShape s = term(st->expr, scope);
        if (s && !same_shape(*s, spec.values))
          fail("R2", st->form, "return must produce :VALUES shape " +
                                   show_shape(spec.values) + ", got " + show_shape(*s));
        return;
      }
      case Stmt::Kind::LoopFinish:
        return;
    }
  }

  OptShape loop(const Value& t, const Scope& scope) {
    LoopSpec spec;
    StmtPtr body, fin;
    try {
      spec = parse_loop(t, &world);
      if (spec.kind == LoopSpec::Kind::Do) {
        body = parse_statement(spec.do_body);
        if (spec.has_finally) fin = parse_statement(spec.finally_body);
      }
    } catch (const LispError& e) {
      fail("SYNTAX", t, e.what());
      return ordinary();
    }
    if (spec.kind == LoopSpec::Kind::For) {
      ordinary_term(spec.range, scope, t);
      if (stobj_name(spec.for_var))
        fail("R1", t, "loop variable " + show(spec.for_var) + " names a stobj");
      ordinary_term(spec.for_body, scope, t);
      return ordinary();
    }
    for (const auto& w : spec.with) ordinary_term(w.init, scope, t);
    for (const Value& v : spec.values)
      if (!v.is_nil() && !contains(scope, v))
        fail("R1", t, ":VALUES stobj " + show(v) + " is not available here");
    if (!spec.measure.is_nil()) ordinary_term(spec.measure, scope, t);
    if (!spec.guard.is_nil()) ordinary_term(spec.guard, scope, t);
    stmt(body, scope, spec);
    if (fin) stmt(fin, scope, spec);
    return spec.values;
  }
};

}  // namespace

LinearityReport check_term(const World& world, const Value& term,
                           const std::vector<Value>& stobjs_in_scope) {
  Checker c{world, {}, {}, {}, {}};
  LinearityReport r;
  r.stobjs_out = c.term(term, stobjs_in_scope);
  r.violations = std::move(c.violations);
  return r;
}

LinearityReport check_top_level(const World& world, const Value& form) {
  return check_term(world, form, world.stobj_names());
}

LinearityReport check_defun(const World& world, const Value& defun_form) {
  LinearityReport r;
  DefunParts parts;
  try {
    parts = parse_defun(defun_form);
  } catch (const LispError& e) {
    r.violations.push_back({"SYNTAX", defun_form, e.what()});
    return r;
  }
  Scope scope;
  for (const Value& f : parts.formals) {
    const bool declared = contains(parts.stobjs, f);
    if (world.is_stobj(f) && !declared)
      r.violations.push_back({"R1", defun_form,
                              "formal " + show(f) + " of " + show(parts.name) +
                                  " names a stobj but is not declared in :stobjs"});
    r.stobjs_in.push_back(declared ? f : Value{});
    if (declared) scope.push_back(f);
  }
  for (const Value& st : parts.stobjs)
    if (!contains(parts.formals, st))
      r.violations.push_back({"SYNTAX", defun_form,
                              ":stobjs entry " + show(st) + " is not a formal of " +
                                  show(parts.name)});
  if (!r.ok()) return r;

  auto run = [&](OptShape self_out) {
    Checker c{world, {}, parts.name, r.stobjs_in, std::move(self_out)};
    if (!parts.guard.is_nil()) c.ordinary_term(parts.guard, scope, parts.guard);
    if (!parts.measure.is_nil()) c.ordinary_term(parts.measure, scope, parts.measure);
    OptShape out = c.term(parts.body, scope);
    return std::make_pair(out, std::move(c.violations));
  };
  auto [first, first_violations] = run(std::nullopt);
  if (!first) {
    r.violations = std::move(first_violations);
    r.violations.push_back({"SYNTAX", defun_form,
                            "cannot determine the outputs of " + show(parts.name) +
                                ": every branch is a recursive call"});
    return r;
  }
  auto [second, violations] = run(first);
  r.violations = std::move(violations);
  r.stobjs_out = second ? second : first;
  return r;
}

}  // namespace stlisp
