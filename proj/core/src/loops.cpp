#include "stlisp/loops.hpp"

#include "stlisp/error.hpp"
#include "stlisp/interpreter.hpp"
#include "stlisp/sexpr.hpp"

#include <algorithm>

namespace stlisp {

namespace {

bool natp(const Value& v) { return v.is_integer() && v.as_integer() >= 0; }

bool is_variable(const Value& v) {
  return v.is_symbol() && !v.is_keyword() && !v.is_t();
}

bool contains(const std::vector<Value>& xs, const Value& v) {
  return std::any_of(xs.begin(), xs.end(), [&](const Value& x) { return x.eq(v); });
}

void add_unique(std::vector<Value>& xs, const Value& v) {
  if (!contains(xs, v)) xs.push_back(v);
}

Value quote(const Value& v) { return list({Sym::get().quote, v}); }

[[noreturn]] void bad_loop(const Value& form, const std::string& why) {
  throw DefinitionError("loop$: " + why + " in " + show(form));
}

bool is_declare(const Value& v) {
  return v.is_cons() && v.car().eq(Sym::get().declare);
}

}  // namespace

// ---------------------------------------------------------------------------
// Measures

Value lex_fix(const Value& v) {
  if (natp(v)) return list({v});
  if (!is_proper_list(v)) return list({num(0)});
  std::vector<Value> out;
  for (const Value* p = &v; p->is_cons(); p = &p->cdr())
    out.push_back(natp(p->car()) ? p->car() : num(0));
  return list_from(out);
}

bool lex_less(const Value& a, const Value& b) {
  const std::size_t la = length(a), lb = length(b);
  if (la != lb) return la < lb;
  for (const Value *p = &a, *q = &b; p->is_cons(); p = &p->cdr(), q = &q->cdr()) {
    const Integer& x = p->car().as_integer();
    const Integer& y = q->car().as_integer();
    if (x != y) return x < y;
  }
  return false;
}

// ---------------------------------------------------------------------------
// Statements

void check_expression(const Value& expr) {
  if (!expr.is_cons()) return;
  const Sym& s = Sym::get();
  const Value& h = expr.car();
  if (h.eq(s.quote) || h.eq(s.loop)) return;  // nested loops compile on their own
  for (const Value& bad : {s.progn, s.setq, s.mv_setq, s.return_, s.loop_finish})
    if (h.eq(bad))
      throw DefinitionError(show(h) + " is a statement and cannot appear inside "
                            "an expression: " + show(expr));
  for (const Value* p = &expr; p->is_cons(); p = &p->cdr()) check_expression(p->car());
}

namespace {

// Body of a let/mv-let statement after declares; several forms are a progn.
StmtPtr parse_body(const Value& rest, const Value& form) {
  std::vector<Value> forms;
  for (const Value* p = &rest; p->is_cons(); p = &p->cdr())
    if (!is_declare(p->car())) forms.push_back(p->car());
  if (forms.empty()) throw DefinitionError("empty body in " + show(form));
  if (forms.size() == 1) return parse_statement(forms.front());
  auto seq = std::make_shared<Stmt>();
  seq->kind = Stmt::Kind::Seq;
  seq->form = form;
  for (const Value& f : forms) seq->children.push_back(parse_statement(f));
  return seq;
}

std::vector<Value> setq_targets(const Value& v, const Value& form) {
  auto vars = to_vector(v);
  for (const Value& x : vars)
    if (!is_variable(x) || x.is_nil())
      throw DefinitionError("illegal assignment target " + show(x) + " in " + show(form));
  return vars;
}

}  // namespace

StmtPtr parse_statement(const Value& form) {
  const Sym& s = Sym::get();
  if (!form.is_cons())
    throw DefinitionError("expression " + show(form) +
                          " in statement position; use setq, return or loop-finish");
  auto st = std::make_shared<Stmt>();
  st->form = form;
  const Value& h = form.car();
  const std::vector<Value> items = to_vector(form);
  const std::size_t n = items.size();

  if (h.eq(s.progn)) {
    if (n < 2) throw DefinitionError("empty progn " + show(form));
    st->kind = Stmt::Kind::Seq;
    for (std::size_t i = 1; i < n; ++i) st->children.push_back(parse_statement(items[i]));
  } else if (h.eq(s.if_)) {
    if (n != 4) throw DefinitionError("statement if needs a test and two branches: " + show(form));
    st->kind = Stmt::Kind::If;
    check_expression(items[1]);
    st->test = items[1];
    st->then_branch = parse_statement(items[2]);
    st->else_branch = parse_statement(items[3]);
  } else if (h.eq(s.let) || h.eq(s.let_star)) {
    if (n < 3) throw DefinitionError("malformed let " + show(form));
    st->kind = h.eq(s.let) ? Stmt::Kind::Let : Stmt::Kind::LetStar;
    for (const Value& b : to_vector(items[1])) {
      if (!b.is_cons() || !is_variable(b.car()) || length(b) != 2)
        throw DefinitionError("malformed binding " + show(b) + " in " + show(form));
      check_expression(b.cdr().car());
      st->bindings.emplace_back(b.car(), b.cdr().car());
    }
    st->body = parse_body(form.cdr().cdr(), form);
  } else if (h.eq(s.mv_let)) {
    if (n < 4) throw DefinitionError("malformed mv-let " + show(form));
    st->kind = Stmt::Kind::MvLet;
    st->vars = setq_targets(items[1], form);
    check_expression(items[2]);
    st->expr = items[2];
    st->body = parse_body(form.cdr().cdr().cdr(), form);
  } else if (h.eq(s.setq)) {
    if (n != 3 || !is_variable(items[1]))
      throw DefinitionError("setq expects (setq var expr): " + show(form));
    st->kind = Stmt::Kind::Setq;
    st->vars = {items[1]};
    check_expression(items[2]);
    st->expr = items[2];
  } else if (h.eq(s.mv_setq)) {
    if (n != 3) throw DefinitionError("mv-setq expects (mv-setq (vars) expr): " + show(form));
    st->kind = Stmt::Kind::MvSetq;
    st->vars = setq_targets(items[1], form);
    if (st->vars.size() < 2)
      throw DefinitionError("mv-setq needs at least two variables: " + show(form));
    check_expression(items[2]);
    st->expr = items[2];
  } else if (h.eq(s.return_)) {
    if (n != 2) throw DefinitionError("return expects one argument: " + show(form));
    st->kind = Stmt::Kind::Return;
    check_expression(items[1]);
    st->expr = items[1];
  } else if (h.eq(s.loop_finish)) {
    if (n != 1) throw DefinitionError("loop-finish takes no arguments: " + show(form));
    st->kind = Stmt::Kind::LoopFinish;
  } else {
    throw DefinitionError("expression " + show(form) +
                          " in statement position; use setq, return or loop-finish");
  }
  return st;
}

namespace {

void stmt_free(const StmtPtr& s, std::vector<Value>& bound, std::vector<Value>& out);

void expr_free(const Value& e, const std::vector<Value>& bound, std::vector<Value>& out) {
  for (const Value& v : free_variables(e))
    if (!contains(bound, v)) add_unique(out, v);
}

void stmt_free(const StmtPtr& s, std::vector<Value>& bound, std::vector<Value>& out) {
  const std::size_t mark = bound.size();
  switch (s->kind) {
    case Stmt::Kind::Seq:
      for (const auto& c : s->children) stmt_free(c, bound, out);
      break;
    case Stmt::Kind::If:
      expr_free(s->test, bound, out);
      stmt_free(s->then_branch, bound, out);
      stmt_free(s->else_branch, bound, out);
      break;
    case Stmt::Kind::Let:
      for (const auto& [v, e] : s->bindings) expr_free(e, bound, out);
      for (const auto& [v, e] : s->bindings) bound.push_back(v);
      stmt_free(s->body, bound, out);
      break;
    case Stmt::Kind::LetStar:
      for (const auto& [v, e] : s->bindings) {
        expr_free(e, bound, out);
        bound.push_back(v);
      }
      stmt_free(s->body, bound, out);
      break;
    case Stmt::Kind::MvLet:
      expr_free(s->expr, bound, out);
      for (const Value& v : s->vars) bound.push_back(v);
      stmt_free(s->body, bound, out);
      break;
    case Stmt::Kind::Setq:
    case Stmt::Kind::MvSetq:
      for (const Value& v : s->vars)
        if (!contains(bound, v)) add_unique(out, v);
      expr_free(s->expr, bound, out);
      break;
    case Stmt::Kind::Return:
      expr_free(s->expr, bound, out);
      break;
    case Stmt::Kind::LoopFinish:
      break;
  }
  bound.resize(mark);
}

}  // namespace

std::vector<Value> statement_free_variables(const StmtPtr& stmt) {
  std::vector<Value> bound, out;
  stmt_free(stmt, bound, out);
  return out;
}

// ---------------------------------------------------------------------------
// Parsing loop$

std::vector<Value> LoopSpec::settables() const {
  std::vector<Value> out;
  for (const auto& w : with) out.push_back(w.var);
  for (const Value& v : values)
    if (!v.is_nil()) out.push_back(v);
  return out;
}

const WithBinding* LoopSpec::with_binding(const Value& var) const {
  for (const auto& w : with)
    if (w.var.eq(var)) return &w;
  return nullptr;
}

namespace {

bool word(const Value& v, const Value& w) {
  return v.is_symbol() && v.eq(w);
}

Value progn_of(const std::vector<Value>& forms) {
  if (forms.size() == 1) return forms.front();
  std::vector<Value> items{Sym::get().progn};
  items.insert(items.end(), forms.begin(), forms.end());
  return list_from(items);
}

}  // namespace

LoopSpec parse_loop(const Value& form, const World* world) {
  const Sym& s = Sym::get();
  if (!is_proper_list(form)) bad_loop(form, "improper form");
  auto items = to_vector(form);
  LoopSpec spec;
  spec.form = form;
  std::size_t i = 1;
  auto at = [&](std::size_t k) -> const Value& {
    if (k >= items.size()) bad_loop(form, "unexpected end");
    return items[k];
  };

  if (word(at(i), s.for_)) {
    spec.kind = LoopSpec::Kind::For;
    spec.for_var = at(i + 1);
    if (!is_variable(spec.for_var) || spec.for_var.is_nil())
      bad_loop(form, "illegal iteration variable " + show(spec.for_var));
    if (!word(at(i + 2), s.in)) bad_loop(form, "only FOR var IN list is supported");
    spec.range = at(i + 3);
    spec.accumulator = at(i + 4);
    if (!word(spec.accumulator, s.sum) && !word(spec.accumulator, s.collect))
      bad_loop(form, "only SUM and COLLECT are supported");
    spec.for_body = at(i + 5);
    if (items.size() != i + 6) bad_loop(form, "trailing forms");
    check_expression(spec.range);
    check_expression(spec.for_body);
    return spec;
  }

  spec.kind = LoopSpec::Kind::Do;
  while (i < items.size() && word(items[i], s.with)) {
    WithBinding w;
    w.var = at(i + 1);
    if (!is_variable(w.var) || w.var.is_nil())
      bad_loop(form, "illegal WITH variable " + show(w.var));
    if (spec.with_binding(w.var)) bad_loop(form, "duplicate WITH variable " + show(w.var));
    if (world && world->is_stobj(w.var))
      bad_loop(form, "WITH variable " + show(w.var) + " names a stobj");
    i += 2;
    if (i < items.size() && word(items[i], s.of_type)) {
      w.type = at(i + 1);
      if (!w.type.eq(s.integer) && !w.type.eq(s.t))
        bad_loop(form, "unsupported OF-TYPE " + show(w.type));
      i += 2;
    }
    if (i < items.size() && word(items[i], s.equals)) {
      w.init = at(i + 1);
      check_expression(w.init);
      i += 2;
    }
    spec.with.push_back(std::move(w));
  }
  if (!word(at(i), s.do_)) bad_loop(form, "expected WITH or DO");
  ++i;
  bool seen_values = false;
  while (i < items.size() && items[i].is_keyword()) {
    const Value& key = items[i];
    const Value& val = at(i + 1);
    if (key.eq(s.kw_measure)) {
      spec.measure = val;
      check_expression(val);
    } else if (key.eq(s.kw_guard)) {
      spec.guard = val;
      check_expression(val);
    } else if (key.eq(s.kw_values)) {
      if (!val.is_cons() || !is_proper_list(val))
        bad_loop(form, ":VALUES must be a non-empty list");
      spec.values = to_vector(val);
      seen_values = true;
    } else {
      bad_loop(form, "unsupported DO option " + show(key));
    }
    i += 2;
  }
  (void)seen_values;
  std::vector<Value> seen;
  for (const Value& v : spec.values) {
    if (v.is_nil()) continue;
    if (!is_variable(v)) bad_loop(form, ":VALUES entry " + show(v) + " is not a stobj");
    if (world && !world->is_stobj(v))
      bad_loop(form, ":VALUES entry " + show(v) + " is not a stobj");
    if (contains(seen, v)) bad_loop(form, "stobj " + show(v) + " repeated in :VALUES");
    if (spec.with_binding(v)) bad_loop(form, show(v) + " is both a WITH variable and a stobj");
    seen.push_back(v);
  }

  std::vector<Value> body, fin;
  for (; i < items.size() && !word(items[i], s.finally); ++i) body.push_back(items[i]);
  if (body.empty()) bad_loop(form, "empty DO body");
  spec.do_body = progn_of(body);
  if (i < items.size()) {
    spec.has_finally = true;
    for (++i; i < items.size(); ++i) fin.push_back(items[i]);
    if (fin.empty()) bad_loop(form, "empty FINALLY body");
    spec.finally_body = progn_of(fin);
  }
  return spec;
}

Value LambdaObject::to_value() const {
  return list({Sym::get().lambda, list_from(formals), body});
}

LambdaObject LambdaObject::from_value(const Value& v) {
  if (!v.is_cons() || !v.car().eq(Sym::get().lambda) || !is_proper_list(v) ||
      length(v) != 3)
    throw EvalError("malformed lambda object " + show(v));
  LambdaObject out;
  if (!is_proper_list(v.cdr().car())) throw EvalError("malformed lambda formals " + show(v));
  out.formals = to_vector(v.cdr().car());
  for (const Value& f : out.formals)
    if (!is_variable(f) || f.is_nil()) throw EvalError("malformed lambda formal in " + show(v));
  out.body = v.cdr().cdr().car();
  return out;
}

// ---------------------------------------------------------------------------
// Measure guessing

namespace {

enum class Update { CountDown, Cdr, Other };

Update classify(const Value& var, const Value& e) {
  const Sym& s = Sym::get();
  static const Value one_minus = sym("1-");
  static const Value minus = sym("-");
  if (!e.is_cons() || !is_proper_list(e)) return Update::Other;
  auto items = to_vector(e);
  if (items.size() == 2 && items[0].eq(one_minus) && items[1].eq(var))
    return Update::CountDown;
  if (items.size() == 3 && items[0].eq(minus) && items[1].eq(var) &&
      items[2].is_integer() && items[2].as_integer() > 0)
    return Update::CountDown;
  if (items.size() == 2 && items[0].eq(s.cdr) && items[1].eq(var)) return Update::Cdr;
  return Update::Other;
}

void collect_updates(const StmtPtr& s, const Value& var, std::vector<Update>& out) {
  switch (s->kind) {
    case Stmt::Kind::Seq:
      for (const auto& c : s->children) collect_updates(c, var, out);
      break;
    case Stmt::Kind::If:
      collect_updates(s->then_branch, var, out);
      collect_updates(s->else_branch, var, out);
      break;
    case Stmt::Kind::Let:
    case Stmt::Kind::LetStar:
    case Stmt::Kind::MvLet:
      collect_updates(s->body, var, out);
      break;
    case Stmt::Kind::Setq:
      if (s->vars.front().eq(var)) out.push_back(classify(var, s->expr));
      break;
    case Stmt::Kind::MvSetq:
      if (contains(s->vars, var)) out.push_back(Update::Other);
      break;
    case Stmt::Kind::Return:
    case Stmt::Kind::LoopFinish:
      break;
  }
}

}  // namespace

Value guess_measure(const LoopSpec& spec) {
  const Sym& s = Sym::get();
  StmtPtr body = parse_statement(spec.do_body);
  std::vector<Value> candidates;
  for (const auto& w : spec.with) {
    std::vector<Update> ups;
    collect_updates(body, w.var, ups);
    if (ups.empty()) continue;
    const Update first = ups.front();
    if (first == Update::Other) continue;
    if (std::all_of(ups.begin(), ups.end(), [&](Update u) { return u == first; }))
      candidates.push_back(list({first == Update::CountDown ? s.nfix : s.len, w.var}));
  }
  if (candidates.size() != 1)
    throw DefinitionError("loop$: cannot guess a measure for " + show(spec.form) +
                          "; please supply :MEASURE");
  return candidates.front();
}

// ---------------------------------------------------------------------------
// Translation to an alist-transforming lambda

namespace {

struct Translator {
  const std::vector<Value>& settables;
  const std::vector<Value>& alist_vars;
  const LoopSpec& spec;
  bool is_finally;

  Value leaf_alist() const {
    const Sym& s = Sym::get();
    std::vector<Value> items{s.list};
    for (const Value& v : alist_vars) items.push_back(list({s.cons, quote(v), v}));
    return list_from(items);
  }

  Value triple(const Value& tag, const Value& val) const {
    return list({Sym::get().list, tag, val, leaf_alist()});
  }

  Value checked(const Value& var, const Value& e) const {
    const WithBinding* w = spec.with_binding(var);
    if (!w || !w->type.eq(Sym::get().integer)) return e;
    return list({Sym::get().of_type_check, quote(var), quote(w->type), e});
  }

  void check_local(const Value& v, const std::vector<StmtPtr>& rest,
                   const Value& form) const {
    if (contains(settables, v))
      throw DefinitionError("loop$: let in a DO body may not rebind " + show(v) +
                            ": " + show(form));
    for (const auto& r : rest)
      if (contains(statement_free_variables(r), v))
        throw DefinitionError("loop$: local " + show(v) + " of " + show(form) +
                              " is used by later statements");
  }

  void check_settable(const Value& v, const Value& form) const {
    if (!contains(settables, v))
      throw DefinitionError("loop$: " + show(v) +
                            " is neither a WITH variable nor a :VALUES stobj: " +
                            show(form));
  }

  Value seq(std::vector<StmtPtr> stmts) const {
    if (stmts.empty()) return triple(Value{}, Value{});
    StmtPtr head = stmts.front();
    stmts.erase(stmts.begin());
    return stmt(head, std::move(stmts));
  }

  static std::vector<StmtPtr> prepend(const StmtPtr& s, const std::vector<StmtPtr>& rest) {
    std::vector<StmtPtr> out{s};
    out.insert(out.end(), rest.begin(), rest.end());
    return out;
  }

  Value stmt(const StmtPtr& s, std::vector<StmtPtr> rest) const {
    const Sym& sy = Sym::get();
    switch (s->kind) {
      case Stmt::Kind::Seq: {
        std::vector<StmtPtr> all = s->children;
        all.insert(all.end(), rest.begin(), rest.end());
        return seq(std::move(all));
      }
      case Stmt::Kind::If:
        return list({sy.if_, s->test, seq(prepend(s->then_branch, rest)),
                     seq(prepend(s->else_branch, rest))});
      case Stmt::Kind::Let:
      case Stmt::Kind::LetStar: {
        std::vector<Value> bs;
        for (const auto& [v, e] : s->bindings) {
          check_local(v, rest, s->form);
          bs.push_back(list({v, e}));
        }
        return list({s->kind == Stmt::Kind::Let ? sy.let : sy.let_star, list_from(bs),
                     seq(prepend(s->body, rest))});
      }
      case Stmt::Kind::MvLet:
        for (const Value& v : s->vars) check_local(v, rest, s->form);
        return list({sy.mv_let, list_from(s->vars), s->expr, seq(prepend(s->body, rest))});
      case Stmt::Kind::Setq: {
        const Value& v = s->vars.front();
        check_settable(v, s->form);
        return list({sy.let, list({list({v, checked(v, s->expr)})}), seq(std::move(rest))});
      }
      case Stmt::Kind::MvSetq: {
        std::vector<Value> checks;
        for (const Value& v : s->vars) {
          check_settable(v, s->form);
          Value c = checked(v, v);
          if (!c.eq(v)) checks.push_back(list({v, c}));
        }
        Value inner = seq(std::move(rest));
        if (!checks.empty()) inner = list({sy.let, list_from(checks), inner});
        return list({sy.mv_let, list_from(s->vars), s->expr, inner});
      }
      case Stmt::Kind::Return: {
        Value e = s->expr;
        if (spec.values.size() > 1)
          e = list({sy.mv_list, num(static_cast<long long>(spec.values.size())), e});
        return triple(sy.kw_return, e);
      }
      case Stmt::Kind::LoopFinish:
        if (is_finally) return triple(Value{}, Value{});
        return triple(sy.kw_loop_finish, Value{});
    }
    return {};
  }
};

Value alist_lambda_body(const std::vector<Value>& alist_vars, const Value& body) {
  const Sym& s = Sym::get();
  if (alist_vars.empty()) return body;
  std::vector<Value> bs;
  for (const Value& v : alist_vars)
    bs.push_back(list({v, list({s.cdr, list({s.assoc_eq_safe, quote(v), s.alist})})}));
  return list({s.let, list_from(bs), body});
}

LambdaObject alist_lambda(const std::vector<Value>& alist_vars, const Value& body) {
  return LambdaObject{{Sym::get().alist}, alist_lambda_body(alist_vars, body)};
}

// True when some path through `stmts` reaches the end without leaving.
bool falls_through(std::vector<StmtPtr> stmts, bool finish_leaves) {
  if (stmts.empty()) return true;
  StmtPtr s = stmts.front();
  stmts.erase(stmts.begin());
  switch (s->kind) {
    case Stmt::Kind::Seq: {
      std::vector<StmtPtr> all = s->children;
      all.insert(all.end(), stmts.begin(), stmts.end());
      return falls_through(std::move(all), finish_leaves);
    }
    case Stmt::Kind::If: {
      auto a = stmts, b = stmts;
      a.insert(a.begin(), s->then_branch);
      b.insert(b.begin(), s->else_branch);
      return falls_through(std::move(a), finish_leaves) ||
             falls_through(std::move(b), finish_leaves);
    }
    case Stmt::Kind::Let:
    case Stmt::Kind::LetStar:
    case Stmt::Kind::MvLet:
      stmts.insert(stmts.begin(), s->body);
      return falls_through(std::move(stmts), finish_leaves);
    case Stmt::Kind::Setq:
    case Stmt::Kind::MvSetq:
      return falls_through(std::move(stmts), finish_leaves);
    case Stmt::Kind::Return:
      return false;
    case Stmt::Kind::LoopFinish:
      return !finish_leaves;
  }
  return true;
}

bool has_loop_finish(const StmtPtr& s) {
  switch (s->kind) {
    case Stmt::Kind::Seq:
      return std::any_of(s->children.begin(), s->children.end(), has_loop_finish);
    case Stmt::Kind::If:
      return has_loop_finish(s->then_branch) || has_loop_finish(s->else_branch);
    case Stmt::Kind::Let:
    case Stmt::Kind::LetStar:
    case Stmt::Kind::MvLet:
      return has_loop_finish(s->body);
    case Stmt::Kind::LoopFinish:
      return true;
    default:
      return false;
  }
}

}  // namespace

LambdaObject translate_do_body(const Value& body, const std::vector<Value>& settables,
                               const std::vector<Value>& alist_vars,
                               const LoopSpec& spec, bool is_finally) {
  Translator tr{settables, alist_vars, spec, is_finally};
  return alist_lambda(alist_vars, tr.seq({parse_statement(body)}));
}

std::shared_ptr<CompiledLoop> compile_loop(const World& world, const Value& form) {
  auto out = std::make_shared<CompiledLoop>();
  out->spec = parse_loop(form, &world);
  const LoopSpec& spec = out->spec;

  if (spec.kind == LoopSpec::Kind::For) {
    out->for_free = free_variables(spec.for_body);
    std::erase_if(out->for_free, [&](const Value& v) { return v.eq(spec.for_var); });
    std::vector<Value> formals{spec.for_var};
    formals.insert(formals.end(), out->for_free.begin(), out->for_free.end());
    out->for_fn = LambdaObject{formals, spec.for_body};
    return out;
  }

  out->settables = spec.settables();
  out->body = parse_statement(spec.do_body);
  if (spec.has_finally) out->finally_body = parse_statement(spec.finally_body);

  if (spec.measure.is_nil()) {
    out->measure_expr = guess_measure(spec);
    out->measure_guessed = true;
  } else {
    out->measure_expr = spec.measure;
  }

  out->alist_vars = out->settables;
  auto add_free = [&](const std::vector<Value>& vs) {
    for (const Value& v : vs) add_unique(out->alist_vars, v);
  };
  add_free(statement_free_variables(out->body));
  if (out->finally_body) add_free(statement_free_variables(out->finally_body));
  add_free(free_variables(out->measure_expr));
  if (!spec.guard.is_nil()) add_free(free_variables(spec.guard));

  const bool stobj_result =
      std::any_of(spec.values.begin(), spec.values.end(), [](const Value& v) { return !v.is_nil(); });
  if (stobj_result) {
    if (has_loop_finish(out->body) && !out->finally_body)
      bad_loop(form, "loop-finish without FINALLY cannot return the :VALUES stobjs");
    if (out->finally_body && falls_through({out->finally_body}, false))
      bad_loop(form, "FINALLY must return the :VALUES stobjs on every path");
  }

  out->do_fn = translate_do_body(spec.do_body, out->settables, out->alist_vars, spec, false);
  if (spec.has_finally)
    out->finally_fn =
        translate_do_body(spec.finally_body, out->settables, out->alist_vars, spec, true);
  out->measure_fn = alist_lambda(out->alist_vars, out->measure_expr);
  if (!spec.guard.is_nil()) out->guard_fn = alist_lambda(out->alist_vars, spec.guard);
  return out;
}

// ---------------------------------------------------------------------------
// Execution

Value make_alist(const std::vector<Value>& vars, const std::vector<Value>& vals) {
  Value out;
  for (std::size_t i = vars.size(); i-- > 0;)
    out = Value::cons(Value::cons(vars[i], vals[i]), out);
  return out;
}

namespace {

[[noreturn]] void of_type_fail(const Value& var, const Value& val, const Value& form,
                               std::optional<std::uint64_t> iteration) {
  GuardViolation::Detail d;
  d.phase = GuardViolation::Phase::Assignment;
  d.form = form;
  d.variable = var;
  d.value = val;
  d.predicate = "INTEGERP";
  d.iteration = iteration;
  throw GuardViolation(d);
}

// Adds the iteration number; drops variables that are not loop variables.
[[noreturn]] void rethrow_enriched(const GuardViolation& e, const CompiledLoop& loop,
                                   std::uint64_t iteration) {
  GuardViolation::Detail d = e.detail();
  if (d.iteration) throw e;
  d.iteration = iteration;
  if (!d.variable.is_nil() && !contains(loop.alist_vars, d.variable) &&
      d.phase == GuardViolation::Phase::Builtin)
    d.variable = Value{};
  throw GuardViolation(d);
}

void check_guard_at_start(Interpreter& I, const CompiledLoop& loop, bool ok,
                          std::uint64_t iteration) {
  if (ok) return;
  GuardViolation::Detail d;
  d.phase = GuardViolation::Phase::IterationStart;
  d.form = loop.spec.guard;
  d.iteration = iteration;
  throw GuardViolation(d);
  (void)I;
}

Value single(const Value& v, const Value& form) {
  if (v.is_values())
    throw EvalError("multiple values used where one is expected in " + show(form));
  return v;
}

}  // namespace

std::vector<Value> initial_loop_values(Interpreter& interp, const CompiledLoop& loop,
                                       const Value& env) {
  std::vector<Value> vals;
  vals.reserve(loop.alist_vars.size());
  Value inner = env;
  for (const auto& w : loop.spec.with) {
    Value v = single(interp.eval(w.init, inner), w.init);
    if (w.type.eq(Sym::get().integer) && !v.is_integer() && interp.config().guard_check)
      of_type_fail(w.var, v, loop.spec.form, std::nullopt);
    inner = Value::cons(Value::cons(w.var, v), inner);
    vals.push_back(std::move(v));
  }
  for (std::size_t i = loop.spec.with.size(); i < loop.alist_vars.size(); ++i)
    vals.push_back(interp.eval(loop.alist_vars[i], env));
  return vals;
}

Value do_loop(Interpreter& interp, const CompiledLoop& loop, Value alist,
              DoDiagnostics& diag) {
  const Sym& s = Sym::get();
  diag.form = loop.spec.form;
  const bool guards = interp.config().guard_check;
  auto measure_of = [&](const Value& a) {
    Value arg[1] = {a};
    return lex_fix(single(interp.apply_lambda(loop.measure_fn, arg), loop.measure_expr));
  };
  Value old_measure = measure_of(alist);
  for (std::uint64_t it = 1;; ++it) {
    diag.iterations = it;
    diag.measure_chain.push_back(old_measure);
    Value arg[1] = {alist};
    Value triple;
    try {
      if (loop.guard_fn && guards)
        check_guard_at_start(interp, loop, !interp.apply_lambda(*loop.guard_fn, arg).is_nil(), it);
      triple = true_list_fix(interp.apply_lambda(loop.do_fn, arg));
    } catch (const GuardViolation& e) {
      rethrow_enriched(e, loop, it);
    }
    if (length(triple) != 3)
      throw EvalError("loop$ body produced a malformed exit triple " + show(triple));
    if (const auto& obs = interp.do_observer())
      obs(DoTraceStep{it, alist, triple, old_measure});
    const Value& tag = triple.car();
    if (tag.eq(s.kw_return)) return triple.cdr().car();
    const Value& new_alist = triple.cdr().cdr().car();
    if (tag.eq(s.kw_loop_finish)) {
      if (!loop.finally_fn) return {};
      ++diag.finally_runs;
      Value farg[1] = {new_alist};
      Value ft;
      try {
        ft = true_list_fix(interp.apply_lambda(*loop.finally_fn, farg));
      } catch (const GuardViolation& e) {
        rethrow_enriched(e, loop, it);
      }
      return ft.car().eq(s.kw_return) ? ft.cdr().car() : Value{};
    }
    Value new_measure = measure_of(new_alist);
    if (!lex_less(new_measure, old_measure))
      throw MeasureError("loop$ measure " + show(loop.measure_expr) +
                         " failed to decrease at iteration " + std::to_string(it) +
                         ": old alist " + show(alist) + " measure " +
                         show(old_measure) + ", new alist " + show(new_alist) +
                         " measure " + show(new_measure) + "; do$ returns (t <error>)");
    alist = new_alist;
    old_measure = std::move(new_measure);
  }
}

namespace {

enum class Outcome { Next, Return, Finish };

struct NativeRun {
  Interpreter& I;
  const CompiledLoop& loop;
  std::vector<Value> slots;
  std::uint64_t iteration = 0;
  bool checks;
  Value result;

  Value env(const Value& locals) const {
    Value out = make_alist(loop.alist_vars, slots);
    if (locals.is_nil()) return out;
    std::vector<Value> ls;
    for (const Value* p = &locals; p->is_cons(); p = &p->cdr()) ls.push_back(p->car());
    for (auto it = ls.rbegin(); it != ls.rend(); ++it) out = Value::cons(*it, out);
    return out;
  }

  std::size_t slot_of(const Value& v) const {
    for (std::size_t i = 0; i < loop.alist_vars.size(); ++i)
      if (loop.alist_vars[i].eq(v)) return i;
    throw EvalError("loop$: no slot for " + show(v));
  }

  void assign(const Value& var, Value val, const Value& form) {
    const WithBinding* w = loop.spec.with_binding(var);
    if (checks && w && w->type.eq(Sym::get().integer) && !val.is_integer())
      of_type_fail(var, val, list({Sym::get().of_type_check, list({Sym::get().quote, var}),
                                   list({Sym::get().quote, w->type}), form}),
                   iteration);
    slots[slot_of(var)] = std::move(val);
  }

  Outcome run(const StmtPtr& s, const Value& locals) {
    const Sym& sy = Sym::get();
    switch (s->kind) {
      case Stmt::Kind::Seq:
        for (const auto& c : s->children)
          if (Outcome o = run(c, locals); o != Outcome::Next) return o;
        return Outcome::Next;
      case Stmt::Kind::If:
        return run(single(I.eval(s->test, env(locals)), s->test).is_nil() ? s->else_branch
                                                                          : s->then_branch,
                   locals);
      case Stmt::Kind::Let: {
        Value e = env(locals);
        Value inner = locals;
        for (const auto& [v, x] : s->bindings)
          inner = Value::cons(Value::cons(v, single(I.eval(x, e), x)), inner);
        return run(s->body, inner);
      }
      case Stmt::Kind::LetStar: {
        Value inner = locals;
        for (const auto& [v, x] : s->bindings)
          inner = Value::cons(Value::cons(v, single(I.eval(x, env(inner)), x)), inner);
        return run(s->body, inner);
      }
      case Stmt::Kind::MvLet: {
        Value v = I.eval(s->expr, env(locals));
        if (!v.is_values() || v.values().size() != s->vars.size())
          throw EvalError("mv-let expects " + std::to_string(s->vars.size()) +
                          " values in " + show(s->form));
        Value inner = locals;
        for (std::size_t i = 0; i < s->vars.size(); ++i)
          inner = Value::cons(Value::cons(s->vars[i], v.values()[i]), inner);
        return run(s->body, inner);
      }
      case Stmt::Kind::Setq:
        assign(s->vars.front(), single(I.eval(s->expr, env(locals)), s->expr), s->expr);
        return Outcome::Next;
      case Stmt::Kind::MvSetq: {
        Value v = I.eval(s->expr, env(locals));
        if (!v.is_values() || v.values().size() != s->vars.size())
          throw EvalError("mv-setq expects " + std::to_string(s->vars.size()) +
                          " values in " + show(s->form));
        std::vector<Value> vals = v.values();
        for (std::size_t i = 0; i < s->vars.size(); ++i) assign(s->vars[i], vals[i], s->vars[i]);
        return Outcome::Next;
      }
      case Stmt::Kind::Return: {
        Value v = I.eval(s->expr, env(locals));
        const std::size_t n = loop.spec.values.size();
        if (n > 1) {
          if (!v.is_values() || v.values().size() != n)
            throw EvalError("mv-list expected " + std::to_string(n) + " values from " +
                            show(s->expr) + ", got " + show(v));
          result = list_from(v.values());
        } else {
          result = single(v, s->expr);
        }
        return Outcome::Return;
      }
      case Stmt::Kind::LoopFinish:
        (void)sy;
        return Outcome::Finish;
    }
    return Outcome::Next;
  }
};

}  // namespace

Value native_exec(Interpreter& interp, const CompiledLoop& loop, const Value& env) {
  const Config& cfg = interp.config();
  NativeRun run{interp, loop, initial_loop_values(interp, loop, env), 0,
                cfg.guard_check && cfg.native_loop_checks, {}};
  Value out;
  for (;;) {
    ++run.iteration;
    if (run.iteration > cfg.native_cap)
      throw IterationCapError("loop$ exceeded the native iteration cap of " +
                              std::to_string(cfg.native_cap) + " in " + show(loop.spec.form));
    Outcome o;
    try {
      if (loop.guard_fn && run.checks)
        check_guard_at_start(interp, loop,
                             !interp.eval(loop.spec.guard, run.env({})).is_nil(),
                             run.iteration);
      o = run.run(loop.body, {});
      if (o == Outcome::Finish) {
        out = Value{};
        if (loop.finally_body && run.run(loop.finally_body, {}) == Outcome::Return)
          out = run.result;
        break;
      }
    } catch (const GuardViolation& e) {
      rethrow_enriched(e, loop, run.iteration);
    }
    if (o == Outcome::Return) {
      out = run.result;
      break;
    }
  }
  if (cfg.native_fault_for_testing != 0 && out.is_integer())
    out = Value::integer(out.as_integer() + cfg.native_fault_for_testing);
  return out;
}

Value for_loop(Interpreter& interp, const CompiledLoop& loop, const Value& env) {
  const LoopSpec& spec = loop.spec;
  Value range = single(interp.eval(spec.range, env), spec.range);
  if (!is_proper_list(range)) {
    if (interp.config().guard_check) {
      GuardViolation::Detail d;
      d.phase = GuardViolation::Phase::Builtin;
      d.form = spec.form;
      d.value = range;
      d.predicate = "TRUE-LISTP";
      if (is_variable(spec.range)) d.variable = spec.range;
      throw GuardViolation(d);
    }
    range = true_list_fix(range);
  }
  const bool logical = interp.config().loop_path == LoopPath::Logical;
  const bool sum = spec.accumulator.eq(Sym::get().sum);
  std::vector<Value> args;
  if (logical) {
    args.push_back({});
    for (const Value& v : loop.for_free) args.push_back(interp.eval(v, env));
  }
  Integer total = 0;
  std::vector<Value> collected;
  for (const Value* p = &range; p->is_cons(); p = &p->cdr()) {
    Value v;
    if (logical) {
      args[0] = p->car();
      v = interp.apply_lambda(loop.for_fn, args);
    } else {
      v = interp.eval(spec.for_body,
                      Value::cons(Value::cons(spec.for_var, p->car()), env));
    }
    v = single(v, spec.for_body);
    if (sum) {
      if (!v.is_integer())
        throw EvalError("loop$ SUM: non-numeric summand " + show(v) + " for " +
                        show(spec.for_var) + " = " + show(p->car()));
      total += v.as_integer();
    } else {
      collected.push_back(std::move(v));
    }
  }
  return sum ? Value::integer(std::move(total)) : list_from(collected);
}

Value eval_loop(Interpreter& interp, const Value& form, const Value& env) {
  auto loop = interp.compiled_loop(form);
  if (loop->spec.kind == LoopSpec::Kind::For) return for_loop(interp, *loop, env);
  Value r;
  if (interp.config().loop_path == LoopPath::Logical) {
    Value alist = make_alist(loop->alist_vars, initial_loop_values(interp, *loop, env));
    DoDiagnostics diag;
    r = do_loop(interp, *loop, std::move(alist), diag);
  } else {
    r = native_exec(interp, *loop, env);
  }
  const Shape& values = loop->spec.values;
  std::vector<Value> vals{r};
  if (values.size() > 1) {
    if (!is_proper_list(r) || length(r) != values.size())
      throw EvalError("loop$ must return " + std::to_string(values.size()) +
                      " values, got " + show(r) + " from " + show(form));
    vals = to_vector(r);
  }
  for (std::size_t i = 0; i < values.size(); ++i)
    if (!values[i].is_nil() &&
        (!vals[i].is_stobj() || !vals[i].stobj().spec().name.eq(values[i])))
      throw EvalError("loop$ must return the " + show(values[i]) + " stobj, got " +
                      show(vals[i]) + " from " + show(form));
  return values.size() > 1 ? Value::values(std::move(vals)) : r;
}

}  // namespace stlisp
