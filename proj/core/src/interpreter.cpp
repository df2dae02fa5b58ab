#include "stlisp/interpreter.hpp"

#include "stlisp/error.hpp"
#include "stlisp/linearity.hpp"
#include "stlisp/loops.hpp"
#include "stlisp/refinement.hpp"
#include "stlisp/sexpr.hpp"

#include <algorithm>
#include <unordered_set>

namespace stlisp {

namespace {

enum class Special {
  None, Quote, If, And, Or, Cond, Let, LetStar, MvLet, Mv, MvList, StobjLet,
  Loop, Statement, Declare, Lambda
};

Special special_of(const Value& head) {
  static const auto table = [] {
    const Sym& s = Sym::get();
    std::unordered_map<Value, Special, IdentityHash, IdentityEq> m{
        {s.quote, Special::Quote},       {s.if_, Special::If},
        {s.and_, Special::And},          {s.or_, Special::Or},
        {s.cond, Special::Cond},         {s.let, Special::Let},
        {s.let_star, Special::LetStar},  {s.mv_let, Special::MvLet},
        {s.mv, Special::Mv},             {s.mv_list, Special::MvList},
        {s.stobj_let, Special::StobjLet}, {s.loop, Special::Loop},
        {s.progn, Special::Statement},   {s.setq, Special::Statement},
        {s.mv_setq, Special::Statement}, {s.return_, Special::Statement},
        {s.loop_finish, Special::Statement}, {s.declare, Special::Declare},
        {s.lambda, Special::Lambda}};
    return m;
  }();
  auto it = table.find(head);
  return it == table.end() ? Special::None : it->second;
}

bool is_variable(const Value& v) {
  return v.is_symbol() && !v.is_keyword() && !v.is_t();
}

bool is_declare(const Value& v) {
  return v.is_cons() && v.car().eq(Sym::get().declare);
}

// Body of let/mv-let after optional declare forms.
const Value& body_after_declares(const Value& rest, const Value& form) {
  const Value* p = &rest;
  while (p->is_cons() && p->cdr().is_cons() && is_declare(p->car())) p = &p->cdr();
  if (!p->is_cons() || !p->cdr().is_nil())
    throw EvalError("malformed body in " + show(form));
  return p->car();
}

Value lookup(const Value& env, const Value& var, bool& found) {
  for (const Value* p = &env; p->is_cons(); p = &p->cdr()) {
    const Value& pair = p->car();
    if (pair.car().eq(var)) {
      found = true;
      return pair.cdr();
    }
  }
  found = false;
  return {};
}

Value bind(const Value& var, Value val, Value env) {
  return Value::cons(Value::cons(var, std::move(val)), std::move(env));
}

const Value& single(const Value& v, const Value& form) {
  if (v.is_values())
    throw EvalError("multiple values used where one is expected in " + show(form));
  return v;
}

struct FrameGuard {
  std::vector<Interpreter::Frame>& frames;
  ~FrameGuard() { frames.pop_back(); }
};

Value run_defun(Interpreter& I, const Function& fn, std::span<const Value> args,
                const Value& form) {
  auto& frames = I.frames();
  if (frames.size() >= I.config().max_call_depth)
    throw EvalError("maximum call depth " +
                    std::to_string(I.config().max_call_depth) +
                    " exceeded in " + show(form));
  Value env;
  for (std::size_t i = fn.formals.size(); i-- > 0;) env = bind(fn.formals[i], args[i], env);

  if (I.config().guard_check && !fn.guard.is_nil() &&
      single(I.eval(fn.guard, env), fn.guard).is_nil()) {
    GuardViolation::Detail d;
    d.phase = GuardViolation::Phase::Call;
    d.form = form;
    d.predicate = show(fn.guard);
    throw GuardViolation(d);
  }

  std::optional<Value> measure;
  if (!fn.measure.is_nil()) {
    measure = lex_fix(single(I.eval(fn.measure, env), fn.measure));
    for (auto it = frames.rbegin(); it != frames.rend(); ++it) {
      if (it->fn != &fn) continue;
      if (it->measure && !lex_less(*measure, *it->measure))
        throw MeasureError("measure of " + show(fn.name) +
                           " did not decrease on recursive call " + show(form) +
                           ": " + show(*it->measure) + " -> " + show(*measure));
      break;
    }
  }
  frames.push_back({&fn, std::move(measure)});
  FrameGuard guard{frames};
  return I.eval(fn.body, env);
}

void collect_free(const Value& term, std::vector<Value>& bound,
                  std::vector<Value>& out);

void add_free(const Value& v, const std::vector<Value>& bound,
              std::vector<Value>& out) {
  auto has = [&](const std::vector<Value>& xs) {
    return std::any_of(xs.begin(), xs.end(), [&](const Value& x) { return x.eq(v); });
  };
  if (!has(bound) && !has(out)) out.push_back(v);
}

void collect_body(const Value& rest, std::vector<Value>& bound,
                  std::vector<Value>& out) {
  for (const Value* p = &rest; p->is_cons(); p = &p->cdr())
    if (!is_declare(p->car())) collect_free(p->car(), bound, out);
}

void collect_loop(const Value& term, std::vector<Value>& bound,
                  std::vector<Value>& out) {
  LoopSpec spec = parse_loop(term, nullptr);
  const std::size_t mark = bound.size();
  if (spec.kind == LoopSpec::Kind::For) {
    collect_free(spec.range, bound, out);
    bound.push_back(spec.for_var);
    collect_free(spec.for_body, bound, out);
  } else {
    for (const auto& w : spec.with) {
      collect_free(w.init, bound, out);
      bound.push_back(w.var);
    }
    for (const Value& v : spec.values)
      if (!v.is_nil()) add_free(v, bound, out);
    collect_free(spec.measure, bound, out);
    collect_free(spec.guard, bound, out);
    for (const Value& v : statement_free_variables(parse_statement(spec.do_body)))
      add_free(v, bound, out);
    if (spec.has_finally)
      for (const Value& v :
           statement_free_variables(parse_statement(spec.finally_body)))
        add_free(v, bound, out);
  }
  bound.resize(mark);
}

void collect_free(const Value& term, std::vector<Value>& bound,
                  std::vector<Value>& out) {
  if (is_variable(term)) {
    add_free(term, bound, out);
    return;
  }
  if (!term.is_cons()) return;
  const Value& head = term.car();
  const std::size_t mark = bound.size();
  if (head.is_cons()) {  // lambda application; the lambda itself is closed
    collect_body(term.cdr(), bound, out);
    return;
  }
  switch (special_of(head)) {
    case Special::Quote:
    case Special::Declare:
    case Special::Lambda:
      return;
    case Special::Let:
    case Special::LetStar: {
      const bool seq = special_of(head) == Special::LetStar;
      std::vector<Value> vars;
      for (const Value* b = &term.cdr().car(); b->is_cons(); b = &b->cdr()) {
        const Value& pair = b->car();
        if (!pair.is_cons()) continue;
        collect_free(pair.cdr().is_cons() ? pair.cdr().car() : Value{}, bound, out);
        if (seq) bound.push_back(pair.car());
        else vars.push_back(pair.car());
      }
      bound.insert(bound.end(), vars.begin(), vars.end());
      collect_body(term.cdr().cdr(), bound, out);
      break;
    }
    case Special::MvLet: {
      const Value& rest = term.cdr();
      collect_free(rest.cdr().car(), bound, out);
      for (const Value* v = &rest.car(); v->is_cons(); v = &v->cdr())
        bound.push_back(v->car());
      collect_body(rest.cdr().cdr(), bound, out);
      break;
    }
    case Special::StobjLet: {
      auto items = to_vector(term);
      std::vector<Value> children;
      for (const Value& b : to_vector(items.at(1))) {
        if (!b.is_cons()) continue;
        children.push_back(b.car());
        collect_free(b.cdr().car(), bound, out);
      }
      bound.insert(bound.end(), children.begin(), children.end());
      collect_free(items.at(3), bound, out);
      bound.resize(mark);
      for (const Value& o : to_vector(items.at(2))) bound.push_back(o);
      collect_free(items.at(4), bound, out);
      break;
    }
    case Special::Loop:
      collect_loop(term, bound, out);
      break;
    case Special::Statement:
      for (const Value& v : statement_free_variables(parse_statement(term)))
        add_free(v, bound, out);
      break;
    default:
      collect_body(term.cdr(), bound, out);
  }
  bound.resize(mark);
}

void check_event_name(const World& w, const Value& name, const Value& form) {
  if (!is_variable(name) || name.is_nil())
    throw DefinitionError("illegal name " + show(name) + " in " + show(form));
  if (special_of(name) != Special::None || w.is_defined(name) ||
      w.is_stobj(name) || w.find_signature(name))
    throw DefinitionError("name " + show(name) + " is already in use: " +
                          show(form));
}

void compile_nested_loops(Interpreter& I, const Value& term) {
  if (!term.is_cons()) return;
  if (term.car().eq(Sym::get().quote)) return;
  if (term.car().eq(Sym::get().loop)) I.compiled_loop(term);
  for (const Value* p = &term; p->is_cons(); p = &p->cdr())
    compile_nested_loops(I, p->car());
}

}  // namespace

std::vector<Value> free_variables(const Value& term) {
  std::vector<Value> bound, out;
  collect_free(term, bound, out);
  return out;
}

DefunParts parse_defun(const Value& form) {
  const Sym& s = Sym::get();
  auto items = to_vector(form);
  if (items.size() < 4)
    throw DefinitionError("defun expects (defun name formals body): " + show(form));
  DefunParts p;
  p.name = items[1];
  if (!is_variable(p.name) || p.name.is_nil())
    throw DefinitionError("illegal function name " + show(p.name));
  if (!is_proper_list(items[2]))
    throw DefinitionError("formals must be a list in " + show(form));
  p.formals = to_vector(items[2]);
  for (std::size_t i = 0; i < p.formals.size(); ++i) {
    if (!is_variable(p.formals[i]) || p.formals[i].is_nil())
      throw DefinitionError("illegal formal " + show(p.formals[i]) + " in " +
                            show(form));
    for (std::size_t j = 0; j < i; ++j)
      if (p.formals[j].eq(p.formals[i]))
        throw DefinitionError("duplicate formal " + show(p.formals[i]));
  }
  for (std::size_t i = 3; i + 1 < items.size(); ++i) {
    const Value& d = items[i];
    if (d.is_string()) continue;
    if (!is_declare(d))
      throw DefinitionError("defun " + show(p.name) + ": expected a declare form, got " +
                            show(d));
    for (const Value& spec : to_vector(d.cdr())) {
      if (!spec.is_cons())
        throw DefinitionError("malformed declare " + show(d));
      if (!spec.car().eq(s.xargs)) continue;  // ignore, type, ...
      auto kv = to_vector(spec.cdr());
      if (kv.size() % 2)
        throw DefinitionError("odd xargs list in " + show(d));
      for (std::size_t k = 0; k < kv.size(); k += 2) {
        const Value& key = kv[k];
        const Value& val = kv[k + 1];
        if (key.eq(s.kw_guard)) {
          p.guard = val;
        } else if (key.eq(s.kw_measure)) {
          p.measure = val;
        } else if (key.eq(s.kw_stobjs)) {
          if (val.is_symbol() && !val.is_nil())
            p.stobjs.push_back(val);
          else
            for (const Value& st : to_vector(val)) p.stobjs.push_back(st);
        } else if (key.is_keyword()) {
          p.ignored_xargs.push_back(key.symbol_name());
        } else {
          throw DefinitionError("malformed xargs in " + show(d));
        }
      }
    }
  }
  p.body = items.back();
  return p;
}

Interpreter::Interpreter(Config config) : config_(config) {}
Interpreter::~Interpreter() = default;

Value Interpreter::eval(const Value& form, const Value& env) {
  switch (form.kind()) {
    case Kind::Nil:
    case Kind::Integer:
    case Kind::String:
    case Kind::Stobj:
    case Kind::Values:
      return form;
    case Kind::Symbol: {
      if (form.is_keyword() || form.is_t()) return form;
      bool found;
      Value v = lookup(env, form, found);
      if (found) return v;
      auto it = bank_.find(form);
      if (it != bank_.end()) return it->second;
      throw EvalError("unbound variable " + show(form));
    }
    case Kind::Cons:
      break;
  }

  const Value& head = form.car();
  const Value& rest = form.cdr();

  if (head.is_cons()) {
    if (!head.car().eq(Sym::get().lambda))
      throw EvalError("illegal function position in " + show(form));
    LambdaObject fn = LambdaObject::from_value(head);
    std::vector<Value> args;
    for (const Value* p = &rest; p->is_cons(); p = &p->cdr())
      args.push_back(single(eval(p->car(), env), form));
    return apply_lambda(fn, args);
  }
  if (!head.is_symbol())
    throw EvalError("illegal function position in " + show(form));

  switch (special_of(head)) {
    case Special::None:
      break;
    case Special::Quote:
      if (!rest.is_cons() || !rest.cdr().is_nil())
        throw EvalError("malformed quote " + show(form));
      return rest.car();
    case Special::If: {
      if (length(rest) != 3 || !is_proper_list(rest))
        throw EvalError("if expects 3 arguments: " + show(form));
      const Value& test = single(eval(rest.car(), env), form);
      return eval(test.is_nil() ? rest.cdr().cdr().car() : rest.cdr().car(), env);
    }
    case Special::And: {
      Value v = Value::t();
      for (const Value* p = &rest; p->is_cons(); p = &p->cdr()) {
        v = p->cdr().is_nil() ? eval(p->car(), env)
                              : single(eval(p->car(), env), form);
        if (v.is_nil()) return v;
      }
      return v;
    }
    case Special::Or: {
      for (const Value* p = &rest; p->is_cons(); p = &p->cdr()) {
        if (p->cdr().is_nil()) return eval(p->car(), env);
        Value v = single(eval(p->car(), env), form);
        if (!v.is_nil()) return v;
      }
      return {};
    }
    case Special::Cond:
      for (const Value* p = &rest; p->is_cons(); p = &p->cdr()) {
        const Value& clause = p->car();
        if (!clause.is_cons())
          throw EvalError("malformed cond clause in " + show(form));
        Value test = single(eval(clause.car(), env), form);
        if (test.is_nil()) continue;
        if (clause.cdr().is_nil()) return test;
        Value v;
        for (const Value* q = &clause.cdr(); q->is_cons(); q = &q->cdr())
          v = eval(q->car(), env);
        return v;
      }
      return {};
    case Special::Let:
    case Special::LetStar: {
      if (!rest.is_cons()) throw EvalError("malformed let " + show(form));
      const bool seq = special_of(head) == Special::LetStar;
      Value inner = env;
      std::vector<std::pair<Value, Value>> pending;
      for (const Value* b = &rest.car(); b->is_cons(); b = &b->cdr()) {
        const Value& pair = b->car();
        if (!pair.is_cons() || !is_variable(pair.car()) || !pair.cdr().is_cons() ||
            !pair.cdr().cdr().is_nil())
          throw EvalError("malformed binding " + show(pair) + " in " + show(form));
        Value v = single(eval(pair.cdr().car(), seq ? inner : env), form);
        if (seq)
          inner = bind(pair.car(), std::move(v), inner);
        else
          pending.emplace_back(pair.car(), std::move(v));
      }
      for (auto& [var, val] : pending) inner = bind(var, std::move(val), inner);
      return eval(body_after_declares(rest.cdr(), form), inner);
    }
    case Special::MvLet: {
      if (!rest.is_cons() || !rest.cdr().is_cons())
        throw EvalError("malformed mv-let " + show(form));
      auto vars = to_vector(rest.car());
      Value v = eval(rest.cdr().car(), env);
      if (!v.is_values() || v.values().size() != vars.size())
        throw EvalError("mv-let expects " + std::to_string(vars.size()) +
                        " values in " + show(form) + ", got " + show(v));
      Value inner = env;
      for (std::size_t i = 0; i < vars.size(); ++i)
        inner = bind(vars[i], v.values()[i], inner);
      return eval(body_after_declares(rest.cdr().cdr(), form), inner);
    }
    case Special::Mv: {
      std::vector<Value> vals;
      for (const Value* p = &rest; p->is_cons(); p = &p->cdr())
        vals.push_back(single(eval(p->car(), env), form));
      if (vals.size() < 2) throw EvalError("mv needs at least 2 values: " + show(form));
      return Value::values(std::move(vals));
    }
    case Special::MvList: {
      if (length(rest) != 2 || !rest.car().is_integer())
        throw EvalError("mv-list expects (mv-list n form): " + show(form));
      Value v = eval(rest.cdr().car(), env);
      const auto n = rest.car().as_integer();
      if (!v.is_values() || Integer(v.values().size()) != n)
        throw EvalError("mv-list expected " + show(rest.car()) + " values from " +
                        show(rest.cdr().car()) + ", got " + show(v));
      return list_from(v.values());
    }
    case Special::StobjLet:
      return eval_stobj_let(*this, form, env);
    case Special::Loop:
      return eval_loop(*this, form, env);
    case Special::Statement:
      throw EvalError(show(head) + " is only legal in a loop$ DO or FINALLY body: " +
                      show(form));
    case Special::Declare:
      throw EvalError("declare is not allowed here: " + show(form));
    case Special::Lambda:
      throw EvalError("a lambda object must be quoted: " + show(form));
  }

  const Function* fn = world_.find_function(head);
  if (!fn) throw EvalError("undefined function " + show(head) + " in " + show(form));
  std::vector<Value> args;
  for (const Value* p = &rest; p->is_cons(); p = &p->cdr())
    args.push_back(single(eval(p->car(), env), form));
  if (fn->arity >= 0 && args.size() != static_cast<std::size_t>(fn->arity))
    throw EvalError(show(head) + " expects " + std::to_string(fn->arity) +
                    " arguments, got " + std::to_string(args.size()) + " in " +
                    show(form));
  return fn->invoke(*this, args, form);
}

std::vector<Value> Interpreter::eval_values(const Value& form, const Value& env) {
  Value v = eval(form, env);
  if (v.is_values()) return v.values();
  return {v};
}

Value Interpreter::call(const Value& fn_name, std::span<const Value> args,
                        const Value& call_form) {
  const Function* fn = world_.find_function(fn_name);
  if (!fn) throw EvalError("undefined function " + show(fn_name));
  if (fn->arity >= 0 && args.size() != static_cast<std::size_t>(fn->arity))
    throw EvalError(show(fn_name) + " expects " + std::to_string(fn->arity) +
                    " arguments, got " + std::to_string(args.size()));
  if (!call_form.is_nil()) return fn->invoke(*this, args, call_form);
  std::vector<Value> quoted;
  quoted.reserve(args.size());
  for (const Value& a : args) quoted.push_back(list({Sym::get().quote, a}));
  return fn->invoke(*this, args, Value::cons(fn_name, list_from(quoted)));
}

Value Interpreter::apply(const Value& fn, std::span<const Value> args) {
  if (fn.is_symbol()) {
    const Function* f = world_.find_function(fn);
    if (!f) throw EvalError("apply$: undefined function " + show(fn));
    auto stobjy = [](const Shape& s) {
      return std::any_of(s.begin(), s.end(), [](const Value& v) { return !v.is_nil(); });
    };
    if (stobjy(f->stobjs_in) || stobjy(f->stobjs_out) || f->stobj_let_only)
      throw EvalError("apply$: " + show(fn) + " takes or returns a stobj");
    return call(fn, args);
  }
  if (fn.is_cons() && fn.car().eq(Sym::get().lambda))
    return apply_lambda(LambdaObject::from_value(fn), args);
  throw EvalError("apply$: not a function object: " + show(fn));
}

Value Interpreter::apply_lambda(const LambdaObject& fn, std::span<const Value> args) {
  if (args.size() != fn.formals.size())
    throw EvalError("lambda expects " + std::to_string(fn.formals.size()) +
                    " arguments, got " + std::to_string(args.size()) + ": " +
                    show(fn.to_value()));
  Value env;
  for (std::size_t i = args.size(); i-- > 0;) env = bind(fn.formals[i], args[i], env);
  return eval(fn.body, env);
}

std::shared_ptr<CompiledLoop> Interpreter::compiled_loop(const Value& form) {
  auto it = loop_cache_.find(form.identity());
  if (it != loop_cache_.end()) return it->second.second;
  auto compiled = compile_loop(world_, form);
  loop_cache_.emplace(form.identity(), std::make_pair(form, compiled));
  return compiled;
}

Interpreter::DoObserver Interpreter::set_do_observer(DoObserver obs) {
  std::swap(obs, do_observer_);
  return obs;
}

// ---------------------------------------------------------------------------
// Top level

TopLevelResult Interpreter::process(const Value& form) {
  if (form.is_cons() && form.car().is_symbol()) {
    const Sym& s = Sym::get();
    const Value& h = form.car();
    for (const Value& ev : {s.defun, s.defstobj, s.encapsulate, s.defattach,
                            s.include_book, s.defwarrant, s.defbadge, s.defthm})
      if (h.eq(ev)) return process_event(form);
  }
  LinearityReport report = check_top_level(world_, form);
  if (!report.ok()) throw DefinitionError(report.describe());
  compile_nested_loops(*this, form);
  frames_.clear();
  Value v = eval(form);
  std::vector<Value> vals = v.is_values() ? v.values() : std::vector<Value>{v};
  if (report.stobjs_out && report.stobjs_out->size() == vals.size())
    for (std::size_t i = 0; i < vals.size(); ++i)
      if (!(*report.stobjs_out)[i].is_nil())
        set_global_stobj((*report.stobjs_out)[i], vals[i]);
  return {v, show(v), false};
}

std::vector<TopLevelResult> Interpreter::process_source(std::string_view source) {
  std::vector<TopLevelResult> out;
  for (const Value& f : read(source)) out.push_back(process(f));
  return out;
}

TopLevelResult Interpreter::process_event(const Value& form) {
  const Sym& s = Sym::get();
  const Value& h = form.car();
  if (h.eq(s.defun)) return define(form);
  if (h.eq(s.defstobj)) return defstobj(form);
  if (h.eq(s.encapsulate)) return process_encapsulate(*this, form);
  if (h.eq(s.defattach)) return process_defattach(*this, form);
  if (h.eq(s.defthm))
    throw DefinitionError("defthm is only accepted inside encapsulate: " + show(form));
  // include-book, defwarrant, defbadge: accepted and ignored.
  Value name = form.cdr().is_cons() ? form.cdr().car() : Value{};
  return {name, show(h) + " " + show(name) + " (ignored)", true};
}

TopLevelResult Interpreter::define(const Value& form) {
  DefunParts parts = parse_defun(form);
  check_event_name(world_, parts.name, form);
  for (const Value& st : parts.stobjs)
    if (!world_.is_stobj(st))
      throw DefinitionError("defun " + show(parts.name) + ": " + show(st) +
                            " is not a stobj");
  LinearityReport report = check_defun(world_, form);
  if (!report.ok()) throw DefinitionError(report.describe());
  if (!report.stobjs_out)
    throw DefinitionError("defun " + show(parts.name) +
                          ": cannot determine the output signature");
  compile_nested_loops(*this, parts.body);

  auto fn = std::make_shared<Function>();
  fn->name = parts.name;
  fn->kind = Function::Kind::Defun;
  fn->arity = static_cast<int>(parts.formals.size());
  fn->stobjs_in = report.stobjs_in;
  fn->stobjs_out = *report.stobjs_out;
  fn->formals = parts.formals;
  fn->body = parts.body;
  fn->guard = parts.guard;
  fn->measure = parts.measure;
  const Function* raw = fn.get();
  fn->invoke = [raw](Interpreter& I, std::span<const Value> a, const Value& f) {
    return run_defun(I, *raw, a, f);
  };
  world_.add_function(fn);
  for (const auto& x : parts.ignored_xargs)
    warnings_.push_back("defun " + show(parts.name) + ": ignoring xarg " + x);

  Event e;
  e.kind = EventKind::Defun;
  e.name = parts.name;
  e.form = form;
  e.functions = {parts.name};
  world_.record(std::move(e));
  return {parts.name, show(parts.name), true};
}

TopLevelResult Interpreter::defstobj(const Value& form) {
  auto spec = parse_defstobj(form);
  check_event_name(world_, spec->name, form);
  for (const Value& n : spec->generated_names()) check_event_name(world_, n, form);
  install_stobj_functions(*this, spec);
  Event e;
  e.kind = EventKind::Defstobj;
  e.name = spec->name;
  e.form = form;
  e.functions = spec->generated_names();
  e.stobj = spec;
  world_.record(std::move(e));
  set_global_stobj(spec->name, Value::stobj(create_instance(spec)));
  return {spec->name, show(spec->name), true};
}

void Interpreter::undo(std::uint64_t index) {
  auto removed = world_.truncate(index);
  std::vector<Value> names;
  for (const Event& e : removed) {
    if (e.kind != EventKind::Defstobj) continue;
    names.push_back(e.name);
    bank_.erase(e.name);
  }
  loop_cache_.clear();
  frames_.clear();
  if (!names.empty()) retract_stobj_tables(names);
}

namespace {

bool has_table(const StobjSpec& spec) {
  return std::any_of(spec.fields.begin(), spec.fields.end(), [](const FieldSpec& f) {
    return f.kind == FieldSpec::Kind::Table;
  });
}

Value retract_value(const Value& v, const std::vector<Value>& names) {
  const StobjInstance& inst = v.stobj();
  if (!has_table(inst.spec())) return v;
  auto copy = inst.clone();
  copy->set_owner(inst.owner(), inst.owner_id());
  for (std::size_t i = 0; i < inst.field_count(); ++i) {
    if (inst.spec().fields[i].kind != FieldSpec::Kind::Table) continue;
    StobjTable& t = copy->table(i);
    for (const Value& n : names) t.rem(n);
    t.transform_children(
        [&](const Value&, const Value& c) { return retract_value(c, names); });
  }
  return Value::stobj(copy);
}

}  // namespace

void Interpreter::retract_stobj_tables(const std::vector<Value>& names) {
  if (config_.stobj_semantics == StobjSemantics::CopyOnWrite) {
    for (auto& [name, v] : bank_) v = retract_value(v, names);
    return;
  }
  for (const auto& inst : live_table_owners()) {
    for (std::size_t i = 0; i < inst->field_count(); ++i) {
      if (inst->spec().fields[i].kind != FieldSpec::Kind::Table) continue;
      StobjTable& t = inst->table(i);
      for (const Value& n : names) {
        if (auto child = t.get(n); child && child->is_stobj())
          child->stobj().set_owner(StobjInstance::OwnerKind::None, nullptr);
        t.rem(n);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Bank

Value Interpreter::global_stobj(const Value& name) const {
  auto it = bank_.find(name);
  return it == bank_.end() ? Value{} : it->second;
}

void Interpreter::set_global_stobj(const Value& name, Value v) {
  if (!v.is_stobj() || !v.stobj().spec().name.eq(name))
    throw EvalError("bank entry " + show(name) + " must hold a " + show(name) +
                    " stobj, got " + show(v));
  StobjInstance& inst = v.stobj();
  if (config_.stobj_semantics == StobjSemantics::InPlace) {
    if (config_.check_ownership && inst.owner() == StobjInstance::OwnerKind::Table)
      throw EvalError("single-threadedness violated: " + show(name) +
                      " instance is owned by a stobj-table");
    inst.set_owner(StobjInstance::OwnerKind::Bank, this);
  }
  bank_.insert_or_assign(name, std::move(v));
}

Value Interpreter::bank_logical_view() const {
  std::vector<std::pair<std::string, Value>> entries;
  for (const auto& [name, v] : bank_)
    entries.emplace_back(name.symbol_name(), Value::cons(name, logical_of(v)));
  std::sort(entries.begin(), entries.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  std::vector<Value> out;
  for (auto& e : entries) out.push_back(std::move(e.second));
  return list_from(out);
}

void Interpreter::sync_bank_from(const Interpreter& other) { adopt_bank(other.bank()); }

void Interpreter::set_stobj_semantics(StobjSemantics semantics) {
  if (semantics == config_.stobj_semantics) return;
  config_.stobj_semantics = semantics;
  auto saved = bank_;
  adopt_bank(saved);
}

void Interpreter::adopt_bank(
    const std::unordered_map<Value, Value, IdentityHash, IdentityEq>& source) {
  const auto rep = config_.stobj_semantics == StobjSemantics::InPlace
                       ? StobjTable::Rep::Hash
                       : StobjTable::Rep::Alist;
  auto resolve = [this](const Value& n) { return world_.stobj_spec(n); };
  std::vector<std::pair<Value, std::shared_ptr<StobjInstance>>> copies;
  for (const auto& [name, v] : source)
    if (world_.is_stobj(name)) copies.emplace_back(name, v.stobj().deep_copy(rep, resolve));
  bank_.clear();
  table_owners_.clear();
  for (auto& [name, copy] : copies) {
    copy->set_owner(StobjInstance::OwnerKind::None, nullptr);
    register_tree(copy);
    set_global_stobj(name, Value::stobj(copy));
  }
}

void Interpreter::register_tree(const std::shared_ptr<StobjInstance>& inst) {
  if (config_.stobj_semantics != StobjSemantics::InPlace || !has_table(inst->spec()))
    return;
  table_owners_.push_back(inst);
  for (std::size_t i = 0; i < inst->field_count(); ++i) {
    if (inst->spec().fields[i].kind != FieldSpec::Kind::Table) continue;
    inst->table(i).for_each_child([&](const Value&, const Value& c) {
      register_tree(c.stobj_ptr());
    });
  }
}

std::shared_ptr<StobjInstance> Interpreter::create_instance(
    const std::shared_ptr<const StobjSpec>& spec) {
  const bool in_place = config_.stobj_semantics == StobjSemantics::InPlace;
  auto inst = create_stobj(spec, in_place ? StobjTable::Rep::Hash
                                          : StobjTable::Rep::Alist);
  if (in_place && has_table(*spec)) table_owners_.push_back(inst);
  return inst;
}

std::vector<std::shared_ptr<StobjInstance>> Interpreter::live_table_owners() {
  std::vector<std::shared_ptr<StobjInstance>> out;
  std::erase_if(table_owners_, [&](const std::weak_ptr<StobjInstance>& w) {
    auto p = w.lock();
    if (!p) return true;
    out.push_back(std::move(p));
    return false;
  });
  return out;
}

}  // namespace stlisp
