#include "stlisp/refinement.hpp"

#include "stlisp/error.hpp"
#include "stlisp/loops.hpp"
#include "stlisp/sexpr.hpp"

#include <algorithm>

namespace stlisp {

namespace {

const Value& rank_sym() { static const Value v = sym("RANK"); return v; }
const Value& proc_ids_sym() { static const Value v = sym("PROC-IDS"); return v; }
const Value& pick_sym() { static const Value v = sym("PICK"); return v; }
const Value& ready_sym() { static const Value v = sym("READY"); return v; }
const Value& exec_sym() { static const Value v = sym("EXEC"); return v; }
const Value& sum_rank_sym() { static const Value v = sym("SUM-RANK"); return v; }
const Value& report_sym() {
  static const Value v = sym("REPORT-COMPLETION-OR-ERROR-AND-RETURN");
  return v;
}

[[noreturn]] void bad(const Value& form, const std::string& why) {
  throw DefinitionError(why + ": " + show(form));
}

bool natp(const Value& v) { return v.is_integer() && v.as_integer() >= 0; }

Signature parse_signature(const World& w, const Value& sig, const Value& form) {
  const Sym& s = Sym::get();
  auto items = sig.is_cons() && is_proper_list(sig) ? to_vector(sig) : std::vector<Value>{};
  if (items.size() != 3 || !items[1].eq(s.arrow) || !items[0].is_cons())
    bad(form, "malformed signature " + show(sig));
  auto head = to_vector(items[0]);
  Signature out;
  out.name = head.front();
  if (!out.name.is_symbol() || out.name.is_keyword())
    bad(form, "illegal signature name " + show(out.name));
  auto position = [&](const Value& v) -> Value {
    if (v.eq(s.star)) return {};
    if (!v.is_symbol() || !w.is_stobj(v))
      bad(form, "signature position " + show(v) + " is neither * nor a defined stobj");
    return v;
  };
  for (std::size_t i = 1; i < head.size(); ++i) out.inputs.push_back(position(head[i]));
  const Value& o = items[2];
  if (o.is_cons() && o.car().eq(s.mv)) {
    for (const Value& x : to_vector(o.cdr())) out.outputs.push_back(position(x));
  } else {
    out.outputs.push_back(position(o));
  }
  return out;
}

std::shared_ptr<Function> constrained(const Signature& sig) {
  auto fn = std::make_shared<Function>();
  fn->name = sig.name;
  fn->kind = Function::Kind::Constrained;
  fn->arity = static_cast<int>(sig.inputs.size());
  fn->stobjs_in = sig.inputs;
  fn->stobjs_out = sig.outputs;
  const Value name = sig.name;
  fn->invoke = [name](Interpreter& I, std::span<const Value> a, const Value& form) {
    auto target = I.world().attachment(name);
    if (!target)
      throw EvalError("constrained function " + show(name) +
                      " has no attachment, in " + show(form));
    return I.call(*target, a);
  };
  return fn;
}

Value single(const Value& v, const Value& fn) {
  if (v.is_values())
    throw EvalError(show(fn) + " returned multiple values where one is expected");
  return v;
}

std::vector<Value> proc_ids(Interpreter& I) {
  Value ids = single(I.call(proc_ids_sym(), {}), proc_ids_sym());
  if (!is_proper_list(ids))
    throw EvalError("(proc-ids) must return a proper list, got " + show(ids));
  return to_vector(ids);
}

Integer sum_rank_of(Interpreter& I, const Value& ids, const Value& st) {
  Integer total = 0;
  for (const Value* p = &ids; p->is_cons(); p = &p->cdr()) {
    Value args[2] = {p->car(), st};
    Value r = single(I.call(rank_sym(), args), rank_sym());
    if (natp(r)) total += r.as_integer();
  }
  return total;
}

std::string render_report(const Value& p, const Integer& remaining) {
  if (remaining == 0)
    return "completed: all processes have rank 0 (last pick " + show(p) + ")";
  return "error: picked process " + show(p) + " is not ready with sum-rank " +
         remaining.str() + " remaining";
}

void add_scheduler_builtins(const Signature& rank, Event& event, World& w) {
  if (rank.inputs.size() != 2 || rank.inputs[1].is_nil()) return;
  const Value st = rank.inputs[1];
  if (!w.is_defined(sum_rank_sym())) {
    auto fn = std::make_shared<Function>();
    fn->name = sum_rank_sym();
    fn->arity = 2;
    fn->stobjs_in = {Value{}, st};
    fn->stobjs_out = {Value{}};
    fn->invoke = [](Interpreter& I, std::span<const Value> a, const Value& form) {
      if (!is_proper_list(a[0]))
        throw EvalError("sum-rank needs a proper list of process ids: " + show(form));
      return Value::integer(sum_rank_of(I, a[0], a[1]));
    };
    w.add_function(fn);
    event.functions.push_back(sum_rank_sym());
  }
  if (!w.is_defined(report_sym())) {
    auto fn = std::make_shared<Function>();
    fn->name = report_sym();
    fn->arity = 2;
    fn->stobjs_in = {Value{}, st};
    fn->stobjs_out = {st};
    fn->invoke = [](Interpreter& I, std::span<const Value> a, const Value&) {
      Value ids = list_from(proc_ids(I));
      I.output().push_back(render_report(a[0], sum_rank_of(I, ids, a[1])));
      return a[1];
    };
    w.add_function(fn);
    event.functions.push_back(report_sym());
  }
}

}  // namespace

std::vector<Constraint> default_scheduler_constraints() {
  static const char* const src[][2] = {
      {"RANK-IS-NATURAL", "(natp (rank p st))"},
      {"PICK-IS-PROC-ID", "(member-equal (pick st) (proc-ids))"},
      {"EXEC-NO-INTERFERE",
       "(implies (not (= p q)) (<= (rank p (exec q st)) (rank p st)))"},
      {"EXEC-RANK-REDUCES", "(implies (ready p st) (< (rank p (exec p st)) (rank p st)))"},
  };
  std::vector<Constraint> out;
  for (const auto& c : src) out.push_back({sym(c[0]), read(c[1]).front()});
  return out;
}

TopLevelResult process_encapsulate(Interpreter& interp, const Value& form) {
  const Sym& s = Sym::get();
  World& w = interp.world();
  if (!is_proper_list(form) || length(form) < 2 || !is_proper_list(form.cdr().car()))
    bad(form, "encapsulate expects (encapsulate (signature...) form...)");
  Event e;
  e.kind = EventKind::Signature;
  e.form = form;
  for (const Value& sig_form : to_vector(form.cdr().car())) {
    Signature sig = parse_signature(w, sig_form, form);
    if (w.is_defined(sig.name) || w.is_stobj(sig.name) || w.find_signature(sig.name))
      bad(form, "name " + show(sig.name) + " is already in use");
    for (const auto& prev : e.signatures)
      if (prev.name.eq(sig.name)) bad(form, "duplicate signature " + show(sig.name));
    e.signatures.push_back(std::move(sig));
  }
  if (e.signatures.empty()) bad(form, "encapsulate needs at least one signature");
  for (const Value& item : to_vector(form.cdr().cdr())) {
    if (!item.is_cons() || !item.car().eq(s.defthm)) continue;  // local witnesses etc.
    auto parts = to_vector(item);
    if (parts.size() < 3 || !parts[1].is_symbol())
      bad(form, "malformed defthm " + show(item));
    e.constraints.push_back({parts[1], parts[2]});
  }
  const Signature* rank = nullptr;
  bool has_ids = false;
  for (const auto& sig : e.signatures) {
    if (sig.name.eq(rank_sym())) rank = &sig;
    if (sig.name.eq(proc_ids_sym())) has_ids = true;
  }
  if (e.constraints.empty() && rank && has_ids)
    e.constraints = default_scheduler_constraints();
  e.name = e.signatures.front().name;
  for (const auto& sig : e.signatures) {
    w.add_function(constrained(sig));
    e.functions.push_back(sig.name);
  }
  if (rank && has_ids) add_scheduler_builtins(*rank, e, w);
  std::string names;
  for (const auto& sig : e.signatures) names += (names.empty() ? "" : " ") + show(sig.name);
  w.record(std::move(e));
  return {Value{}, "(" + names + ")", true};
}

TopLevelResult process_defattach(Interpreter& interp, const Value& form) {
  World& w = interp.world();
  auto items = is_proper_list(form) ? to_vector(form) : std::vector<Value>{};
  if (items.size() != 3 || !items[1].is_symbol() || !items[2].is_symbol())
    bad(form, "defattach expects (defattach signature function)");
  const Signature* sig = w.find_signature(items[1]);
  if (!sig) bad(form, show(items[1]) + " is not a constrained function");
  const Function* fn = w.find_function(items[2]);
  if (!fn || fn->kind == Function::Kind::Constrained)
    bad(form, show(items[2]) + " is not an executable function");
  if (fn->arity != static_cast<int>(sig->inputs.size()))
    bad(form, show(items[2]) + " takes " + std::to_string(fn->arity) +
                  " arguments but " + show(sig->name) + " takes " +
                  std::to_string(sig->inputs.size()));
  auto same = [](const Shape& a, const Shape& b) {
    return a.size() == b.size() &&
           std::equal(a.begin(), a.end(), b.begin(),
                      [](const Value& x, const Value& y) { return x.eq(y); });
  };
  if (!same(fn->stobjs_in, sig->inputs) || !same(fn->stobjs_out, sig->outputs))
    bad(form, "shape of " + show(items[2]) + " " + show_shape(fn->stobjs_in) + " => " +
                  show_shape(fn->stobjs_out) + " does not match " + show(sig->name) + " " +
                  show_shape(sig->inputs) + " => " + show_shape(sig->outputs));
  Event e;
  e.kind = EventKind::Defattach;
  e.form = form;
  e.attach_signature = items[1];
  e.attach_function = items[2];
  w.record(std::move(e));
  return {items[2], show(items[1]) + " := " + show(items[2]), true};
}

Integer sum_rank(Interpreter& interp, const Value& st) {
  return sum_rank_of(interp, list_from(proc_ids(interp)), st);
}

SchedulerRun run_scheduler(Interpreter& interp, const Value& st_name,
                           std::uint64_t max_steps) {
  SchedulerRun run;
  Value st = interp.global_stobj(st_name);
  if (!st.is_stobj()) throw EvalError("no live stobj " + show(st_name));
  const Value ids = list_from(proc_ids(interp));
  run.rank_chain.push_back(sum_rank_of(interp, ids, st));
  for (std::uint64_t step = 0;; ++step) {
    Value pa[1] = {st};
    Value p = single(interp.call(pick_sym(), pa), pick_sym());
    Value ra[2] = {p, st};
    if (single(interp.call(ready_sym(), ra), ready_sym()).is_nil()) {
      run.report = render_report(p, run.rank_chain.back());
      interp.output().push_back(run.report);
      break;
    }
    if (step >= max_steps)
      throw EvalError("scheduler exceeded " + std::to_string(max_steps) + " steps");
    st = single(interp.call(exec_sym(), ra), exec_sym());
    run.picks.push_back(p);
    Integer r = sum_rank_of(interp, ids, st);
    if (!(r < run.rank_chain.back())) {
      interp.set_global_stobj(st_name, st);
      throw MeasureError("measure (SUM-RANK (PROC-IDS) " + show(st_name) +
                         ") did not decrease after (EXEC " + show(p) + " " +
                         show(st_name) + "): " + run.rank_chain.back().str() + " -> " +
                         r.str());
    }
    run.rank_chain.push_back(std::move(r));
  }
  interp.set_global_stobj(st_name, st);
  run.final_state = st;
  return run;
}

StateGenerator random_reachable_states(const Value& st_name, unsigned max_execs) {
  return [st_name, max_execs](Interpreter& I, std::mt19937_64& rng) {
    auto spec = I.world().stobj_spec(st_name);
    if (!spec) throw EvalError("no stobj " + show(st_name));
    Value st = Value::stobj(I.create_instance(spec));
    auto ids = proc_ids(I);
    if (ids.empty()) return st;
    const unsigned n = std::uniform_int_distribution<unsigned>(0, max_execs)(rng);
    for (unsigned k = 0; k < n; ++k) {
      std::vector<Value> ready;
      for (const Value& p : ids) {
        Value ra[2] = {p, st};
        if (!I.call(ready_sym(), ra).is_nil()) ready.push_back(p);
      }
      if (ready.empty()) break;
      Value ra[2] = {ready[std::uniform_int_distribution<std::size_t>(0, ready.size() - 1)(rng)],
                     st};
      st = I.call(exec_sym(), ra);
    }
    return st;
  };
}

std::string ConstraintReport::describe() const {
  std::string out = "check-constraints: " + std::to_string(trials) + " trials, " +
                    std::to_string(checks) + " checks, " + std::to_string(failures) +
                    " failures";
  for (const auto& c : examples) {
    out += "\n  " + c.constraint + " fails with " + c.bindings + ", state " + c.state;
    if (!c.error.empty()) out += " (" + c.error + ")";
  }
  return out;
}

ConstraintReport check_constraints(Interpreter& interp, std::uint64_t seed,
                                   std::uint64_t trials, const StateGenerator& generator) {
  struct SemanticsGuard {
    Config& c;
    StobjSemantics saved;
    ~SemanticsGuard() { c.stobj_semantics = saved; }
  } guard{interp.config(), interp.config().stobj_semantics};
  interp.config().stobj_semantics = StobjSemantics::CopyOnWrite;

  ConstraintReport report;
  const auto constraints = interp.world().constraints();
  const Signature* rank = interp.world().find_signature(rank_sym());
  if (!rank || rank->inputs.size() != 2 || rank->inputs[1].is_nil())
    throw EvalError("check-constraints needs a (rank * st) signature");
  const Value st_name = rank->inputs[1];
  StateGenerator gen = generator ? generator : random_reachable_states(st_name);
  std::mt19937_64 rng(seed);
  const auto ids = proc_ids(interp);

  for (std::uint64_t t = 0; t < trials; ++t) {
    ++report.trials;
    Value st = gen(interp, rng);
    for (const auto& c : constraints) {
      Value env = list({Value::cons(st_name, st)});
      std::string bindings;
      for (const Value& v : free_variables(c.formula)) {
        if (v.eq(st_name)) continue;
        Value pick = ids.empty()
                         ? Value{}
                         : ids[std::uniform_int_distribution<std::size_t>(0, ids.size() - 1)(rng)];
        env = Value::cons(Value::cons(v, pick), env);
        bindings += (bindings.empty() ? "" : ", ") + show(v) + " = " + show(pick);
      }
      ++report.checks;
      std::string error;
      bool ok = false;
      try {
        ok = !interp.eval(c.formula, env).is_nil();
      } catch (const LispError& e) {
        error = e.what();
      }
      if (ok) continue;
      ++report.failures;
      if (report.examples.size() < 10)
        report.examples.push_back({show(c.name), bindings.empty() ? "no variables" : bindings,
                                   show(logical_of(st)), error});
    }
  }
  return report;
}

}  // namespace stlisp
