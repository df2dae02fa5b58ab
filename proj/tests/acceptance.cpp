// Prints one PASS/FAIL line per acceptance criterion; exits 1 if any fails.
#include "session.hpp"
#include "stlisp/error.hpp"
#include "stlisp/loops.hpp"
#include "stlisp/refinement.hpp"
#include "stlisp/stobj_table.hpp"
#include "test_util.hpp"

#include <chrono>
#include <functional>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace stlisp;
using test::read1;
using test::run;

namespace {

struct Check {
  bool ok = true;
  std::string why;
  void expect(bool cond, const std::string& what) {
    if (!cond && ok) {
      ok = false;
      why = what;
    }
  }
  template <class A, class B>
  void eq(const A& got, const B& want, const std::string& what) {
    std::ostringstream s;
    s << what << ": got " << got << ", want " << want;
    expect(got == want, s.str());
  }
};

const Config kModes[] = {Config::logical(), Config::native()};

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

constexpr const char* kDo1 =
    "(loop$ WITH sum = 0 WITH lst = '(1 2 3 4) DO"
    "  (if (consp lst)"
    "      (let ((sq (* (car lst) (car lst))))"
    "        (progn (setq sum (+ sq sum)) (setq lst (cdr lst))))"
    "    (return sum)))";

constexpr const char* kStobjDo =
    "(loop$ WITH sum = 0 WITH lst = '(1 2 3 4) DO :VALUES (nil st)"
    "  (if (consp lst)"
    "      (let ((sq (* (car lst) (car lst))))"
    "        (progn (mv-setq (sum st) (let ((st (update-fld (cons sq (fld st)) st))) (mv (+ sq sum) st)))"
    "               (setq lst (cdr lst))))"
    "    (return (mv sum st))))";

constexpr const char* kMeasureFinally =
    "(loop$ WITH sum = 0 WITH i = 1 DO :MEASURE (nfix (- 5 i))"
    "  (if (<= i 4) (let ((sq (* i i))) (progn (setq sum (+ sq sum)) (setq i (1+ i))))"
    "    (loop-finish))"
    "  FINALLY (return sum))";

Check c1() {
  Check c;
  auto t0 = std::chrono::steady_clock::now();
  for (const Config& m : kModes) {
    Interpreter I(m);
    c.eq(run(I, "(loop$ FOR i in '(1 2 3 4) SUM (* i i))"), std::string("30"), "FOR sum");
  }
  c.expect(seconds_since(t0) < 1.0, "runtime");
  return c;
}

Check c2() {
  Check c;
  auto t0 = std::chrono::steady_clock::now();
  for (const Config& m : kModes) {
    Interpreter I(m);
    c.eq(run(I, kDo1), std::string("30"), "DO example");
  }
  Interpreter I;
  std::vector<Value> triples;
  I.set_do_observer([&](const DoTraceStep& s) { triples.push_back(s.triple); });
  run(I, kDo1);
  for (const char* want : {"(NIL NIL ((SUM . 30) (LST . NIL)))", "(:RETURN 30 ((SUM . 30) (LST . NIL)))"}) {
    bool found = false;
    for (const Value& t : triples) found = found || equal(t, read1(want));
    c.expect(found, std::string("trace lacks ") + want);
  }
  c.expect(seconds_since(t0) < 1.0, "runtime");
  return c;
}

Check c3() {
  Check c;
  auto t0 = std::chrono::steady_clock::now();
  for (const Config& m : kModes) {
    Interpreter I(m);
    run(I, "(defstobj st fld)");
    c.eq(run(I, kStobjDo), std::string("(30 <ST>)"), "stobj loop");
    c.eq(run(I, "(fld st)"), std::string("(16 9 4 1)"), "(fld st)");
  }
  c.expect(seconds_since(t0) < 1.0, "runtime");
  return c;
}

Check c4() {
  Check c;
  for (const Config& m : kModes) {
    Interpreter I(m);
    c.eq(run(I, kMeasureFinally), std::string("30"), "measure/finally loop");
  }
  Interpreter I;
  std::vector<Value> chain;
  I.set_do_observer([&](const DoTraceStep& s) { chain.push_back(s.measure); });
  run(I, kMeasureFinally);
  c.eq(chain.size(), std::size_t{5}, "do-fn applications");
  for (std::size_t k = 1; k < chain.size(); ++k)
    c.expect(lex_less(chain[k], chain[k - 1]), "chain not strictly decreasing");
  return c;
}

Check c5() {
  Check c;
  const char* f =
      "(defun f (n) (declare (xargs :guard (natp n)))"
      "  (loop$ WITH sum OF-TYPE integer = 0 WITH i = n DO :guard (natp i)"
      "    (if (zp i) (return sum) (let ((sq (* i i))) (progn (setq sum (+ sq sum)) (setq i (1- i)))))))";
  for (const Config& m : kModes) {
    Interpreter I(m);
    run(I, f);
    try {
      c.eq(run(I, "(f 4)"), std::string("30"), "(f 4)");
      c.eq(run(I, "(f 0)"), std::string("0"), "(f 0)");
    } catch (const GuardViolation& e) {
      c.expect(false, std::string("guard violation: ") + e.what());
    }
  }
  Interpreter I;
  run(I,
      "(defun g (n s0) (loop$ WITH sum = s0 WITH i = n DO"
      "  (if (zp i) (return sum) (let ((sq (* i i))) (progn (setq sum (+ sq sum)) (setq i (1- i)))))))");
  for (const auto& [call, var] : {std::pair{"(g -1 0)", "'I "}, std::pair{"(g 3 'x)", "'SUM "}}) {
    try {
      run(I, call);
      c.expect(false, std::string(call) + " did not fail");
    } catch (const GuardViolation& e) {
      c.expect(e.checkpoint().find(var) != std::string::npos, "diagnostic " + e.checkpoint());
    }
  }
  try {
    run(I, "(g 3 'x)");
  } catch (const GuardViolation& e) {
    c.eq(e.checkpoint(), std::string("(ACL2-NUMBERP (CDR (ASSOC-EQ-SAFE 'SUM ALIST)))"), "checkpoint");
  }
  return c;
}

Check c6() {
  Check c;
  for (const Config& m : kModes) {
    Interpreter I(m);
    const auto forms = read(test::slurp(test::corpus_path("switch.lisp")));
    std::vector<std::string> prints;
    for (const Value& f : forms) {
      const TopLevelResult r = I.process(f);
      if (f.is_cons() && f.car().eq(sym("PRINT-SWITCH")) && r.value.is_string())
        prints.push_back(r.value.as_string());
    }
    std::string seen;
    for (const auto& p : prints) seen += " " + p;
    c.expect(prints == std::vector<std::string>{"OFF", "ON", "OFF"}, "switch prints:" + seen);
  }
  return c;
}

Check c7() {
  Check c;
  std::size_t divergences = 0, ops = 0;
  for (auto rep : {StobjTable::Rep::Alist, StobjTable::Rep::Hash}) {
    std::mt19937_64 rng(7);
    StobjTable t(rep);
    std::vector<std::pair<int, long long>> model;  // first match wins
    auto find = [&](int k) -> std::optional<long long> {
      for (auto& [key, v] : model)
        if (key == k) return v;
      return std::nullopt;
    };
    for (int i = 0; i < 2000; ++i, ++ops) {
      const int k = static_cast<int>(rng() % 6);
      const Value ks = sym("K" + std::to_string(k));
      switch (rng() % 3) {
        case 0: {
          const long long v = static_cast<long long>(rng() % 100);
          t.put(ks, num(v));
          std::erase_if(model, [&](auto& p) { return p.first == k; });
          model.insert(model.begin(), {k, v});
          auto got = t.get(ks);
          if (!got || !equal(*got, num(v))) ++divergences;
          break;
        }
        case 1:
          t.rem(ks);
          std::erase_if(model, [&](auto& p) { return p.first == k; });
          if (t.boundp(ks)) ++divergences;
          break;
        default: {
          auto got = t.get(ks);
          auto want = find(k);
          if (got.has_value() != want.has_value() || (want && !equal(*got, num(*want)))) ++divergences;
        }
      }
      if (t.count() != model.size()) ++divergences;
    }
  }
  c.expect(ops >= 1000, "too few ops");
  c.eq(divergences, std::size_t{0}, "divergences");
  return c;
}

Check c8() {
  Check c;
  for (const Config& m : kModes) {
    Interpreter I(m);
    I.process_source(
        "(defstobj stobj-table (tbl :type (stobj-table)))"
        "(defstobj other (tbl2 :type (stobj-table)))"
        "(defstobj switch fld)"
        "(defun put-switch (stobj-table) (declare (xargs :stobjs (stobj-table)))"
        "  (stobj-let ((switch (tbl-get 'switch stobj-table (create-switch))))"
        "             (switch) (update-fld t switch) stobj-table))"
        "(defun put-switch2 (other) (declare (xargs :stobjs (other)))"
        "  (stobj-let ((switch (tbl2-get 'switch other (create-switch))))"
        "             (switch) (update-fld t switch) other))"
        "(put-switch stobj-table) (put-switch2 other)");
    c.eq(run(I, "(tbl-count stobj-table)"), std::string("1"), "count before");
    I.undo(*I.world().index_of(sym("SWITCH")));
    c.eq(run(I, "(tbl-boundp 'switch stobj-table)"), std::string("NIL"), "boundp");
    c.eq(run(I, "(tbl-count stobj-table)"), std::string("0"), "count after");
    c.eq(run(I, "(tbl2-boundp 'switch other)"), std::string("NIL"), "boundp in second table");
    c.eq(run(I, "(tbl2-count other)"), std::string("0"), "count in second table");
  }
  return c;
}

Check c9() {
  Check c;
  auto t0 = std::chrono::steady_clock::now();
  std::size_t loops = 0;
  bool stobj_loop = false, mv_setq = false;
  std::uint64_t divergences = 0;
  for (const char* name : {"showcase.lisp", "loops.lisp", "switch.lisp", "retraction.lisp",
                           "scheduler.lisp", "scheduler_priority.lisp", "scheduler_deadlock.lisp"}) {
    const std::string src = test::slurp(test::corpus_path(name));
    for (std::size_t p = src.find("(loop$"); p != std::string::npos; p = src.find("(loop$", p + 1)) {
      ++loops;
      const std::string body = src.substr(p, src.find("\n\n", p) - p);
      stobj_loop = stobj_loop || body.find(":VALUES") != std::string::npos;
      mv_setq = mv_setq || body.find("mv-setq") != std::string::npos;
    }
    std::ostringstream out, err;
    cli::SessionConfig cfg;
    cfg.mode = cli::Mode::Diff;
    cli::Session s(cfg, out, err);
    s.run_source(src, name, false);
    divergences += s.divergences();
    if (s.divergences()) c.expect(false, std::string(name) + ": " + err.str());
  }
  c.expect(loops >= 25, "only " + std::to_string(loops) + " loops");
  c.expect(stobj_loop && mv_setq, "corpus lacks stobj or mv-setq loops");
  c.eq(divergences, std::uint64_t{0}, "divergences");
  c.expect(seconds_since(t0) < 30.0, "runtime");
  return c;
}

Check c10() {
  Check c;
  const std::string path = test::corpus_path("measure_violation.lisp");
  cli::SessionConfig cfg;
  cfg.cap = 100000;
  std::ostringstream out, err;
  cfg.mode = cli::Mode::Logical;
  int rc_logical = cli::run_file(path, cfg, out, err);
  c.expect(rc_logical != 0, "logical exit 0");
  c.expect(err.str().find("(t <error>)") != std::string::npos, "no (t <error>) diagnostic: " + err.str());
  std::ostringstream out2, err2;
  cfg.mode = cli::Mode::Native;
  int rc_native = cli::run_file(path, cfg, out2, err2);
  c.expect(rc_native != 0, "native exit 0");
  c.expect(err2.str().find("iteration cap") != std::string::npos, "no cap diagnostic: " + err2.str());
  return c;
}

std::string scheduler_definitions(const char* name) {
  std::string src = test::slurp(test::corpus_path(name));
  return src.substr(0, src.find("\n(run st)"));
}

Check c11() {
  Check c;
  {
    Interpreter I;
    I.process_source(scheduler_definitions("scheduler.lisp"));
    SchedulerRun r = run_scheduler(I, sym("ST"));
    c.expect(!r.rank_chain.empty() && r.rank_chain.front() == 3, "initial sum-rank");
    for (std::size_t k = 1; k < r.rank_chain.size(); ++k)
      c.expect(r.rank_chain[k] < r.rank_chain[k - 1], "chain not strictly decreasing");
    c.expect(r.report.rfind("completed", 0) == 0, "report: " + r.report);
  }
  {
    Interpreter I;
    I.process_source(scheduler_definitions("scheduler.lisp"));
    ConstraintReport rep = check_constraints(I, 0, 1000);
    c.eq(rep.trials, std::uint64_t{1000}, "trials");
    c.eq(rep.failures, std::uint64_t{0}, "constraint failures");
  }
  {
    Interpreter I;
    I.process_source(scheduler_definitions("scheduler_adversarial.lisp"));
    bool caught = false;
    try {
      run_scheduler(I, sym("ST"));
    } catch (const MeasureError&) {
      caught = true;
    }
    caught = caught || check_constraints(I, 0, 1000).failures > 0;
    c.expect(caught, "adversarial exec not caught");
  }
  return c;
}

Check c12() {
  Check c;
  for (const char* name : {"aliasing.lisp", "discarded_update.lisp", "branch_inconsistent.lisp"}) {
    Interpreter I;
    bool rejected = false;
    try {
      I.process_source(test::slurp(test::corpus_path(std::string("violations/") + name)));
    } catch (const DefinitionError&) {
      rejected = true;
    }
    c.expect(rejected, std::string(name) + " accepted");
  }
  for (const char* name : {"showcase.lisp", "switch.lisp", "scheduler.lisp"}) {
    Interpreter I;
    try {
      I.process_source(test::slurp(test::corpus_path(name)));
    } catch (const LispError& e) {
      c.expect(false, std::string(name) + ": " + e.what());
    }
  }
  return c;
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Check()>>> criteria = {
      {"FOR example", c1},
      {"DO example with do$ trace", c2},
      {"stobj DO example", c3},
      {"measure and FINALLY", c4},
      {"guarded function", c5},
      {"flip-switch/print-switch", c6},
      {"stobj-table laws", c7},
      {"retraction", c8},
      {"path equivalence", c9},
      {"measure enforcement", c10},
      {"scheduler demo", c11},
      {"linearity checker", c12},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Check c;
    try {
      c = criteria[i].second();
    } catch (const std::exception& e) {
      c.ok = false;
      c.why = std::string("exception: ") + e.what();
    }
    std::cout << (c.ok ? "PASS" : "FAIL") << " " << (i + 1) << " " << criteria[i].first;
    if (!c.ok) std::cout << ": " << c.why;
    std::cout << "\n";
    failures += c.ok ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
