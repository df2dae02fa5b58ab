#include "stlisp/error.hpp"
#include "stlisp/loops.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <string>
#include <vector>

namespace stlisp {
namespace {

using test::read1;
using test::run;

Value nat_list(const std::vector<int>& xs) {
  std::vector<Value> vs;
  for (int x : xs) vs.push_back(num(x));
  return list_from(vs);
}

// Independent order: shorter lists first, then first differing element.
bool oracle_less(const std::vector<int>& a, const std::vector<int>& b) {
  if (a.size() != b.size()) return a.size() < b.size();
  for (std::size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return a[i] < b[i];
  return false;
}

TEST(LexOrder, BruteForceAgainstOracle) {
  std::vector<std::vector<int>> all = {{}};
  for (int len = 1; len <= 3; ++len) {
    std::vector<std::vector<int>> next;
    for (const auto& v : all)
      if (static_cast<int>(v.size()) == len - 1)
        for (int x = 0; x < 4; ++x) {
          auto w = v;
          w.push_back(x);
          next.push_back(w);
        }
    all.insert(all.end(), next.begin(), next.end());
  }
  ASSERT_EQ(all.size(), 1u + 4 + 16 + 64);
  std::size_t mismatches = 0;
  for (const auto& a : all)
    for (const auto& b : all)
      if (lex_less(nat_list(a), nat_list(b)) != oracle_less(a, b)) ++mismatches;
  EXPECT_EQ(mismatches, 0u);
}

TEST(LexOrder, IsWellFoundedOnChains) {
  // Irreflexive and asymmetric on sampled pairs.
  for (int a = 0; a < 5; ++a) {
    EXPECT_FALSE(lex_less(nat_list({a}), nat_list({a})));
    for (int b = 0; b < 5; ++b)
      EXPECT_FALSE(lex_less(nat_list({a, b}), nat_list({a, b})));
  }
}

TEST(LexFix, Normalisation) {
  EXPECT_EQ(show(lex_fix(num(5))), "(5)");
  EXPECT_EQ(show(lex_fix(num(-5))), "(0)");
  EXPECT_EQ(show(lex_fix(read1("(3 -1 A)"))), "(3 0 0)");
  EXPECT_EQ(show(lex_fix(sym("A"))), "(0)");
}

TEST(ForLoops, SumAndCollectBothPaths) {
  for (Config c : {Config::logical(), Config::native()}) {
    Interpreter I(c);
    EXPECT_EQ(run(I, "(loop$ FOR i in '(1 2 3 4) SUM (* i i))"), "30");
    EXPECT_EQ(run(I, "(loop$ FOR i in '(1 2 3) COLLECT (+ i 1))"), "(2 3 4)");
  }
}

constexpr const char* kDoExample1 =
    "(loop$ WITH sum = 0 WITH lst = '(1 2 3 4) DO"
    "  (if (consp lst)"
    "      (let ((sq (* (car lst) (car lst))))"
    "        (progn (setq sum (+ sq sum)) (setq lst (cdr lst))))"
    "    (return sum)))";

TEST(DoLoops, TraceMatchesHandSimulation) {
  Interpreter I;
  std::vector<std::string> triples;
  I.set_do_observer([&](const DoTraceStep& s) { triples.push_back(show(s.triple)); });
  EXPECT_EQ(run(I, kDoExample1), "30");

  // Hand simulation: sum accumulates squares while lst is consumed.
  std::vector<std::string> expected;
  std::vector<int> lst = {1, 2, 3, 4};
  int sum = 0;
  while (!lst.empty()) {
    sum += lst.front() * lst.front();
    lst.erase(lst.begin());
    std::string rest = "NIL";
    if (!lst.empty()) {
      rest = "(";
      for (std::size_t i = 0; i < lst.size(); ++i) rest += (i ? " " : "") + std::to_string(lst[i]);
      rest += ")";
    }
    expected.push_back(show(read1("(NIL NIL ((SUM . " + std::to_string(sum) + ") (LST . " + rest + ")))")));
  }
  expected.push_back(show(read1("(:RETURN 30 ((SUM . 30) (LST . NIL)))")));
  EXPECT_EQ(triples, expected);
}

TEST(DoLoops, MeasureFinallyChain) {
  Interpreter I;
  std::vector<Value> chain;
  std::vector<std::string> tokens;
  I.set_do_observer([&](const DoTraceStep& s) {
    chain.push_back(s.measure);
    tokens.push_back(show(s.triple.car()));
  });
  EXPECT_EQ(run(I,
                "(loop$ WITH sum = 0 WITH i = 1 DO :MEASURE (nfix (- 5 i))"
                "  (if (<= i 4) (let ((sq (* i i))) (progn (setq sum (+ sq sum)) (setq i (1+ i))))"
                "    (loop-finish))"
                "  FINALLY (return sum))"),
            "30");
  ASSERT_EQ(chain.size(), 5u);
  for (std::size_t k = 1; k < chain.size(); ++k) EXPECT_TRUE(lex_less(chain[k], chain[k - 1]));
  EXPECT_EQ(tokens, (std::vector<std::string>{"NIL", "NIL", "NIL", "NIL", ":LOOP-FINISH"}));
}

TEST(DoLoops, NonDecreasingMeasure) {
  const char* src =
      "(loop$ WITH i = 0 DO :MEASURE (nfix (- 5 i))"
      "  (if (< i 5) (setq i (- i 1)) (return i)))";
  Interpreter logical;
  try {
    run(logical, src);
    FAIL() << "expected MeasureError";
  } catch (const MeasureError& e) {
    EXPECT_NE(std::string(e.what()).find("(t <error>)"), std::string::npos);
  }
  Config c = Config::native();
  c.native_cap = 1000;
  Interpreter native(c);
  EXPECT_THROW(run(native, src), IterationCapError);
}

TEST(DoLoops, GuessedMeasure) {
  Interpreter I;
  EXPECT_EQ(run(I, "(loop$ WITH n = 5 WITH s = 0 DO (if (zp n) (return s) (progn (setq s (+ s n)) (setq n (- n 1)))))"),
            "15");
  EXPECT_THROW(run(I, "(loop$ WITH n = 5 WITH m = 5 DO (if (zp n) (return m) (progn (setq n (- n 1)) (setq m (- m 1)))))"),
               DefinitionError);
}

constexpr const char* kGuardedF =
    "(defun f (n)"
    "  (declare (xargs :guard (natp n)))"
    "  (loop$ WITH sum OF-TYPE integer = 0 WITH i = n DO"
    "         :guard (natp i)"
    "         (if (zp i) (return sum)"
    "           (let ((sq (* i i))) (progn (setq sum (+ sq sum)) (setq i (1- i)))))))";

TEST(DoLoops, GuardedFunction) {
  for (Config c : {Config::logical(), Config::native()}) {
    Interpreter I(c);
    run(I, kGuardedF);
    EXPECT_EQ(run(I, "(f 4)"), "30");
    EXPECT_EQ(run(I, "(f 0)"), "0");
    EXPECT_THROW(run(I, "(f -1)"), GuardViolation);
  }
}

TEST(DoLoops, UnguardedDiagnosticsNameTheVariable) {
  Interpreter I;
  run(I,
      "(defun g (n s0)"
      "  (loop$ WITH sum = s0 WITH i = n DO"
      "         (if (zp i) (return sum)"
      "           (let ((sq (* i i))) (progn (setq sum (+ sq sum)) (setq i (1- i)))))))");
  try {
    run(I, "(g -1 0)");
    FAIL() << "expected GuardViolation";
  } catch (const GuardViolation& e) {
    EXPECT_EQ(e.checkpoint(), "(NATP (CDR (ASSOC-EQ-SAFE 'I ALIST)))");
  }
  try {
    run(I, "(g 3 'x)");
    FAIL() << "expected GuardViolation";
  } catch (const GuardViolation& e) {
    EXPECT_EQ(e.checkpoint(), "(ACL2-NUMBERP (CDR (ASSOC-EQ-SAFE 'SUM ALIST)))");
  }
}

TEST(DoLoops, OfTypeCheckedOnAssignment) {
  Interpreter I;
  EXPECT_THROW(run(I, "(loop$ WITH x OF-TYPE integer = 0 WITH n = 2 DO (if (zp n) (return x) (progn (setq x 'a) (setq n (1- n)))))"),
               GuardViolation);
}

TEST(DoLoops, StatementGrammar) {
  Interpreter I;
  EXPECT_THROW(run(I, "(loop$ WITH n = 2 DO (+ n 1))"), DefinitionError);
  EXPECT_THROW(run(I, "(loop$ WITH n = 2 DO (return (progn (setq n 1) n)))"), DefinitionError);
  EXPECT_THROW(run(I, "(setq x 1)"), LispError);
}

TEST(DoLoops, MvSetq) {
  for (Config c : {Config::logical(), Config::native()}) {
    Interpreter I(c);
    EXPECT_EQ(run(I,
                  "(loop$ WITH lst = '(5 8 2 9 1) WITH lo = 100 WITH hi = 0 DO"
                  "  (if (consp lst)"
                  "      (progn (mv-setq (lo hi) (mv (min lo (car lst)) (max hi (car lst))))"
                  "             (setq lst (cdr lst)))"
                  "    (return (cons lo hi))))"),
              "(1 . 9)");
  }
}

TEST(DoLoops, NativeFaultIsObservable) {
  Config c = Config::native();
  c.native_fault_for_testing = 1;
  Interpreter faulty(c);
  Interpreter logical;
  EXPECT_EQ(run(logical, kDoExample1), "30");
  EXPECT_EQ(run(faulty, kDoExample1), "31");
}

TEST(DoLoops, CompiledLoopAlistVars) {
  Interpreter I;
  auto cl = I.compiled_loop(read1(kDoExample1));
  ASSERT_TRUE(cl);
  std::vector<std::string> names;
  for (const Value& v : cl->alist_vars) names.push_back(v.symbol_name());
  EXPECT_EQ(names, (std::vector<std::string>{"SUM", "LST"}));
  EXPECT_EQ(show(cl->measure_expr), "(LEN LST)");
}

}  // namespace
}  // namespace stlisp
