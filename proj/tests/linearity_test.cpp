#include "stlisp/error.hpp"
#include "stlisp/linearity.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <string>

namespace stlisp {
namespace {

using test::read1;
using test::run;

// Rule of the first violation in `defun`, after defining `st` with one field.
std::string first_rule(const char* defun, const char* extra = "") {
  Interpreter I;
  run(I, "(defstobj st fld)");
  if (*extra) run(I, extra);
  LinearityReport r = check_defun(I.world(), read1(defun));
  return r.ok() ? "ok" : r.violations.front().rule;
}

TEST(Linearity, AcceptsSingleThreadedDefuns) {
  EXPECT_EQ(first_rule("(defun set1 (st) (declare (xargs :stobjs (st))) (update-fld 1 st))"), "ok");
  EXPECT_EQ(first_rule("(defun twice (st) (declare (xargs :stobjs (st)))"
                       "  (let ((st (update-fld 1 st))) (update-fld 2 st)))"),
            "ok");
  EXPECT_EQ(first_rule("(defun pair (st) (declare (xargs :stobjs (st))) (mv (fld st) st))"), "ok");
  EXPECT_EQ(first_rule("(defun cnt (n st) (declare (xargs :stobjs (st)))"
                       "  (if (zp n) st (let ((st (update-fld n st))) (cnt (1- n) st))))"),
            "ok");
}

TEST(Linearity, Aliasing) {
  EXPECT_EQ(first_rule("(defun a (st) (declare (xargs :stobjs (st))) (let ((o st)) (update-fld 1 o)))"),
            "R3");
}

TEST(Linearity, DiscardedUpdate) {
  EXPECT_EQ(first_rule("(defun d (st) (declare (xargs :stobjs (st))) (list (update-fld 1 st)))"),
            "R2");
  EXPECT_EQ(first_rule("(defun d2 (st) (declare (xargs :stobjs (st)))"
                       "  (let ((st (update-fld 3 st))) (fld st)))"),
            "R2");
}

TEST(Linearity, BranchInconsistentReturns) {
  EXPECT_EQ(first_rule("(defun b (x st) (declare (xargs :stobjs (st))) (if x st nil))"), "R4");
}

TEST(Linearity, OrdinaryPosition) {
  EXPECT_EQ(first_rule("(defun p (st) (declare (xargs :stobjs (st))) (both st 1))",
                       "(defun both (a b) (list a b))"),
            "R1");
  EXPECT_EQ(first_rule("(defun u (st) (update-fld 1 st))"), "R1");
}

TEST(Linearity, DuplicateStobjArgument) {
  EXPECT_EQ(first_rule("(defun q (st) (declare (xargs :stobjs (st))) (two st st))",
                       "(defstobj st2 fld2) (defun two (st st2) (declare (xargs :stobjs (st st2))) (mv st st2))"),
            "R1");
}

TEST(Linearity, TopLevelTerms) {
  Interpreter I;
  run(I, "(defstobj st fld)");
  EXPECT_TRUE(check_top_level(I.world(), read1("(update-fld 1 st)")).ok());
  EXPECT_FALSE(check_top_level(I.world(), read1("(cons st st)")).ok());
}

TEST(Linearity, ViolationFixturesRejected) {
  for (const char* name : {"aliasing.lisp", "discarded_update.lisp", "branch_inconsistent.lisp",
                           "unreturned_update.lisp", "ordinary_position.lisp"}) {
    Interpreter I;
    EXPECT_THROW(I.process_source(test::slurp(test::corpus_path(std::string("violations/") + name))),
                 DefinitionError)
        << name;
  }
}

TEST(Linearity, CorpusDefunsAccepted) {
  for (const char* name : {"switch.lisp", "retraction.lisp", "scheduler.lisp", "loops.lisp"}) {
    Interpreter I;
    EXPECT_NO_THROW(I.process_source(test::slurp(test::corpus_path(name)))) << name;
  }
}

}  // namespace
}  // namespace stlisp
