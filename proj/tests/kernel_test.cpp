#include "stlisp/error.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

namespace stlisp {
namespace {

using test::run;

TEST(Kernel, Arithmetic) {
  Interpreter I;
  EXPECT_EQ(run(I, "(+ 1 2 3)"), "6");
  EXPECT_EQ(run(I, "(* 99999999999 99999999999)"), "9999999999800000000001");
  EXPECT_EQ(run(I, "(- 5)"), "-5");
  EXPECT_EQ(run(I, "(nfix -3)"), "0");
  EXPECT_EQ(run(I, "(zp 0)"), "T");
}

TEST(Kernel, SpecialForms) {
  Interpreter I;
  EXPECT_EQ(run(I, "(let ((x 1) (y 2)) (cons x y))"), "(1 . 2)");
  EXPECT_EQ(run(I, "(let* ((x 1) (y (+ x 1))) y)"), "2");
  EXPECT_EQ(run(I, "(if nil 1 2)"), "2");
  EXPECT_EQ(run(I, "(cond ((equal 1 2) 'a) (t 'b))"), "B");
  EXPECT_EQ(run(I, "(mv-let (a b) (mv 1 2) (list b a))"), "(2 1)");
  EXPECT_EQ(run(I, "(and 1 2)"), "2");
  EXPECT_EQ(run(I, "(or nil 3)"), "3");
}

TEST(Kernel, DefunAndRecursion) {
  Interpreter I;
  run(I, "(defun fact (n) (if (zp n) 1 (* n (fact (1- n)))))");
  EXPECT_EQ(run(I, "(fact 20)"), "2432902008176640000");
}

TEST(Kernel, GuardCheckedAtCall) {
  Interpreter I;
  run(I, "(defun g (n) (declare (xargs :guard (natp n))) n)");
  EXPECT_THROW(run(I, "(g -1)"), GuardViolation);
  I.config().guard_check = false;
  EXPECT_EQ(run(I, "(g -1)"), "-1");
}

TEST(Kernel, BuiltinGuards) {
  Interpreter I;
  EXPECT_THROW(run(I, "(+ 'a 1)"), GuardViolation);
  EXPECT_THROW(run(I, "(car 5)"), GuardViolation);
}

TEST(Kernel, MeasureXargCheckedDynamically) {
  Interpreter I;
  run(I, "(defun bad (n) (declare (xargs :measure (nfix n))) (if (zp n) 0 (bad n)))");
  EXPECT_THROW(run(I, "(bad 3)"), MeasureError);
}

TEST(Kernel, ApplyLambda) {
  Interpreter I;
  Value args[] = {num(3), num(4)};
  EXPECT_EQ(show(I.apply(test::read1("(lambda (x y) (+ x y))"), args)), "7");
  EXPECT_EQ(show(I.apply(sym("CONS"), args)), "(3 . 4)");
}

TEST(Kernel, ArityErrors) {
  Interpreter I;
  EXPECT_THROW(run(I, "(cons 1)"), LispError);
  EXPECT_THROW(run(I, "(undefined-fn 1)"), LispError);
}

TEST(Kernel, EventsAndUndo) {
  Interpreter I;
  run(I, "(defun a1 () 1) (defun a2 () 2) (defun a3 () 3)");
  auto idx = I.world().index_of(sym("A2"));
  ASSERT_TRUE(idx.has_value());
  I.undo(*idx);
  EXPECT_EQ(run(I, "(a1)"), "1");
  EXPECT_THROW(run(I, "(a2)"), LispError);
  EXPECT_THROW(run(I, "(a3)"), LispError);
  run(I, "(defun a2 () 22)");
  EXPECT_EQ(run(I, "(a2)"), "22");
}

TEST(Kernel, RedefinitionRejected) {
  Interpreter I;
  run(I, "(defun a1 () 1)");
  EXPECT_THROW(run(I, "(defun a1 () 2)"), LispError);
}

TEST(Kernel, CallDepthLimited) {
  Interpreter I;
  run(I, "(defun forever (n) (if (zp n) 0 (forever n)))");
  EXPECT_THROW(run(I, "(forever 1)"), EvalError);
}

}  // namespace
}  // namespace stlisp
