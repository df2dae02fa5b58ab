#include "stlisp/error.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

namespace stlisp {
namespace {

using test::run;

class BothSemantics : public ::testing::TestWithParam<bool> {
 protected:
  Config config() const { return GetParam() ? Config::native() : Config::logical(); }
};

TEST_P(BothSemantics, FieldsAccessorsAndUpdaters) {
  Interpreter I(config());
  run(I, "(defstobj st (n :type integer :initially 7) fld)");
  EXPECT_EQ(run(I, "(n st)"), "7");
  EXPECT_EQ(run(I, "(update-n 9 st)"), "<ST>");
  EXPECT_EQ(run(I, "(n st)"), "9");
  EXPECT_EQ(run(I, "(fld st)"), "NIL");
  EXPECT_THROW(run(I, "(update-n 'a st)"), GuardViolation);
  EXPECT_EQ(run(I, "(n st)"), "9");
}

TEST_P(BothSemantics, SwitchInTable) {
  Interpreter I(config());
  run(I,
      "(defstobj stobj-table (tbl :type (stobj-table)))"
      "(defstobj switch fld)"
      "(defun flip-switch (stobj-table)"
      "  (declare (xargs :stobjs (stobj-table)))"
      "  (stobj-let ((switch (tbl-get 'switch stobj-table (create-switch))))"
      "             (switch) (update-fld (not (fld switch)) switch)"
      "             stobj-table))"
      "(defun print-switch (stobj-table)"
      "  (declare (xargs :stobjs (stobj-table)))"
      "  (stobj-let ((switch (tbl-get 'switch stobj-table (create-switch))))"
      "             (current) (if (fld switch) \"ON\" \"OFF\")"
      "             current))");
  EXPECT_EQ(run(I, "(print-switch stobj-table)"), "\"OFF\"");
  EXPECT_EQ(run(I, "(tbl-boundp 'switch stobj-table)"), "NIL");
  run(I, "(flip-switch stobj-table)");
  EXPECT_EQ(run(I, "(print-switch stobj-table)"), "\"ON\"");
  EXPECT_EQ(run(I, "(tbl-count stobj-table)"), "1");
  run(I, "(flip-switch stobj-table)");
  EXPECT_EQ(run(I, "(print-switch stobj-table)"), "\"OFF\"");
}

TEST_P(BothSemantics, RetractionRemovesUndoneKeys) {
  Interpreter I(config());
  run(I,
      "(defstobj stobj-table (tbl :type (stobj-table)))"
      "(defstobj other-table (tbl2 :type (stobj-table)))"
      "(defstobj counter (hits :type integer :initially 0))"
      "(defstobj switch fld)"
      "(defun put-switch (stobj-table)"
      "  (declare (xargs :stobjs (stobj-table)))"
      "  (stobj-let ((switch (tbl-get 'switch stobj-table (create-switch))))"
      "             (switch) (update-fld t switch) stobj-table))"
      "(defun put-both (other-table)"
      "  (declare (xargs :stobjs (other-table)))"
      "  (stobj-let ((switch (tbl2-get 'switch other-table (create-switch)))"
      "              (counter (tbl2-get 'counter other-table (create-counter))))"
      "             (switch counter)"
      "             (mv (update-fld t switch) (update-hits 1 counter))"
      "             other-table))"
      "(put-switch stobj-table)"
      "(put-both other-table)");
  EXPECT_EQ(run(I, "(tbl-count stobj-table)"), "1");
  EXPECT_EQ(run(I, "(tbl2-count other-table)"), "2");
  I.undo(*I.world().index_of(sym("SWITCH")));
  EXPECT_EQ(run(I, "(tbl-boundp 'switch stobj-table)"), "NIL");
  EXPECT_EQ(run(I, "(tbl-count stobj-table)"), "0");
  EXPECT_EQ(run(I, "(tbl2-boundp 'switch other-table)"), "NIL");
  EXPECT_EQ(run(I, "(tbl2-boundp 'counter other-table)"), "T");
  EXPECT_EQ(run(I, "(tbl2-count other-table)"), "1");
}

INSTANTIATE_TEST_SUITE_P(Modes, BothSemantics, ::testing::Values(false, true),
                         [](const auto& info) { return info.param ? "InPlace" : "CopyOnWrite"; });

TEST(Stobjs, CopyOnWriteKeepsOldValues) {
  Interpreter I(Config::logical());
  run(I, "(defstobj st fld)");
  Value before = I.global_stobj(sym("ST"));
  run(I, "(update-fld 5 st)");
  EXPECT_EQ(show(logical_of(before)), "(NIL)");
  EXPECT_EQ(show(logical_of(I.global_stobj(sym("ST")))), "(5)");
}

TEST(Stobjs, BankViewsAgreeAcrossSemantics) {
  const char* src =
      "(defstobj st fld (k :type integer :initially 0))"
      "(update-fld '(1 2) st)"
      "(update-k 3 st)";
  Interpreter a(Config::logical()), b(Config::native());
  run(a, src);
  run(b, src);
  EXPECT_TRUE(equal(a.bank_logical_view(), b.bank_logical_view()));
  EXPECT_EQ(show(a.bank_logical_view()), "((ST (1 2) 3))");
}

TEST(Stobjs, SemanticsSwitchPreservesState) {
  Interpreter I(Config::logical());
  run(I, "(defstobj st fld) (update-fld 4 st)");
  I.set_stobj_semantics(StobjSemantics::InPlace);
  EXPECT_EQ(run(I, "(fld st)"), "4");
  I.set_stobj_semantics(StobjSemantics::CopyOnWrite);
  EXPECT_EQ(run(I, "(fld st)"), "4");
}

}  // namespace
}  // namespace stlisp
