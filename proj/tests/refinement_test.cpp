#include "stlisp/error.hpp"
#include "stlisp/refinement.hpp"
#include "test_util.hpp"

#include <gtest/gtest.h>

#include <string>

namespace stlisp {
namespace {

// The corpus files end with calls to run; only the definitions are wanted.
std::string definitions(const std::string& name) {
  std::string src = test::slurp(test::corpus_path(name));
  return src.substr(0, src.find("\n(run st)"));
}

std::string chain_text(const SchedulerRun& r) {
  std::string s;
  for (const auto& n : r.rank_chain) s += (s.empty() ? "" : " ") + n.str();
  return s;
}

TEST(Scheduler, WellBehavedAttachmentsTerminate) {
  for (Config c : {Config::logical(), Config::native()}) {
    Interpreter I(c);
    I.process_source(definitions("scheduler.lisp"));
    EXPECT_EQ(sum_rank(I, I.global_stobj(sym("ST"))), 3);
    SchedulerRun r = run_scheduler(I, sym("ST"));
    EXPECT_EQ(chain_text(r), "3 2 1 0");
    EXPECT_EQ(r.picks.size(), 3u);
    EXPECT_EQ(r.report, "completed: all processes have rank 0 (last pick 0)");
  }
}

TEST(Scheduler, RunDefunMatchesDriver) {
  Interpreter I;
  auto results = I.process_source(test::slurp(test::corpus_path("scheduler.lisp")));
  ASSERT_FALSE(I.output().empty());
  EXPECT_EQ(I.output().front(), "completed: all processes have rank 0 (last pick 0)");
  EXPECT_EQ(test::run(I, "(sum-rank (proc-ids) st)"), "0");
}

TEST(Scheduler, ChildrenCreatedLazily) {
  Interpreter I;
  I.process_source(definitions("scheduler.lisp"));
  EXPECT_EQ(test::run(I, "(procs-boundp 'proc0 st)"), "NIL");
  EXPECT_EQ(test::run(I, "(procs-count st)"), "0");
}

TEST(Scheduler, DeadlockReportsError) {
  Interpreter I;
  I.process_source(definitions("scheduler_deadlock.lisp"));
  SchedulerRun r = run_scheduler(I, sym("ST"));
  EXPECT_TRUE(r.picks.empty());
  EXPECT_EQ(r.report, "error: picked process 0 is not ready with sum-rank 3 remaining");
}

TEST(Scheduler, AdversarialExecCaught) {
  Interpreter I;
  I.process_source(definitions("scheduler_adversarial.lisp"));
  EXPECT_THROW(run_scheduler(I, sym("ST")), MeasureError);
  ConstraintReport rep = check_constraints(I, 7, 200);
  EXPECT_GT(rep.failures, 0u);
  ASSERT_FALSE(rep.examples.empty());
  EXPECT_EQ(rep.examples.front().constraint, "EXEC-NO-INTERFERE");
}

TEST(Scheduler, PriorityAttachmentsAlsoTerminate) {
  Interpreter I;
  I.process_source(definitions("scheduler_priority.lisp"));
  SchedulerRun r = run_scheduler(I, sym("ST"));
  EXPECT_EQ(chain_text(r), "3 2 1 0");
}

TEST(Constraints, WellBehavedHoldOverSeededTrials) {
  Interpreter I;
  I.process_source(definitions("scheduler.lisp"));
  ConstraintReport rep = check_constraints(I, 0, 1000);
  EXPECT_EQ(rep.trials, 1000u);
  EXPECT_EQ(rep.failures, 0u);
  EXPECT_GT(rep.checks, 0u);
  // Checking leaves the bank untouched.
  EXPECT_EQ(sum_rank(I, I.global_stobj(sym("ST"))), 3);
}

TEST(Constraints, DeterministicForSeed) {
  Interpreter a, b;
  a.process_source(definitions("scheduler_adversarial.lisp"));
  b.process_source(definitions("scheduler_adversarial.lisp"));
  EXPECT_EQ(check_constraints(a, 42, 100).describe(), check_constraints(b, 42, 100).describe());
}

TEST(Attachments, ArityMismatchRejected) {
  Interpreter I;
  I.process_source(definitions("scheduler.lisp"));
  test::run(I, "(defun bad-rank (p q st) (declare (xargs :stobjs (st))) (list p q))");
  EXPECT_THROW(test::run(I, "(defattach rank bad-rank)"), LispError);
}

TEST(Attachments, UnattachedCallFails) {
  Interpreter I;
  std::string src = definitions("scheduler.lisp");
  I.process_source(src.substr(0, src.find("(defattach")));
  EXPECT_THROW(test::run(I, "(proc-ids)"), EvalError);
}

}  // namespace
}  // namespace stlisp
