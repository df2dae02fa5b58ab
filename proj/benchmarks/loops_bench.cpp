#include "stlisp/interpreter.hpp"
#include "stlisp/sexpr.hpp"

#include <benchmark/benchmark.h>

#include <string>

namespace {

using namespace stlisp;

std::string sum_loop(long n) {
  return "(loop$ WITH i = " + std::to_string(n) +
         " WITH s = 0 DO (if (zp i) (return s) (progn (setq s (+ s i)) (setq i (1- i)))))";
}

void run_loop(benchmark::State& state, Config config) {
  Interpreter I(config);
  const Value form = read(sum_loop(state.range(0))).at(0);
  for (auto _ : state) benchmark::DoNotOptimize(I.process(form));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_DoLoopLogical(benchmark::State& s) { run_loop(s, Config::logical()); }
void BM_DoLoopNative(benchmark::State& s) { run_loop(s, Config::native()); }
BENCHMARK(BM_DoLoopLogical)->Arg(100)->Arg(1000);
BENCHMARK(BM_DoLoopNative)->Arg(100)->Arg(1000);

void run_stobj_loop(benchmark::State& state, Config config) {
  Interpreter I(config);
  I.process_source("(defstobj acc (total :type integer :initially 0))");
  const Value form = read(
      "(loop$ WITH i = " + std::to_string(state.range(0)) +
      " DO :VALUES (acc) (if (zp i) (return acc)"
      " (progn (setq acc (update-total (+ i (total acc)) acc)) (setq i (1- i)))))").at(0);
  for (auto _ : state) benchmark::DoNotOptimize(I.process(form));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_StobjLoopLogical(benchmark::State& s) { run_stobj_loop(s, Config::logical()); }
void BM_StobjLoopNative(benchmark::State& s) { run_stobj_loop(s, Config::native()); }
BENCHMARK(BM_StobjLoopLogical)->Arg(1000);
BENCHMARK(BM_StobjLoopNative)->Arg(1000);

}  // namespace
