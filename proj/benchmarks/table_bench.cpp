#include "stlisp/stobj_table.hpp"

#include <benchmark/benchmark.h>

#include <string>
#include <vector>

namespace {

using namespace stlisp;

void put_get(benchmark::State& state, StobjTable::Rep rep) {
  std::vector<Value> keys;
  for (long i = 0; i < state.range(0); ++i) keys.push_back(sym("KEY" + std::to_string(i)));
  for (auto _ : state) {
    StobjTable t(rep);
    for (std::size_t i = 0; i < keys.size(); ++i) t.put(keys[i], num(static_cast<long long>(i)));
    for (const Value& k : keys) benchmark::DoNotOptimize(t.get(k));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0) * 2);
}

void BM_TableAlist(benchmark::State& s) { put_get(s, StobjTable::Rep::Alist); }
void BM_TableHash(benchmark::State& s) { put_get(s, StobjTable::Rep::Hash); }
BENCHMARK(BM_TableAlist)->Arg(16)->Arg(256);
BENCHMARK(BM_TableHash)->Arg(16)->Arg(256);

}  // namespace
