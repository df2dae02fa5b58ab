#include "stlisp/sexpr.hpp"
#include "stlisp/stobj_table.hpp"

#include <gtest/gtest.h>

#include <optional>
#include <random>
#include <string>
#include <utility>
#include <vector>

namespace stlisp {
namespace {

// Reference model: a plain association list, first match wins, put
// shadows by consing a new pair and rem drops every pair for the key.
struct AlistModel {
  std::vector<std::pair<std::string, long long>> pairs;

  std::optional<long long> get(const std::string& k) const {
    for (const auto& [key, v] : pairs)
      if (key == k) return v;
    return std::nullopt;
  }
  void put(const std::string& k, long long v) {
    rem(k);
    pairs.insert(pairs.begin(), {k, v});
  }
  void rem(const std::string& k) {
    std::erase_if(pairs, [&](const auto& p) { return p.first == k; });
  }
  std::size_t count() const { return pairs.size(); }
  std::string render() const {
    if (pairs.empty()) return "NIL";
    std::string s = "(";
    for (std::size_t i = 0; i < pairs.size(); ++i) {
      if (i) s += " ";
      s += "(" + pairs[i].first + " . " + std::to_string(pairs[i].second) + ")";
    }
    return s + ")";
  }
};

class TableLaws : public ::testing::TestWithParam<StobjTable::Rep> {};

TEST_P(TableLaws, RandomSequencesMatchAlistModel) {
  std::mt19937_64 rng(20240917);
  const std::vector<std::string> keys = {"A", "B", "C", "D", "E", "F", "G", "H"};
  StobjTable table(GetParam());
  AlistModel model;
  std::uniform_int_distribution<int> op(0, 5), key(0, 7), val(-50, 50);
  std::size_t divergences = 0;

  for (int step = 0; step < 5000; ++step) {
    const std::string& k = keys[key(rng)];
    const Value ks = sym(k);
    switch (op(rng)) {
      case 0:
      case 1: {
        const long long v = val(rng);
        table.put(ks, num(v));
        model.put(k, v);
        // read-over-write
        auto got = table.get(ks);
        if (!got || !equal(*got, num(v))) ++divergences;
        break;
      }
      case 2: {
        table.rem(ks);
        model.rem(k);
        // rem cancels put
        if (table.get(ks) || table.boundp(ks)) ++divergences;
        break;
      }
      case 3: {
        auto got = table.get(ks);
        auto want = model.get(k);
        if (got.has_value() != want.has_value() ||
            (want && !equal(*got, num(*want))))
          ++divergences;
        break;
      }
      case 4: {
        // put of another key leaves this one alone
        const std::string& other = keys[(key(rng) + 1) % keys.size()];
        if (other == k) break;
        auto before = table.get(ks);
        const long long v = val(rng);
        table.put(sym(other), num(v));
        model.put(other, v);
        auto after = table.get(ks);
        if (before.has_value() != after.has_value() ||
            (before && !equal(*before, *after)))
          ++divergences;
        break;
      }
      case 5:
        if (step % 997 == 0) {
          table.clear();
          model.pairs.clear();
        }
        break;
    }
    if (table.count() != model.count()) ++divergences;
    if (table.boundp(ks) != model.get(k).has_value()) ++divergences;
  }
  EXPECT_EQ(divergences, 0u);
  EXPECT_EQ(show(table.logical_view()), model.render());
}

INSTANTIATE_TEST_SUITE_P(BothReps, TableLaws,
                         ::testing::Values(StobjTable::Rep::Alist, StobjTable::Rep::Hash));

TEST(StobjTable, RepresentationsAgreeOnOrder) {
  StobjTable a(StobjTable::Rep::Alist), h(StobjTable::Rep::Hash);
  for (auto* t : {&a, &h}) {
    t->put(sym("X"), num(1));
    t->put(sym("Y"), num(2));
    t->put(sym("X"), num(3));
    t->rem(sym("Z"));
  }
  EXPECT_EQ(show(a.logical_view()), "((X . 3) (Y . 2))");
  EXPECT_TRUE(equal(a.logical_view(), h.logical_view()));
  EXPECT_EQ(a.count(), 2u);
  EXPECT_EQ(h.count(), 2u);
}

TEST(StobjTable, EmptyTable) {
  StobjTable t;
  EXPECT_EQ(t.count(), 0u);
  EXPECT_FALSE(t.get(sym("A")).has_value());
  EXPECT_TRUE(t.logical_view().is_nil());
}

}  // namespace
}  // namespace stlisp
