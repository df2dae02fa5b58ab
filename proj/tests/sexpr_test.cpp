#include "stlisp/error.hpp"
#include "stlisp/sexpr.hpp"

#include <gtest/gtest.h>

namespace stlisp {
namespace {

TEST(Reader, RoundTripsCommonForms) {
  for (const char* src : {"(A B C)", "(A . B)", "((SUM . 30) (LST))", "\"OFF\"", "-17",
                          "123456789012345678901234567890", "'X", "NIL", "(1 (2 (3)))"}) {
    EXPECT_EQ(show(read(src).at(0)), src) << src;
  }
}

TEST(Reader, UpcasesAndExpandsQuote) {
  auto forms = read("'foo ; comment\n (loop$ for i in x)");
  ASSERT_EQ(forms.size(), 2u);
  EXPECT_EQ(show(forms[0]), "'FOO");
  EXPECT_EQ(show(forms[0].car()), "QUOTE");
  EXPECT_EQ(show(forms[1]), "(LOOP$ FOR I IN X)");
}

TEST(Reader, EmptyListIsNil) {
  EXPECT_TRUE(read("()").at(0).is_nil());
  EXPECT_EQ(show(read("(a . nil)").at(0)), "(A)");
  EXPECT_TRUE(read("").empty());
}

TEST(Reader, KeywordsAndStrings) {
  Value k = read(":values").at(0);
  EXPECT_TRUE(k.is_keyword());
  EXPECT_EQ(k.symbol_name(), ":VALUES");
  Value s = read("\"a \\\"b\\\"\"").at(0);
  ASSERT_TRUE(s.is_string());
  EXPECT_EQ(s.as_string(), "a \"b\"");
}

TEST(Reader, ErrorsCarryLocations) {
  try {
    read("(a b\n  (c");
    FAIL() << "expected ReadError";
  } catch (const ReadError& e) {
    EXPECT_GE(e.line(), 1u);
  }
  EXPECT_THROW(read(")"), ReadError);
}

TEST(Reader, LocatedForms) {
  auto forms = read_located("(a)\n\n  (b c)");
  ASSERT_EQ(forms.size(), 2u);
  EXPECT_EQ(forms[0].line, 1u);
  EXPECT_EQ(forms[1].line, 3u);
  EXPECT_EQ(forms[1].column, 3u);
}

TEST(Value, StructuralEquality) {
  EXPECT_TRUE(equal(read("(1 (2 . 3) \"x\")").at(0), read("(1 (2 . 3) \"x\")").at(0)));
  EXPECT_FALSE(equal(read("(1 2)").at(0), read("(1 2 3)").at(0)));
  EXPECT_TRUE(sym("FOO").eq(sym("FOO")));
  EXPECT_TRUE(sym("NIL").is_nil());
}

TEST(Value, CarCdrOfNilIsNil) {
  EXPECT_TRUE(Value{}.car().is_nil());
  EXPECT_TRUE(Value{}.cdr().is_nil());
  EXPECT_THROW(num(3).car(), EvalError);
}

}  // namespace
}  // namespace stlisp
