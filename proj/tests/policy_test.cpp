#include "aerisai/policy.hpp"

#include <gtest/gtest.h>

namespace aerisai::cpabe {
namespace {

TEST(ParsePolicy, SingleLeaf) {
  AccessTree t = parse_policy("role:client");
  EXPECT_TRUE(t.root.is_leaf());
  EXPECT_EQ(t.root.attribute, "role:client");
  EXPECT_EQ(t.root.threshold, 1u);
}

TEST(ParsePolicy, AndOrStructure) {
  AccessTree t = parse_policy("(a AND b) OR c");
  ASSERT_FALSE(t.root.is_leaf());
  EXPECT_EQ(t.root.threshold, 1u);  // OR
  ASSERT_EQ(t.root.children.size(), 2u);
  const PolicyNode& land = t.root.children[0];
  EXPECT_EQ(land.threshold, 2u);  // AND
  ASSERT_EQ(land.children.size(), 2u);
  EXPECT_EQ(land.children[0].attribute, "a");
  EXPECT_EQ(land.children[1].attribute, "b");
  EXPECT_EQ(land.children[0].index, 1u);
  EXPECT_EQ(land.children[1].index, 2u);
  EXPECT_EQ(t.root.children[1].attribute, "c");
}

TEST(ParsePolicy, ThresholdGate) {
  AccessTree t = parse_policy("2 of (a, b, c)");
  ASSERT_FALSE(t.root.is_leaf());
  EXPECT_EQ(t.root.threshold, 2u);
  EXPECT_EQ(t.root.children.size(), 3u);
}

TEST(ParsePolicy, AndBindsTighterThanOr) {
  AccessTree t = parse_policy("a AND b OR c");
  EXPECT_EQ(t.root.threshold, 1u);
  ASSERT_EQ(t.root.children.size(), 2u);
  EXPECT_EQ(t.root.children[0].threshold, 2u);
}

TEST(ParsePolicy, PrintParseRoundTrip) {
  for (const char* text :
       {"role:client", "(a AND b) OR c", "2 of (a, b, c)", "(x OR y) AND (z OR w)",
        "2 of (a AND b, c, d OR e)", "a AND b AND c", "1 of (a)"}) {
    AccessTree t = parse_policy(text);
    std::string printed = print_policy(t);
    AccessTree t2 = parse_policy(printed);
    EXPECT_EQ(print_policy(t2), printed) << text;
  }
}

TEST(ParsePolicy, SyntaxErrorsCarryPosition) {
  for (const char* bad : {"", "a AND", "(a OR b", "4 of (a, b)", "0 of (a)", "a b",
                          "A", "2 of", "()"}) {
    try {
      parse_policy(bad);
      FAIL() << "expected syntax error for: " << bad;
    } catch (const Error& e) {
      EXPECT_EQ(e.code(), Err::kPolicySyntax) << bad;
      EXPECT_NE(std::string(e.what()).find("position"), std::string::npos);
    }
  }
}

TEST(Satisfies, BasicTable) {
  EXPECT_TRUE(satisfies(parse_policy("a"), {"a"}));
  EXPECT_FALSE(satisfies(parse_policy("a"), {"b"}));
  EXPECT_FALSE(satisfies(parse_policy("a AND b"), {"a"}));
  EXPECT_TRUE(satisfies(parse_policy("a AND b"), {"a", "b"}));
  EXPECT_TRUE(satisfies(parse_policy("(a AND b) OR c"), {"c"}));
  EXPECT_FALSE(satisfies(parse_policy("(a AND b) OR c"), {"a"}));
}

TEST(Satisfies, TwoOfThreeExhaustive) {
  AccessTree t = parse_policy("2 of (a, b, c)");
  const char* names[3] = {"a", "b", "c"};
  for (unsigned mask = 0; mask < 8; ++mask) {
    std::unordered_set<std::string> attrs;
    for (int i = 0; i < 3; ++i)
      if (mask & (1u << i)) attrs.insert(names[i]);
    bool expected = __builtin_popcount(mask) >= 2;
    EXPECT_EQ(satisfies(t, attrs), expected) << "mask=" << mask;
  }
}

TEST(AccessTree, LeafCount) {
  EXPECT_EQ(parse_policy("a").leaf_count(), 1u);
  EXPECT_EQ(parse_policy("(a AND b) OR c").leaf_count(), 3u);
  EXPECT_EQ(parse_policy("2 of (a AND b, c, d OR e)").leaf_count(), 5u);
}

}  // namespace
}  // namespace aerisai::cpabe
