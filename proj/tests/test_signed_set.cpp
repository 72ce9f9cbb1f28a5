#include <algorithm>
#include <random>

#include <gtest/gtest.h>

#include <lssfind/signed_set.hpp>

#include "support.hpp"

using namespace lss;

TEST(CanonicalSignedSet, SortsByIndexThenSign) {
  const auto s = canonical_signed_set({minus(2), plus(1)});
  ASSERT_EQ(s.size(), 2u);
  EXPECT_EQ(s[0], plus(1));
  EXPECT_EQ(s[1], minus(2));
}

TEST(CanonicalSignedSet, RemovesDuplicates) {
  EXPECT_EQ(canonical_signed_set({minus(1), minus(1)}), SignedSet({minus(1)}));
}

TEST(CanonicalSignedSet, EmptyIsValid) {
  const auto s = canonical_signed_set({});
  EXPECT_TRUE(s.empty());
  EXPECT_EQ(to_string(s), "");
}

TEST(CanonicalSignedSet, RejectsIndexZero) {
  EXPECT_THROW(canonical_signed_set({{0, Sign::Minus}}), ValidationError);
}

TEST(CanonicalSignedSet, IdempotentAndOrderInsensitive) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<SignedFeature> items;
    const auto n = std::uniform_int_distribution<int>(0, 8)(rng);
    for (int i = 0; i < n; ++i) {
      items.push_back({std::uniform_int_distribution<std::size_t>(1, 5)(rng),
                       std::bernoulli_distribution(0.5)(rng) ? Sign::Plus : Sign::Minus});
    }
    const auto once = canonical_signed_set(items);
    EXPECT_EQ(canonical_signed_set(once.members()), once);
    std::shuffle(items.begin(), items.end(), rng);
    EXPECT_EQ(canonical_signed_set(items), once);
    EXPECT_TRUE(std::adjacent_find(once.begin(), once.end(), std::greater_equal<>()) == once.end());
  }
}

TEST(SignedSetString, RoundTrip) {
  const SignedSet s{minus(1), minus(2), plus(7)};
  EXPECT_EQ(to_string(s), "1-,2-,7+");
  EXPECT_EQ(parse_signed_set("1-,2-,7+"), s);
  EXPECT_EQ(parse_signed_set(" 7+ , 2-,1- "), s);
  EXPECT_TRUE(parse_signed_set("").empty());
}

TEST(SignedSetString, RejectsMalformed) {
  for (const char* bad : {"1", "-1", "1*", "0-", "1-,", "a-", "1-2-", ",1-"}) {
    EXPECT_THROW(parse_signed_set(bad), ValidationError) << bad;
  }
}

TEST(SignedSet, Inclusion) {
  const SignedSet big{minus(1), plus(3), minus(4)};
  EXPECT_TRUE(big.includes(SignedSet{minus(1), minus(4)}));
  EXPECT_TRUE(big.includes(SignedSet{}));
  EXPECT_FALSE(big.includes(SignedSet{plus(1)}));
  EXPECT_TRUE(big.contains(plus(3)));
}

TEST(SignedSet, SignConsistency) {
  EXPECT_TRUE((SignedSet{minus(1), plus(2)}).sign_consistent());
  EXPECT_FALSE((SignedSet{minus(1), plus(1)}).sign_consistent());
}

TEST(SignedSet, UnionAndMaxIndex) {
  const auto u = SignedSet{minus(1)}.united(SignedSet{minus(5), minus(1)});
  EXPECT_EQ(u, (SignedSet{minus(1), minus(5)}));
  EXPECT_EQ(u.max_index(), 5u);
  EXPECT_EQ(SignedSet{}.max_index(), 0u);
}
