#include <cmath>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include <lssfind/eval.hpp>

#include "support.hpp"

using namespace lss;
using lss::testing::two_way_spec;

namespace {

Forest two_way_forest(std::uint64_t seed, std::size_t trees = 200) {
  const auto data = sample_dataset(two_way_spec(), 2000, 2, seed);
  RfConfig c;
  c.n_trees = trees;
  c.mtry = 1;
  c.min_child_fraction = 0.4;
  c.seed = seed;
  return fit_forest(data, c);
}

// First occurrence of each feature along a path.
SignedSet first_occurrences(std::span<const SignedFeature> path) {
  std::vector<SignedFeature> out;
  std::set<std::size_t> seen;
  for (const auto& f : path) {
    if (seen.insert(f.index).second) out.push_back(f);
  }
  return SignedSet(out);
}

}  // namespace

TEST(Jaccard, Examples) {
  const std::vector<SignedSet> a{SignedSet{minus(1), minus(2)}, SignedSet{minus(3), minus(4)}};
  const std::vector<SignedSet> b{SignedSet{minus(1), minus(2)}};
  const std::vector<SignedSet> c{SignedSet{plus(1)}};
  EXPECT_EQ(jaccard_score(a, a), 1.0);
  EXPECT_EQ(jaccard_score(a, c), 0.0);
  EXPECT_EQ(jaccard_score(a, b), 0.5);
  EXPECT_EQ(jaccard_score({}, {}), 1.0);
  EXPECT_EQ(jaccard_score(a, {}), 0.0);
}

TEST(Jaccard, SymmetricAndOneOnlyWhenEqual) {
  std::mt19937_64 rng(51);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<SignedSet> x, y;
    for (auto n = rng() % 4; n > 0; --n) x.push_back(lss::testing::random_signed_set(rng, 3, 2));
    for (auto n = rng() % 4; n > 0; --n) y.push_back(lss::testing::random_signed_set(rng, 3, 2));
    const double s = jaccard_score(x, y);
    EXPECT_EQ(s, jaccard_score(y, x));
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
    const std::set<SignedSet> xs(x.begin(), x.end()), ys(y.begin(), y.end());
    EXPECT_EQ(s == 1.0, xs == ys);
  }
}

TEST(OracleFeatureSet, Examples) {
  const auto spec = two_way_spec();
  const std::vector<SignedFeature> both{minus(1), minus(2)};
  const std::vector<SignedFeature> noisy{minus(5), minus(1)};
  const std::vector<SignedFeature> flipped{plus(1), minus(2)};
  EXPECT_EQ(oracle_feature_set(spec, both), (SignedSet{minus(1), minus(2)}));
  EXPECT_EQ(oracle_feature_set(spec, noisy), SignedSet{minus(1)});
  EXPECT_EQ(oracle_feature_set(spec, flipped), SignedSet{plus(1)});
}

TEST(OracleFeatureSet, RepeatedFeatureCountsOnce) {
  const std::vector<SignedFeature> path{minus(1), plus(1), minus(2)};
  EXPECT_EQ(oracle_feature_set(two_way_spec(), path), (SignedSet{minus(1), minus(2)}));
}

TEST(OracleFeatureSet, SignConsistentSubsetOfFirstOccurrences) {
  LssSpec spec;
  spec.interactions = {{SignedSet{minus(1), plus(2)}, 1.0}, {SignedSet{minus(3)}, -2.0},
                       {SignedSet{plus(4), plus(5), minus(6)}, 0.5}};
  for (std::size_t k = 1; k <= 6; ++k) spec.thresholds[k] = 0.1 * static_cast<double>(k);
  std::mt19937_64 rng(52);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<SignedFeature> path;
    for (auto n = rng() % 9; n > 0; --n) {
      path.push_back({1 + rng() % 8, rng() % 2 ? Sign::Plus : Sign::Minus});
    }
    const auto oracle = oracle_feature_set(spec, path);
    EXPECT_TRUE(oracle.sign_consistent());
    EXPECT_TRUE(first_occurrences(path).includes(oracle));
    for (const auto& f : oracle) EXPECT_LE(f.index, 6u);
  }
}

TEST(OracleFeatureSet, RejectsOverlap) {
  LssSpec spec;
  spec.interactions = {{SignedSet{minus(1), minus(2)}, 1.0}, {SignedSet{minus(2), minus(3)}, 1.0}};
  spec.thresholds = {{1, 0.5}, {2, 0.5}, {3, 0.5}};
  spec.allow_overlap = true;
  const std::vector<SignedFeature> path{minus(1)};
  EXPECT_THROW(oracle_feature_set(spec, path), ValidationError);
}

TEST(BoundB, ZeroAndMonotone) {
  const TheoremConstants c{1.0, 0.25, 0.3, 2, true};
  EXPECT_EQ(bound_b(0.0, c), 0.0);
  double last = 0.0;
  for (double eps = 1e-12; eps < 1e-2; eps *= 1.7) {
    const double b = bound_b(eps, c);
    EXPECT_GT(b, last);
    last = b;
  }
  const TheoremConstants steep{1.0, 0.4, 0.45, 1, true};
  EXPECT_LT(bound_b(1e-300, steep), 1e-60);  // continuity at 0
  EXPECT_THROW(bound_b(-1.0, c), ValidationError);
}

TEST(BoundB, MatchesHighPrecisionReference) {
  // (256e-6)^(0.0081 / ln 4) evaluated with 40-digit arithmetic.
  const TheoremConstants c{1.0, 0.25, 0.3, 2, true};
  EXPECT_NEAR(bound_b(1e-6, c), 0.9528261149244587651823648, 1e-13);
}

TEST(OptimalMtry, Examples) {
  EXPECT_EQ(optimal_mtry(30, 10), 10u);
  EXPECT_EQ(optimal_mtry(1000, 5), 497u);
  EXPECT_EQ(optimal_mtry(4, 1), 1u);
}

TEST(TheoremConstants, FromSpec) {
  LssSpec spec;
  spec.interactions = {{SignedSet{minus(1), minus(2)}, -0.7}, {SignedSet{plus(3)}, 2.0}};
  spec.thresholds = {{1, 0.2}, {2, 0.5}, {3, 0.9}};
  const auto c = theorem_constants(spec, 10, 20, std::nullopt);
  EXPECT_DOUBLE_EQ(c.c_beta, 0.7);
  EXPECT_NEAR(c.c_gamma, 0.1, 1e-15);
  EXPECT_EQ(c.s, 3u);
  ASSERT_TRUE(c.mtry_condition_met);
  // C_m p + (1-C_m) s <= mtry <= (1-C_m)(p-s) at the reported value.
  EXPECT_LE(c.c_m * 20 + (1 - c.c_m) * 3, 10 + 1e-9);
  EXPECT_LE(10, (1 - c.c_m) * 17 + 1e-9);
  EXPECT_GT(c.c_m, 0.0);
  EXPECT_LT(c.c_m, 0.5);
  const auto failed = theorem_constants(spec, 20, 20, std::nullopt);
  EXPECT_FALSE(failed.mtry_condition_met);
  EXPECT_TRUE(std::isnan(failed.c_m));
  EXPECT_EQ(theorem_constants(spec, 20, 20, 0.2).c_m, 0.2);
}

TEST(EtaWindow, Bounds) {
  const TheoremConstants c{1.0, 0.25, 0.3, 2, true};
  const auto w = eta_window(1e-6, c);
  EXPECT_NEAR(w.lower, 4 * bound_b(1e-6, c), 1e-15);
  EXPECT_NEAR(w.upper, 0.045, 1e-15);
  EXPECT_FALSE(w.satisfiable());
  const TheoremConstants steep{1.0, 0.4, 0.45, 1, true};
  EXPECT_TRUE(eta_window(1e-20, steep).satisfiable());
}

TEST(UnionInteractions, Enumerates) {
  LssSpec spec;
  spec.interactions = {{SignedSet{minus(1), minus(2)}, 1.0}, {SignedSet{minus(3)}, 1.0}};
  spec.thresholds = {{1, 0.5}, {2, 0.5}, {3, 0.5}};
  const auto u = union_signed_interactions(spec);
  const std::set<SignedSet> got(u.begin(), u.end());
  const std::set<SignedSet> want{SignedSet{minus(1), minus(2)}, SignedSet{minus(3)}, SignedSet{plus(3)},
                                 SignedSet{minus(1), minus(2), minus(3)}, SignedSet{minus(1), minus(2), plus(3)}};
  EXPECT_EQ(got, want);
  EXPECT_THROW(union_signed_interactions(spec, 4), ValidationError);
}

TEST(NonInteractions, ExcludeUnions) {
  const auto spec = two_way_spec();
  const auto non = default_non_interactions(spec, 3);
  const std::set<SignedSet> got(non.begin(), non.end());
  EXPECT_TRUE(got.contains(SignedSet{minus(1)}));
  EXPECT_TRUE(got.contains((SignedSet{minus(1), plus(2)})));
  EXPECT_TRUE(got.contains((SignedSet{minus(1), minus(2), plus(3)})));
  EXPECT_FALSE(got.contains((SignedSet{minus(1), minus(2)})));
}

TEST(CheckBounds, TwoWayForest) {
  const auto f = two_way_forest(61);
  BoundCheckOptions options;
  options.c_m_fallback = 0.25;  // p = s here, so the mtry condition cannot hold
  const auto report = check_theorem_bounds(f, two_way_spec(), 0.01, options);
  EXPECT_FALSE(report.constants.mtry_condition_met);
  bool saw_interaction = false, saw_flip = false;
  for (const auto& e : report.entries) {
    EXPECT_LE(e.dwp, e.cap + 1e-12);
    if (e.set == SignedSet{minus(1), minus(2)}) {
      saw_interaction = true;
      EXPECT_TRUE(e.union_interaction);
      EXPECT_GE(e.dwp, 0.25 - 0.03);
    }
    if (e.set == SignedSet{minus(1), plus(2)}) {
      saw_flip = true;
      ASSERT_TRUE(e.ceiling);
      EXPECT_LE(e.dwp, 0.25 * (1 - 0.25 * 0.25 / 2) + 0.01);
    }
  }
  EXPECT_TRUE(saw_interaction);
  EXPECT_TRUE(saw_flip);
}

TEST(CheckBounds, CapNeverViolatedOnRandomForests) {
  std::mt19937_64 rng(62);
  LssSpec spec = two_way_spec();
  spec.interactions.push_back({SignedSet{plus(3)}, 0.5});
  spec.thresholds[3] = 0.3;
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t p = 3 + rng() % 5;
    const auto f = fit_forest(lss::testing::random_dataset(rng, 30 + rng() % 150, p), lss::testing::random_config(rng, p));
    BoundCheckOptions options;
    for (int q = 0; q < 10; ++q) options.extra_queries.push_back(lss::testing::random_signed_set(rng, p, 4));
    EXPECT_NO_THROW(check_theorem_bounds(f, spec, f.config.epsilon, options));
  }
}

TEST(CheckBounds, NoiselessInteractionNearItsCap) {
  int inside = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const double v = dwp_exact(two_way_forest(700 + seed, 100), SignedSet{minus(1), minus(2)}, 0.01).value;
    inside += (v >= 0.20 && v <= 0.25 + 1e-12) ? 1 : 0;
  }
  EXPECT_GE(inside, 19);
}

TEST(RunScenario, ZeroRunsIsEmpty) {
  ScenarioConfig c;
  const auto r = run_scenario(c, 0, {});
  EXPECT_TRUE(r.runs.empty());
  EXPECT_EQ(r.mean, 0.0);
}

TEST(RunScenario, DeterministicAcrossThreadCounts) {
  ScenarioConfig c;
  c.n = 300;
  c.p = 6;
  c.snr = 10;
  c.seed = 3;
  FindParams params;
  params.n_trees = 20;
  const auto a = run_scenario(c, 4, params, 1);
  const auto b = run_scenario(c, 4, params, 4);
  ASSERT_EQ(a.runs.size(), 4u);
  for (std::size_t r = 0; r < 4; ++r) {
    EXPECT_EQ(a.runs[r].score, b.runs[r].score);
    EXPECT_EQ(a.runs[r].found, b.runs[r].found);
    EXPECT_GE(a.runs[r].score, 0.0);
    EXPECT_LE(a.runs[r].score, 1.0);
  }
  EXPECT_EQ(a.mean, b.mean);
  EXPECT_EQ(a.sd, b.sd);
}
