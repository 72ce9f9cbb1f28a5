#include <random>

#include <gtest/gtest.h>

#include <lssfind/lss_spec.hpp>

#include "support.hpp"

using namespace lss;
using lss::testing::two_way_spec;

namespace {

bool mentions(const ValidationReport& r, const std::string& text) {
  for (const auto& v : r.violations) {
    if (v.find(text) != std::string::npos) return true;
  }
  return false;
}

}  // namespace

TEST(ValidateSpec, TwoWayExampleIsValid) { EXPECT_TRUE(validate_lss_spec(two_way_spec()).ok()); }

TEST(ValidateSpec, ReportsOverlap) {
  LssSpec spec;
  spec.interactions = {{SignedSet{minus(1), minus(2)}, 1.0}, {SignedSet{minus(2), minus(3)}, 1.0}};
  spec.thresholds = {{1, 0.5}, {2, 0.5}, {3, 0.5}};
  const auto report = validate_lss_spec(spec);
  EXPECT_TRUE(mentions(report, "overlap at feature 2"));
  spec.allow_overlap = true;
  EXPECT_TRUE(validate_lss_spec(spec).ok());
}

TEST(ValidateSpec, ReportsThresholdOutsideUnitInterval) {
  auto spec = two_way_spec();
  spec.thresholds[1] = 1.0;
  EXPECT_TRUE(mentions(validate_lss_spec(spec), "threshold not in (0,1)"));
}

TEST(ValidateSpec, ReportsEveryViolation) {
  LssSpec spec;
  spec.interactions = {{SignedSet{minus(1), plus(1)}, 0.0}, {SignedSet{minus(4)}, 1.0}};
  spec.thresholds = {{1, 0.0}};
  spec.correlation_alpha = 1.0;
  const auto report = validate_lss_spec(spec);
  EXPECT_FALSE(report.ok());
  EXPECT_GE(report.violations.size(), 5u);
}

TEST(ResponseMean, TwoWayExample) {
  const auto spec = two_way_spec();
  EXPECT_EQ(response_mean(spec, std::vector<double>{0.3, 0.4}), 1.0);
  EXPECT_EQ(response_mean(spec, std::vector<double>{0.6, 0.4}), 0.0);
}

TEST(ResponseMean, InterceptPlusTerms) {
  LssSpec spec;
  spec.intercept = 2.0;
  spec.interactions = {{SignedSet{minus(1)}, 3.0}, {SignedSet{minus(2), minus(3)}, -1.0}};
  spec.thresholds = {{1, 0.5}, {2, 0.5}, {3, 0.5}};
  EXPECT_DOUBLE_EQ(response_mean(spec, std::vector<double>{0.1, 0.1, 0.1}), 4.0);
}

TEST(ResponseMean, BoundarySatisfiesBothSigns) {
  EXPECT_TRUE(indicator(Sign::Minus, 0.5, 0.5));
  EXPECT_TRUE(indicator(Sign::Plus, 0.5, 0.5));
}

TEST(ResponseMean, ShortPointThrows) {
  EXPECT_THROW(response_mean(two_way_spec(), std::vector<double>{0.1}), ValidationError);
}

TEST(ResponseMean, PiecewiseConstantWithinCells) {
  LssSpec spec;
  spec.intercept = 0.5;
  spec.interactions = {{SignedSet{minus(1), plus(3)}, 2.0}, {SignedSet{minus(2)}, -1.5}};
  spec.thresholds = {{1, 0.3}, {2, 0.6}, {3, 0.7}};
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 2000; ++trial) {
    std::vector<double> x{u(rng), u(rng), u(rng), u(rng)};
    const double base = response_mean(spec, x);
    auto moved = x;
    for (std::size_t k = 0; k < 4; ++k) {
      const auto it = spec.thresholds.find(k + 1);
      if (it == spec.thresholds.end()) {
        moved[k] = u(rng);
        continue;
      }
      const double g = it->second;
      moved[k] = x[k] < g ? u(rng) * g * 0.999 : g + (1.0 - g) * (0.001 + 0.999 * u(rng));
    }
    EXPECT_EQ(response_mean(spec, moved), base);
  }
}

TEST(ResponseMean, ZeroCoefficientsGiveIntercept) {
  LssSpec spec;
  spec.intercept = -1.25;
  spec.interactions = {{SignedSet{minus(1), minus(2)}, 0.0}, {SignedSet{plus(3)}, 0.0}};
  spec.thresholds = {{1, 0.5}, {2, 0.2}, {3, 0.9}};
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 500; ++trial) {
    EXPECT_EQ(response_mean(spec, std::vector<double>{u(rng), u(rng), u(rng)}), -1.25);
  }
}

TEST(LssSpec, Accessors) {
  const auto spec = two_way_spec();
  EXPECT_EQ(spec.max_feature(), 2u);
  EXPECT_EQ(spec.signal_count(), 2u);
  EXPECT_DOUBLE_EQ(spec.activation_probability(SignedSet{minus(1), minus(2)}), 0.25);
  EXPECT_THROW((void)spec.threshold(3), ValidationError);
  EXPECT_EQ(parse_noise_family("laplace"), NoiseFamily::Laplace);
  EXPECT_THROW(parse_noise_family("student"), ValidationError);
}

TEST(Dataset, ShapeChecks) {
  EXPECT_THROW(Dataset({}, {}), ValidationError);
  EXPECT_THROW(Dataset({{1.0, 2.0}}, {1.0}), ValidationError);
  const Dataset d({{1.0, 2.0}, {3.0, 4.0}}, {5.0, 6.0});
  EXPECT_EQ(d.n(), 2u);
  EXPECT_EQ(d.p(), 2u);
  EXPECT_EQ(d.x(1, 0), 2.0);
  EXPECT_EQ(d.row(0), (std::vector<double>{1.0, 3.0}));
}
