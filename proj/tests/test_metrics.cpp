#include <gtest/gtest.h>

#include <cmath>
#include <sstream>

#include "in2i/metrics.hpp"
#include "metric_oracles.hpp"

using namespace in2i;

using in2i::testing::oracle_psnr;
using in2i::testing::oracle_ssim;

TEST(Psnr, IdenticalImagesAreInfinite) {
  const auto x = torch::rand({3, 16, 16});
  EXPECT_TRUE(std::isinf(psnr(x, x)));
  EXPECT_GT(psnr(x, x), 0);
}

TEST(Psnr, UniformOffsetClosedForm) {
  const auto x = torch::rand({1, 32, 32}, torch::kFloat64) * 0.9;
  EXPECT_NEAR(psnr(x, x + 0.1), 20.0, 1e-6);
}

TEST(Psnr, MatchesScalarOracle) {
  for (int trial = 0; trial < 50; ++trial) {
    const auto x = torch::rand({3, 12, 9}, torch::kFloat64), y = torch::rand({3, 12, 9}, torch::kFloat64);
    EXPECT_NEAR(psnr(x, y), oracle_psnr(x, y), 1e-9);
  }
}

TEST(Psnr, SymmetricAndStrictlyDecreasingInOffset) {
  const auto x = torch::rand({1, 16, 16}, torch::kFloat64) * 0.5;
  const auto y = torch::rand({1, 16, 16}, torch::kFloat64);
  EXPECT_EQ(psnr(x, y), psnr(y, x));
  double prev = INFINITY;
  for (double d = 0.01; d < 0.5; d += 0.01) {
    const double v = psnr(x, x + d);
    EXPECT_LT(v, prev);
    prev = v;
  }
  EXPECT_THROW(psnr(x, torch::rand({1, 16, 15})), ShapeError);
}

TEST(Ssim, IdenticalImagesGiveExactlyOne) {
  for (int c : {1, 3}) {
    const auto x = torch::rand({c, 20, 23});
    EXPECT_EQ(ssim(x, x), 1.0);
  }
}

TEST(Ssim, ConstantComplementClosedForm) {
  const auto x = torch::full({1, 16, 16}, 0.3, torch::kFloat64);
  const auto y = 1.0 - x;
  const double c1 = 1e-4;
  const double expected = (2 * 0.3 * 0.7 + c1) / (0.09 + 0.49 + c1);  // structure term is c2/c2 = 1
  EXPECT_NEAR(ssim(x, y), expected, 1e-9);
}

TEST(Ssim, MatchesSlidingWindowOracle) {
  for (int trial = 0; trial < 50; ++trial) {
    const int c = trial % 2 ? 3 : 1;
    const auto x = torch::rand({c, 16, 19}, torch::kFloat64);
    const auto y = (x + 0.3 * torch::randn({c, 16, 19}, torch::kFloat64)).clamp(0, 1);
    EXPECT_NEAR(ssim(x, y), oracle_ssim(x, y), 1e-6);
  }
}

TEST(Ssim, SymmetricAndBounded) {
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = torch::rand({1, 14, 14}, torch::kFloat64), y = torch::rand({1, 14, 14}, torch::kFloat64);
    EXPECT_NEAR(ssim(x, y), ssim(y, x), 1e-15);
    EXPECT_LE(std::abs(ssim(x, y)), 1.0);
  }
}

TEST(Ssim, ContrastStructureInvariantToCommonShift) {
  // Adding the same constant to both images leaves every local variance and
  // covariance unchanged, so the contrast-structure factor is invariant; the
  // luminance factor is not, hence the full index moves slightly.
  for (double k : {0.01, 0.05, 0.1}) {
    const auto x = torch::rand({1, 16, 16}, torch::kFloat64) * 0.8;
    const auto y = torch::rand({1, 16, 16}, torch::kFloat64) * 0.8;
    EXPECT_NEAR(ssim_detailed(x, y).contrast_structure, ssim_detailed(x + k, y + k).contrast_structure, 1e-6);
  }
}

TEST(Ssim, ImageSmallerThanWindowIsAnError) {
  EXPECT_THROW(ssim(torch::rand({1, 10, 30}), torch::rand({1, 10, 30})), ShapeError);
}

TEST(Aggregate, MeanAndPopulationVariance) {
  auto one = aggregate({{"a", 21.5, 0.8}});
  EXPECT_EQ(one.psnr.variance, 0.0);
  EXPECT_EQ(one.psnr.count, 1u);
  auto two = aggregate({{"a", 20, 0.5}, {"b", 24, 0.7}});
  EXPECT_DOUBLE_EQ(two.psnr.mean, 22.0);
  EXPECT_DOUBLE_EQ(two.psnr.variance, 4.0);
  EXPECT_DOUBLE_EQ(two.ssim.mean, 0.6);
  EXPECT_THROW(aggregate({}), DataError);
}

TEST(Aggregate, InfiniteValuesAreExcludedAndCounted) {
  auto s = aggregate({{"a", INFINITY, 1.0}, {"b", 30, 0.9}, {"c", 20, 0.7}});
  EXPECT_DOUBLE_EQ(s.psnr.mean, 25.0);
  EXPECT_EQ(s.psnr.count, 2u);
  EXPECT_EQ(s.psnr.infinite, 1u);
  std::ostringstream md;
  write_metrics_markdown(md, s, "identity");
  EXPECT_NE(md.str().find("1 image"), std::string::npos) << md.str();
}

TEST(Formatting, TableCellLayout) {
  MetricStats s;
  s.mean = 23.113;
  s.variance = 9.147;
  s.count = 50;
  EXPECT_EQ(format_cell(s), "23.113 (9.147)");
  EXPECT_EQ(format_value(INFINITY), "inf");
}

TEST(Formatting, CsvHasOneRowPerImage) {
  std::ostringstream csv;
  write_metrics_csv(csv, {{"a.png", INFINITY, 1.0}, {"b.png", 20.0, 0.5}});
  const auto text = csv.str();
  EXPECT_EQ(text.rfind("image,psnr,ssim\n", 0), 0u);
  EXPECT_NE(text.find("a.png,inf,1"), std::string::npos) << text;
  EXPECT_NE(text.find("b.png,20"), std::string::npos) << text;
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 3);
}
