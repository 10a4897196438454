#include <gtest/gtest.h>

#include <random>

#include "rcflow/mask.hpp"
#include "support/oracles.hpp"

namespace rcflow {
namespace {

TEST(DownsampleMask, OnesStayOnes) {
  const Mask m(Shape{4, 1, 12, 10}, 1.0);
  for (const Shape& t : {Shape{4, 3, 6, 5}, Shape{2, 1, 3, 3}, Shape{1, 1, 1, 1}, Shape{4, 1, 12, 10}}) {
    const Mask d = downsample_mask(m, t);
    EXPECT_TRUE(d.all_equal(1.0)) << t.str();
    EXPECT_EQ(d.shape(), Mask::grid_of(t));
  }
}

TEST(DownsampleMask, ArithmeticMean) {
  const Mask m(Shape{1, 1, 2, 2}, std::vector<double>{1, 1, 0, 0});
  const Mask d = downsample_mask(m, {1, 1, 1, 1});
  EXPECT_DOUBLE_EQ(d.values()[0], 0.5);
}

TEST(DownsampleMask, CheckerboardPoolsToHalf) {
  std::vector<double> v(64);
  for (std::size_t y = 0; y < 8; ++y)
    for (std::size_t x = 0; x < 8; ++x) v[y * 8 + x] = (x + y) % 2 == 0 ? 1.0 : 0.0;
  const Mask m(Shape{1, 1, 8, 8}, v);
  const Mask d = downsample_mask(m, {1, 1, 4, 4});
  const auto expect = oracle::block_pool(m, 1, 4, 4);
  ASSERT_EQ(d.values().size(), expect.size());
  for (std::size_t i = 0; i < expect.size(); ++i) {
    EXPECT_DOUBLE_EQ(d.values()[i], expect[i]);
    EXPECT_DOUBLE_EQ(d.values()[i], 0.5);
  }
}

TEST(DownsampleMask, DividingExtentsMatchBlockAverage) {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> v(4 * 12 * 9);
  for (double& x : v) x = u(rng);
  const Mask m(Shape{4, 1, 12, 9}, v);
  const Mask d = downsample_mask(m, {2, 1, 4, 3});
  const auto expect = oracle::block_pool(m, 2, 4, 3);
  for (std::size_t i = 0; i < expect.size(); ++i) EXPECT_NEAR(d.values()[i], expect[i], 1e-14);
}

TEST(DownsampleMask, NonDividingExtentsAreAreaWeighted) {
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(0, 1);
  std::vector<double> row(7);
  for (double& x : row) x = u(rng);
  const Mask m(Shape{1, 1, 1, 7}, row);
  const Mask d = downsample_mask(m, {1, 1, 1, 3});
  const auto expect = oracle::integrate_pool_1d(row, 3);
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(d.values()[i], expect[i], 1e-4);
}

TEST(DownsampleMask, ValuesStayInUnitInterval) {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> bit(0, 1);
  std::vector<double> v(3 * 17 * 13);
  for (double& x : v) x = bit(rng);
  const Mask d = downsample_mask(Mask(Shape{3, 1, 17, 13}, v), {2, 1, 5, 4});
  for (double x : d.values()) {
    EXPECT_GE(x, 0.0);
    EXPECT_LE(x, 1.0);
  }
}

TEST(DownsampleMask, RejectsUpsampling) {
  const Mask m(Shape{2, 1, 4, 4}, 1.0);
  EXPECT_THROW(downsample_mask(m, {3, 1, 4, 4}), StructuralError);
  EXPECT_THROW(downsample_mask(m, {2, 1, 8, 4}), StructuralError);
}

} // namespace
} // namespace rcflow
