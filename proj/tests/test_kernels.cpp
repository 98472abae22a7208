#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "sbss/kernels.hpp"

using sbss::KernelBank;
using sbss::LocationSet;

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

TEST(LocationSet, Validation) {
  EXPECT_THROW(LocationSet(2, {0, 0, 1}), sbss::InvalidInputError);
  EXPECT_THROW(LocationSet(2, {0, 0, 0, 0}), sbss::InvalidInputError);
  EXPECT_THROW(LocationSet(2, {0, NAN, 1, 1}), sbss::InvalidInputError);
  EXPECT_THROW(LocationSet(0, {}), sbss::InvalidInputError);
  EXPECT_EQ(LocationSet(2, {1, 2}).size(), 1u);
}

TEST(PairwiseDistances, TriangleAndOrder) {
  const LocationSet l(2, {0, 0, 3, 0, 0, 4});
  const auto d = sbss::pairwise_distances(l);
  ASSERT_EQ(d.size(), 3u);
  EXPECT_DOUBLE_EQ(d[0], 3.0);
  EXPECT_DOUBLE_EQ(d[1], 4.0);
  EXPECT_DOUBLE_EQ(d[2], 5.0);
}

TEST(KernelBank, Validation) {
  EXPECT_THROW(KernelBank({0.0}), sbss::InvalidInputError);
  EXPECT_THROW(KernelBank({0.5, 1.0}), sbss::InvalidInputError);
  EXPECT_THROW(KernelBank({0.0, 1.0, 1.0}), sbss::InvalidInputError);
  EXPECT_THROW(KernelBank({0.0, NAN}), sbss::InvalidInputError);
  EXPECT_EQ(KernelBank({0.0, 1.0, kInf}).size(), 2u);
}

TEST(RingIndicator, HalfOpenIntervals) {
  const KernelBank bank({0.0, 1.0, 2.0, kInf});
  EXPECT_EQ(sbss::ring_indicator(bank, 1, 0.0), 0);
  EXPECT_EQ(sbss::ring_indicator(bank, 1, 1e-300), 1);
  EXPECT_EQ(sbss::ring_indicator(bank, 1, 1.0), 1);
  EXPECT_EQ(sbss::ring_indicator(bank, 2, 1.0), 0);
  EXPECT_EQ(sbss::ring_indicator(bank, 2, std::nextafter(1.0, 2.0)), 1);
  EXPECT_EQ(sbss::ring_indicator(bank, 3, 1e300), 1);
  EXPECT_THROW(sbss::ring_indicator(bank, 0, 1.0), sbss::InvalidInputError);
  EXPECT_THROW(sbss::ring_indicator(bank, 4, 1.0), sbss::InvalidInputError);
  EXPECT_EQ(bank.ring_of(0.0), 0u);
  EXPECT_EQ(bank.ring_of(1.5), 2u);
}

TEST(RingIndicator, FiniteLastBoundaryLeavesFarPairsOut) {
  const KernelBank bank({0.0, 1.0});
  EXPECT_EQ(bank.ring_of(2.0), 0u);
  EXPECT_EQ(sbss::ring_indicator(bank, 1, 2.0), 0);
}

TEST(DecileBoundaries, TriangleThreeRings) {
  const LocationSet l(2, {0, 0, 3, 0, 0, 4});
  const auto bank = sbss::decile_boundaries(l, 3);
  const auto c = bank.boundaries();
  ASSERT_EQ(c.size(), 4u);
  EXPECT_EQ(c[0], 0.0);
  EXPECT_EQ(c[1], 3.0);
  EXPECT_EQ(c[2], 4.0);
  EXPECT_EQ(c[3], kInf);
}

TEST(DecileBoundaries, CollinearRings) {
  const LocationSet l(1, {0, 1, 3});
  const auto pr = sbss::assign_rings(l, sbss::decile_boundaries(l, 3));
  ASSERT_EQ(pr.size(), 3u);
  EXPECT_EQ(pr.ring[0], 1);  // (0,1) distance 1
  EXPECT_EQ(pr.ring[1], 3);  // (0,2) distance 3
  EXPECT_EQ(pr.ring[2], 2);  // (1,2) distance 2
}

TEST(DecileBoundaries, OnePairPerRingWhenKEqualsPairs) {
  const LocationSet l(2, {0, 0, 1, 0, 0, 2.5, 4, 1.2, 2.2, 3.9});
  const auto pr = sbss::assign_rings(l, sbss::decile_boundaries(l, 10));
  const auto counts = sbss::ring_counts(pr);
  EXPECT_EQ(counts[0], 0u);
  for (std::size_t h = 1; h <= 10; ++h) EXPECT_EQ(counts[h], 1u) << "ring " << h;
}

TEST(DecileBoundaries, SingleRingCoversEverything) {
  const LocationSet l(2, {0, 0, 1, 0, 5, 5});
  const auto bank = sbss::decile_boundaries(l, 1);
  EXPECT_EQ(bank.size(), 1u);
  EXPECT_EQ(bank.boundaries()[1], kInf);
  EXPECT_EQ(sbss::ring_counts(sbss::assign_rings(l, bank))[1], 3u);
}

TEST(DecileBoundaries, TiesStayInOneRing) {
  // Unit square: four sides of length 1, two diagonals.
  const LocationSet l(2, {0, 0, 1, 0, 1, 1, 0, 1});
  const auto bank = sbss::decile_boundaries(l, 3);
  const auto c = bank.boundaries();
  EXPECT_EQ(c[1], 1.0);
  EXPECT_DOUBLE_EQ(c[2], std::sqrt(2.0));
  const auto counts = sbss::ring_counts(sbss::assign_rings(l, bank));
  EXPECT_EQ(counts[1], 4u);
  EXPECT_EQ(counts[2], 2u);
  EXPECT_EQ(counts[3], 0u);
}

TEST(DecileBoundaries, TooFewDistinctDistances) {
  const LocationSet tri(2, {0, 0, 1, 0, 0.5, std::sqrt(3.0) / 2});
  EXPECT_NO_THROW(sbss::decile_boundaries(tri, 2));
  const LocationSet line(1, {0, 1, 2, 3});  // distances 1,1,1,2,2,3
  EXPECT_THROW(sbss::decile_boundaries(line, 6), sbss::InvalidInputError);
  EXPECT_THROW(sbss::decile_boundaries(LocationSet(1, {0, 1}), 2), sbss::InvalidInputError);
  EXPECT_THROW(sbss::decile_boundaries(LocationSet(1, {0, 1}), 0), sbss::InvalidInputError);
}

TEST(DecileBoundaries, MatchesOrderStatisticsWithoutTies) {
  std::mt19937_64 g(31);
  for (int t = 0; t < 50; ++t) {
    const auto inst = oracle::random_instance(20 + t, 1, g);
    for (std::size_t k : {1u, 3u, 10u}) {
      const auto ref = oracle::deciles(inst.coords, k);
      const auto bank = sbss::decile_boundaries(LocationSet(2, inst.coords), k);
      const auto c = bank.boundaries();
      ASSERT_EQ(c.size(), ref.size());
      for (std::size_t h = 0; h < c.size(); ++h) EXPECT_DOUBLE_EQ(c[h], ref[h]);
    }
  }
}

TEST(DecileBoundaries, RingsPartitionPositiveDistances) {
  std::mt19937_64 g(37);
  for (int t = 0; t < 30; ++t) {
    const auto inst = oracle::random_instance(30, 1, g);
    const LocationSet l(2, inst.coords);
    const auto bank = sbss::decile_boundaries(l, 10);
    for (double d : sbss::pairwise_distances(l)) {
      int sum = 0;
      for (std::size_t h = 1; h <= 10; ++h) sum += sbss::ring_indicator(bank, h, d);
      EXPECT_EQ(sum, 1);
    }
    const auto counts = sbss::ring_counts(sbss::assign_rings(l, bank));
    for (std::size_t h = 1; h <= 10; ++h) {
      EXPECT_GE(counts[h], 43u);
      EXPECT_LE(counts[h], 44u);
    }
  }
}
