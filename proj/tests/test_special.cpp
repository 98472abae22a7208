#include <gtest/gtest.h>

#include <cmath>

#include "sbss/special.hpp"

namespace {

struct BesselCase {
  double nu, x, value;
};

// 30-digit reference values.
const BesselCase kBessel[] = {
    {0, 0.1, 2.4270690247020165578},
    {0, 1, 0.42102443824070833334},
    {0.5, 1, 0.46106850444789455844},
    {1.5, 2, 0.17990665795209217105},
    {1, 0.5, 1.6564411200033008937},
    {2.3, 0.01, 114365.29966112098177},
    {0.25, 1.9999, 0.11539251030894467363},
    {0.25, 2.0, 0.11537827684085675697},
    {3.7, 5, 0.012498951966274487904},
    {5.9, 0.3, 3660329.3824894127634},
    {0.01, 10, 0.000017780147188589474625},
    {2.5, 40, 9.0660051518106025172e-19},
    {1.2, 300, 3.7326275666280504071e-132},
};

struct MaternCase {
  double s, kappa, phi, value;
};

const MaternCase kMatern[] = {
    {1, 0.7, 1.3, 0.58042210037497730482},
    {0.05, 3.3, 0.4, 0.99830417282861099076},
    {10, 0.2, 2, 0.0019385337088057277598},
    {2, 5.9, 0.01, 1.6658042503732504438e-78},
};

}  // namespace

TEST(BesselK, ReferenceValues) {
  for (const auto& c : kBessel) {
    EXPECT_NEAR(sbss::bessel_k(c.nu, c.x), c.value, 1e-12 * c.value) << "nu=" << c.nu << " x=" << c.x;
  }
}

TEST(BesselK, HalfOrderClosedForm) {
  for (double x = 0.05; x < 30; x *= 1.3) {
    const double k = std::sqrt(M_PI / (2 * x)) * std::exp(-x);
    EXPECT_NEAR(sbss::bessel_k(0.5, x), k, 1e-13 * k);
  }
}

TEST(BesselK, ThreeTermRecurrence) {
  for (double nu = 0.0; nu < 6.0; nu += 0.37) {
    for (double x = 0.02; x < 60; x *= 1.7) {
      const double lhs = sbss::bessel_k(nu + 1, x);
      const double rhs = sbss::bessel_k(nu - 1 < 0 ? 1 - nu : nu - 1, x) + 2 * nu / x * sbss::bessel_k(nu, x);
      EXPECT_NEAR(lhs, rhs, 1e-9 * lhs) << "nu=" << nu << " x=" << x;
    }
  }
}

TEST(BesselK, ContinuousAcrossMethodSwitch) {
  for (double nu : {0.0, 0.3, 1.7, 4.2}) {
    const double below = sbss::bessel_k(nu, std::nextafter(2.0, 0.0));
    const double at = sbss::bessel_k(nu, 2.0);
    EXPECT_NEAR(below, at, 1e-13 * at);
  }
}

TEST(BesselK, InvalidArguments) {
  EXPECT_THROW(sbss::bessel_k(1, 0), sbss::InvalidInputError);
  EXPECT_THROW(sbss::bessel_k(1, -1), sbss::InvalidInputError);
  EXPECT_THROW(sbss::bessel_k(-0.5, 1), sbss::InvalidInputError);
  EXPECT_EQ(sbss::bessel_k(1, 800), 0.0);
}

TEST(Matern, ReferenceValues) {
  for (const auto& c : kMatern)
    EXPECT_NEAR(sbss::matern(c.s, {c.kappa, c.phi}), c.value, 1e-11 * c.value);
}

TEST(Matern, ClosedForms) {
  for (int i = 1; i <= 100; ++i) {
    const double s = 0.05 * i, phi = 0.7;
    const double x = s / phi;
    const double e = std::exp(-x);
    EXPECT_NEAR(sbss::matern(s, {0.5, phi}), e, 1e-8 * e);
    EXPECT_NEAR(sbss::matern(s, {1.5, phi}), (1 + x) * e, 1e-8 * (1 + x) * e);
    EXPECT_NEAR(sbss::matern(s, {2.5, phi}), (1 + x + x * x / 3) * e, 1e-8 * (1 + x + x * x / 3) * e);
  }
}

TEST(Matern, UnitAtZeroAndMonotoneDecreasing) {
  for (double kappa : {0.01, 0.3, 1.0, 2.7, 6.0}) {
    for (double phi : {0.01, 0.5, 2.0}) {
      EXPECT_EQ(sbss::matern(0.0, {kappa, phi}), 1.0);
      double prev = 1.0;
      for (double s = 1e-4; s < 100; s *= 1.5) {
        const double r = sbss::matern(s, {kappa, phi});
        EXPECT_GE(r, 0.0);
        EXPECT_LE(r, prev + 1e-12);
        prev = r;
      }
    }
  }
}

TEST(Matern, TendsToOneNearOrigin) {
  EXPECT_NEAR(sbss::matern(1e-8, {2.5, 1.0}), 1.0, 1e-10);
  EXPECT_NEAR(sbss::matern(1e-8, {0.5, 1.0}), 1.0, 1e-7);
}

TEST(Matern, InvalidParameters) {
  EXPECT_THROW(sbss::matern(1.0, {0.0, 1.0}), sbss::InvalidInputError);
  EXPECT_THROW(sbss::matern(1.0, {1.0, -1.0}), sbss::InvalidInputError);
  EXPECT_THROW(sbss::matern(-1.0, {1.0, 1.0}), sbss::InvalidInputError);
}
