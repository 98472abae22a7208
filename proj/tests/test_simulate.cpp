#include <gtest/gtest.h>

#include <cmath>

#include "sbss/sbss.hpp"

using sbss::Matrix;
using sbss::ScenarioConfig;

namespace {

ScenarioConfig small(std::uint64_t seed) {
  ScenarioConfig c;
  c.n = 60;
  c.p = 3;
  c.seed = seed;
  return c;
}

// Fixed sites for Monte Carlo checks on one field.
sbss::LocationSet fixed_sites() { return sbss::LocationSet(2, {0, 0, 0.3, 0.4, 2, 1, 5, 5, 9, 1}); }

}  // namespace

TEST(Rng, StreamsAreDistinctAndRepeatable) {
  sbss::SplitMix64 a(sbss::derive_stream(1, 2)), b(sbss::derive_stream(1, 2)), c(sbss::derive_stream(1, 3));
  for (int i = 0; i < 10; ++i) {
    const auto va = a(), vb = b(), vc = c();
    EXPECT_EQ(va, vb);
    EXPECT_NE(va, vc);
  }
  EXPECT_NE(sbss::derive_stream(1, 100, 0), sbss::derive_stream(1, 100, 1));
  EXPECT_NE(sbss::derive_stream(1, 5), sbss::derive_stream(2, 5));
}

TEST(Simulate, Deterministic) {
  const auto a = sbss::gen_dataset(small(9)), b = sbss::gen_dataset(small(9));
  EXPECT_EQ(a.data.values(), b.data.values());
  EXPECT_EQ(a.data.locations(), b.data.locations());
  const auto c = sbss::gen_dataset(small(10));
  EXPECT_NE(a.data.values(), c.data.values());
}

TEST(Simulate, FieldsDoNotDependOnP) {
  auto cfg = small(4);
  cfg.matern = {{1, 1}, {2, 0.5}, {0.5, 1.5}};
  const auto three = sbss::gen_dataset(cfg);
  cfg.p = 2;
  cfg.matern.pop_back();
  const auto two = sbss::gen_dataset(cfg);
  for (std::size_t i = 0; i < cfg.n; ++i)
    for (std::size_t j = 0; j < 2; ++j) EXPECT_EQ(two.truth_z(i, j), three.truth_z(i, j));
}

TEST(Simulate, IdentityMixingGivesLatentFields) {
  const auto d = sbss::gen_dataset(small(3));
  EXPECT_EQ(d.data.values(), d.truth_z);
  EXPECT_EQ(d.truth_omega, Matrix::identity(3));
}

TEST(Simulate, ExplicitAndRandomMixing) {
  auto cfg = small(5);
  cfg.omega_kind = sbss::OmegaKind::Explicit;
  cfg.omega = Matrix{{1, 2, 0}, {0, 1, 0}, {3, 0, 1}};
  const auto d = sbss::gen_dataset(cfg);
  EXPECT_LT(sbss::max_abs_diff(d.data.values(), d.truth_z * cfg.omega.transpose()), 1e-15);

  cfg.omega_kind = sbss::OmegaKind::RandomInvertible;
  const auto r = sbss::gen_dataset(cfg);
  EXPECT_FALSE(sbss::LuDecomposition(r.truth_omega).singular());
  EXPECT_EQ(r.truth_omega, sbss::gen_dataset(cfg).truth_omega);
}

TEST(Simulate, RandomParametersInRange) {
  for (std::uint64_t s = 0; s < 200; ++s) {
    for (const auto& m : sbss::draw_matern_params(5, s)) {
      EXPECT_GE(m.kappa, sbss::kMaternParamFloor);
      EXPECT_LT(m.kappa, 6.0);
      EXPECT_GE(m.phi, sbss::kMaternParamFloor);
      EXPECT_LT(m.phi, 2.0);
    }
  }
}

TEST(Simulate, LocationsUniformInBox) {
  auto cfg = small(21);
  cfg.n = 1000;
  cfg.p = 1;
  cfg.box = 50;
  cfg.matern = {{0.5, 0.1}};
  const auto d = sbss::gen_dataset(cfg);
  const auto c = d.data.locations().coords();
  double sx = 0, sy = 0;
  for (std::size_t i = 0; i < 1000; ++i) {
    EXPECT_GE(c[2 * i], 0.0);
    EXPECT_LE(c[2 * i], 50.0);
    EXPECT_GE(c[2 * i + 1], 0.0);
    EXPECT_LE(c[2 * i + 1], 50.0);
    sx += c[2 * i];
    sy += c[2 * i + 1];
  }
  const double se = 50.0 / std::sqrt(12.0) / std::sqrt(1000.0);
  EXPECT_NEAR(sx / 1000, 25.0, 4 * se);
  EXPECT_NEAR(sy / 1000, 25.0, 4 * se);
}

TEST(Simulate, GaussianFieldMoments) {
  const auto locs = fixed_sites();
  const sbss::MaternParams mp{1.5, 1.0};
  const int m = 4000;
  double s00 = 0, s11 = 0, s01 = 0;
  for (int r = 0; r < m; ++r) {
    sbss::SplitMix64 rng(sbss::derive_stream(77, r));
    const auto z = sbss::gen_latent_field(locs, mp, sbss::Marginal::Gaussian, rng);
    s00 += z[0] * z[0];
    s11 += z[1] * z[1];
    s01 += z[0] * z[1];
  }
  EXPECT_NEAR(s00 / m, 1.0, 4 * std::sqrt(2.0 / m));
  EXPECT_NEAR(s11 / m, 1.0, 4 * std::sqrt(2.0 / m));
  const double rho = sbss::matern(0.5, mp);
  EXPECT_NEAR(s01 / m, rho, 4 * std::sqrt((1 + rho * rho) / m));
}

TEST(Simulate, T5FieldVariance) {
  const auto locs = fixed_sites();
  const int m = 4000;
  double s = 0;
  for (int r = 0; r < m; ++r) {
    sbss::SplitMix64 rng(sbss::derive_stream(78, r));
    const auto z = sbss::gen_latent_field(locs, {0.5, 1.0}, sbss::Marginal::T5, rng);
    s += z[4] * z[4];
  }
  // Var(z^2) = E z^4 - 1 = 9 - 1 for unit-variance t5.
  EXPECT_NEAR(s / m, 1.0, 4 * std::sqrt(8.0 / m));
}

TEST(Simulate, JsonRoundTrip) {
  ScenarioConfig cfg;
  cfg.n = 77;
  cfg.p = 2;
  cfg.box = 10;
  cfg.marginal = sbss::Marginal::T5;
  cfg.matern = {{0.5, 1.25}, {2, 0.75}};
  cfg.omega_kind = sbss::OmegaKind::Explicit;
  cfg.omega = Matrix{{1, 0.5}, {0, 2}};
  cfg.seed = 123456789012345ULL;
  const auto back = sbss::scenario_from_json(sbss::to_json(cfg));
  EXPECT_EQ(sbss::to_json(back), sbss::to_json(cfg));
  EXPECT_EQ(back.omega, cfg.omega);
  EXPECT_EQ(back.seed, cfg.seed);
}

TEST(Simulate, ValidationNamesField) {
  auto expect_field = [](const ScenarioConfig& c, const std::string& field) {
    try {
      sbss::validate(c);
      FAIL() << "expected failure for " << field;
    } catch (const sbss::InvalidInputError& e) {
      EXPECT_NE(std::string(e.what()).find(field), std::string::npos) << e.what();
    }
  };
  ScenarioConfig c;
  c.p = 0;
  expect_field(c, "config.p");
  c = ScenarioConfig{};
  c.n = 1;
  expect_field(c, "config.n");
  c = ScenarioConfig{};
  c.box = -1;
  expect_field(c, "config.box");
  c = ScenarioConfig{};
  c.matern = {{1, 1}};
  expect_field(c, "config.matern");
  c.matern = {{1, 1}, {0, 1}, {1, 1}};
  expect_field(c, "config.matern[1].kappa");
  c = ScenarioConfig{};
  c.omega_kind = sbss::OmegaKind::Explicit;
  c.omega = Matrix(3, 3);
  expect_field(c, "config.omega");
}

TEST(Simulate, JsonErrors) {
  using nlohmann::json;
  EXPECT_THROW(sbss::scenario_from_json(json::array()), sbss::InvalidInputError);
  EXPECT_THROW(sbss::scenario_from_json(json{{"n", -3}}), sbss::InvalidInputError);
  EXPECT_THROW(sbss::scenario_from_json(json{{"marginal", "cauchy"}}), sbss::InvalidInputError);
  EXPECT_THROW(sbss::scenario_from_json(json{{"omega", "rotation"}}), sbss::InvalidInputError);
  EXPECT_THROW(sbss::scenario_from_json(json{{"matern", json::array({json{{"kappa", 1}}})}}),
               sbss::InvalidInputError);
  EXPECT_THROW(sbss::scenario_from_json(json{{"omega", json::array({json::array({1, 2}), json::array({1})})}}),
               sbss::InvalidInputError);
}
