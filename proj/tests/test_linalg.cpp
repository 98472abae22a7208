#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracles.hpp"
#include "sbss/linalg.hpp"

using sbss::Matrix;
using sbss::SymMatrix;

namespace {

double orthogonality_error(const Matrix& u) {
  return sbss::max_abs_diff(u.transpose() * u, Matrix::identity(u.cols()));
}

Matrix reconstruct(const sbss::EigenPair& e) {
  return e.vectors * Matrix::diagonal(e.values) * e.vectors.transpose();
}

}  // namespace

TEST(SymEigen, Identity) {
  const auto e = sbss::sym_eigen(SymMatrix::identity(4));
  for (double v : e.values) EXPECT_DOUBLE_EQ(v, 1.0);
  EXPECT_TRUE(e.degenerate);
  EXPECT_LT(orthogonality_error(e.vectors), 1e-14);
}

TEST(SymEigen, DiagonalSortedDescending) {
  const auto e = sbss::sym_eigen(SymMatrix{{1, 0}, {0, 3}});
  EXPECT_DOUBLE_EQ(e.values[0], 3.0);
  EXPECT_DOUBLE_EQ(e.values[1], 1.0);
  EXPECT_DOUBLE_EQ(e.vectors(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(e.vectors(0, 1), 1.0);
  EXPECT_FALSE(e.degenerate);
}

TEST(SymEigen, SignConventionLargestEntryNonNegative) {
  std::mt19937_64 g(3);
  for (int t = 0; t < 50; ++t) {
    const auto e = sbss::sym_eigen(SymMatrix(oracle::random_spd(5, g)));
    for (std::size_t j = 0; j < 5; ++j) {
      std::size_t best = 0;
      for (std::size_t i = 1; i < 5; ++i)
        if (std::abs(e.vectors(i, j)) > std::abs(e.vectors(best, j))) best = i;
      EXPECT_GE(e.vectors(best, j), 0.0);
    }
  }
}

TEST(SymEigen, MatchesCharacteristicPolynomialOn3x3) {
  std::mt19937_64 g(11);
  for (int t = 0; t < 500; ++t) {
    Matrix a = oracle::random_gaussian(3, 3, g);
    a = (a + a.transpose()) * 0.5;
    const auto e = sbss::sym_eigen(SymMatrix(a));
    const auto ref = oracle::eig3_bisection(a);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(e.values[i], ref[i], 1e-8);
  }
}

TEST(SymEigen, ReconstructionAndOrthogonality) {
  std::mt19937_64 g(5);
  std::uniform_int_distribution<std::size_t> dim(2, 10);
  for (int t = 0; t < 1000; ++t) {
    const Matrix a = oracle::random_spd(dim(g), g);
    const auto e = sbss::sym_eigen(SymMatrix(a));
    const double scale = std::max(1.0, a.max_abs());
    EXPECT_LT(sbss::max_abs_diff(reconstruct(e), a), 1e-10 * scale);
    EXPECT_LT(orthogonality_error(e.vectors), 1e-10);
    for (std::size_t i = 1; i < e.values.size(); ++i) EXPECT_GE(e.values[i - 1], e.values[i]);
  }
}

TEST(SymEigen, TridiagonalPathAboveJacobiLimit) {
  std::mt19937_64 g(9);
  const Matrix a = oracle::random_spd(80, g);
  const auto e = sbss::sym_eigen(SymMatrix(a));
  EXPECT_LT(sbss::max_abs_diff(reconstruct(e), a), 1e-9 * a.max_abs());
  EXPECT_LT(orthogonality_error(e.vectors), 1e-10);
  double tr = 0.0;
  for (double v : e.values) tr += v;
  EXPECT_NEAR(tr, sbss::trace(a), 1e-9 * std::abs(tr));
}

TEST(SymEigen, BothPathsAgree) {
  std::mt19937_64 g(13);
  const Matrix a = oracle::random_spd(30, g);
  std::vector<double> dj, dq;
  Matrix vj, vq;
  sbss::detail::jacobi_eigen(a, dj, vj);
  sbss::detail::tridiagonal_ql_eigen(a, dq, vq);
  std::sort(dj.begin(), dj.end());
  std::sort(dq.begin(), dq.end());
  for (std::size_t i = 0; i < dj.size(); ++i) EXPECT_NEAR(dj[i], dq[i], 1e-10 * a.max_abs());
}

TEST(SymEigen, NonFiniteRejected) {
  Matrix a = Matrix::identity(3);
  a(1, 1) = std::numeric_limits<double>::quiet_NaN();
  try {
    sbss::sym_eigen(SymMatrix(a));
    FAIL() << "expected an exception";
  } catch (const sbss::Error& e) {
    EXPECT_EQ(e.kind(), sbss::ErrorKind::InvalidInput);
  }
}

TEST(SpdRoots, SquareAndInverse) {
  std::mt19937_64 g(17);
  for (int t = 0; t < 100; ++t) {
    const Matrix a = oracle::random_spd(6, g);
    const auto r = sbss::spd_roots(SymMatrix(a));
    const Matrix s = r.sqrt.matrix(), si = r.inv_sqrt.matrix();
    EXPECT_LT(sbss::max_abs_diff(s * s, a), 1e-9 * a.max_abs());
    EXPECT_LT(sbss::max_abs_diff(s * si, Matrix::identity(6)), 1e-9);
    Matrix ds, dsi;
    oracle::db_roots(a, ds, dsi);
    EXPECT_LT(sbss::max_abs_diff(s, ds), 1e-9 * ds.max_abs());
  }
}

TEST(SpdRoots, IndefiniteRejectedWithEigenvalue) {
  try {
    sbss::spd_sqrt(SymMatrix{{1, 2}, {2, 1}});
    FAIL() << "expected an exception";
  } catch (const sbss::NotPositiveDefiniteError& e) {
    EXPECT_NEAR(e.eigenvalue(), -1.0, 1e-12);
    EXPECT_EQ(e.kind(), sbss::ErrorKind::Numerical);
  }
}

TEST(SpdRoots, SingularRejected) {
  EXPECT_THROW(sbss::spd_inv_sqrt(SymMatrix{{1, 1}, {1, 1}}), sbss::NotPositiveDefiniteError);
}

TEST(Cholesky, KnownFactor) {
  const auto r = sbss::cholesky(SymMatrix{{4, 2}, {2, 5}});
  EXPECT_EQ(r.jitter, 0.0);
  EXPECT_DOUBLE_EQ(r.lower(0, 0), 2.0);
  EXPECT_DOUBLE_EQ(r.lower(0, 1), 0.0);
  EXPECT_DOUBLE_EQ(r.lower(1, 0), 1.0);
  EXPECT_DOUBLE_EQ(r.lower(1, 1), 2.0);
}

TEST(Cholesky, JitterForSemidefinite) {
  const auto r = sbss::cholesky(SymMatrix{{1, 1}, {1, 1}});
  EXPECT_GT(r.jitter, 0.0);
  EXPECT_LE(r.jitter, 1e-6);
  const Matrix back = r.lower * r.lower.transpose();
  EXPECT_LT(sbss::max_abs_diff(back, Matrix{{1, 1}, {1, 1}}), 2e-6);
}

TEST(Cholesky, NoJitterWhenDisallowed) {
  EXPECT_THROW(sbss::cholesky(SymMatrix{{1, 1}, {1, 1}}, false), sbss::NotPositiveDefiniteError);
}

TEST(Cholesky, IndefiniteFailsEvenWithJitter) {
  EXPECT_THROW(sbss::cholesky(SymMatrix{{1, 2}, {2, 1}}), sbss::NotPositiveDefiniteError);
}

TEST(Cholesky, RandomReconstruction) {
  std::mt19937_64 g(23);
  for (int t = 0; t < 100; ++t) {
    const Matrix a = oracle::random_spd(12, g);
    const auto r = sbss::cholesky(SymMatrix(a));
    EXPECT_LT(sbss::max_abs_diff(r.lower * r.lower.transpose(), a), 1e-10 * a.max_abs());
  }
}

TEST(Lu, SolveAndInverse) {
  const Matrix a{{0, 2}, {3, 1}};
  const Matrix inv = sbss::inverse(a);
  EXPECT_LT(sbss::max_abs_diff(a * inv, Matrix::identity(2)), 1e-15);
  EXPECT_TRUE(sbss::LuDecomposition(Matrix{{1, 2}, {2, 4}}).singular());
  EXPECT_THROW(sbss::inverse(Matrix{{1, 2}, {2, 4}}), sbss::NumericalError);
}

TEST(SpectralNorm, Examples) {
  EXPECT_NEAR(sbss::spectral_norm(Matrix{{3, 0}, {0, -4}}), 4.0, 1e-12);
  EXPECT_NEAR(sbss::spectral_norm(Matrix{{1, 1}}), std::sqrt(2.0), 1e-12);
  EXPECT_NEAR(sbss::spectral_norm(Matrix{{1, 1}, {0, 1}}), (1 + std::sqrt(5.0)) / 2, 1e-12);
}
