#pragma once

// Dense symmetric linear algebra: eigendecomposition, SPD square roots,
// Cholesky with a jitter ladder, and LU-based inversion.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "sbss/error.hpp"
#include "sbss/matrix.hpp"

namespace sbss {

/// Eigenvalues in descending order with matching orthonormal eigenvectors
/// stored as columns. The largest-magnitude entry of every column is
/// non-negative (lowest index wins on ties).
struct EigenPair {
  std::vector<double> values;
  Matrix vectors;
  /// Set when two adjacent eigenvalues are closer than
  /// kDegenerateGap * max(1, |lambda|_max); the vectors spanning such a
  /// cluster are reported as computed.
  bool degenerate = false;
};

inline constexpr double kDegenerateGap = 1e-10;
inline constexpr std::size_t kJacobiMaxOrder = 64;
inline constexpr double kSpdThreshold = 1e-12;
inline constexpr std::array<double, 4> kJitterLadder = {1e-12, 1e-10, 1e-8, 1e-6};

namespace detail {

inline void check_finite(const Matrix& a, const char* who) {
  if (!a.all_finite()) throw InvalidInputError(std::string(who) + ": non-finite input entry");
}

inline double off_diagonal_norm(const Matrix& a) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j)
      if (i != j) s += a(i, j) * a(i, j);
  return std::sqrt(s);
}

// Cyclic Jacobi. On return `d` holds the (unsorted) eigenvalues and `v`
// the eigenvectors as columns.
inline void jacobi_eigen(Matrix a, std::vector<double>& d, Matrix& v) {
  const std::size_t n = a.rows();
  constexpr int kMaxSweeps = 100;
  v = Matrix::identity(n);
  d.assign(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) d[i] = a(i, i);

  for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
    double off = 0.0;
    for (std::size_t p = 0; p < n; ++p)
      for (std::size_t q = p + 1; q < n; ++q) off += std::abs(a(p, q));
    if (off == 0.0) return;

    const double threshold = sweep < 3 ? 0.2 * off / static_cast<double>(n * n) : 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        const double g = 100.0 * std::abs(apq);
        if (sweep > 3 && std::abs(d[p]) + g == std::abs(d[p]) &&
            std::abs(d[q]) + g == std::abs(d[q])) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        if (std::abs(apq) <= threshold) continue;

        const double h = d[q] - d[p];
        double t;
        if (std::abs(h) + g == std::abs(h)) {
          t = apq / h;
        } else {
          const double theta = 0.5 * h / apq;
          t = 1.0 / (std::abs(theta) + std::sqrt(1.0 + theta * theta));
          if (theta < 0.0) t = -t;
        }
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = t * c;
        const double tau = s / (1.0 + c);
        d[p] -= t * apq;
        d[q] += t * apq;
        a(p, p) = d[p];
        a(q, q) = d[q];
        a(p, q) = a(q, p) = 0.0;
        for (std::size_t r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = a(r, p), arq = a(r, q);
          const double nrp = arp - s * (arq + arp * tau);
          const double nrq = arq + s * (arp - arq * tau);
          a(r, p) = a(p, r) = nrp;
          a(r, q) = a(q, r) = nrq;
        }
        for (std::size_t r = 0; r < n; ++r) {
          const double vrp = v(r, p), vrq = v(r, q);
          v(r, p) = vrp - s * (vrq + vrp * tau);
          v(r, q) = vrq + s * (vrp - vrq * tau);
        }
      }
    }
  }
  throw ConvergenceError("sym_eigen: Jacobi did not converge within " +
                             std::to_string(kMaxSweeps) + " sweeps (off-diagonal residual " +
                             std::to_string(off_diagonal_norm(a)) + ")",
                         off_diagonal_norm(a));
}

// Householder reduction to tridiagonal form followed by implicit-shift QL.
// `z` enters as the symmetric input and leaves as the eigenvector matrix.
inline void tridiagonal_ql_eigen(Matrix z, std::vector<double>& d, Matrix& vectors) {
  const int n = static_cast<int>(z.rows());
  d.assign(n, 0.0);
  std::vector<double> e(n, 0.0);

  for (int i = n - 1; i > 0; --i) {
    const int l = i - 1;
    double h = 0.0;
    if (l > 0) {
      double scale = 0.0;
      for (int k = 0; k < i; ++k) scale += std::abs(z(i, k));
      if (scale == 0.0) {
        e[i] = z(i, l);
      } else {
        for (int k = 0; k < i; ++k) {
          z(i, k) /= scale;
          h += z(i, k) * z(i, k);
        }
        double f = z(i, l);
        double g = f >= 0.0 ? -std::sqrt(h) : std::sqrt(h);
        e[i] = scale * g;
        h -= f * g;
        z(i, l) = f - g;
        f = 0.0;
        for (int j = 0; j < i; ++j) {
          z(j, i) = z(i, j) / h;
          g = 0.0;
          for (int k = 0; k <= j; ++k) g += z(j, k) * z(i, k);
          for (int k = j + 1; k < i; ++k) g += z(k, j) * z(i, k);
          e[j] = g / h;
          f += e[j] * z(i, j);
        }
        const double hh = f / (h + h);
        for (int j = 0; j < i; ++j) {
          f = z(i, j);
          e[j] = g = e[j] - hh * f;
          for (int k = 0; k <= j; ++k) z(j, k) -= (f * e[k] + g * z(i, k));
        }
      }
    } else {
      e[i] = z(i, l);
    }
    d[i] = h;
  }
  d[0] = 0.0;
  e[0] = 0.0;
  for (int i = 0; i < n; ++i) {
    if (d[i] != 0.0) {
      for (int j = 0; j < i; ++j) {
        double g = 0.0;
        for (int k = 0; k < i; ++k) g += z(i, k) * z(k, j);
        for (int k = 0; k < i; ++k) z(k, j) -= g * z(k, i);
      }
    }
    d[i] = z(i, i);
    z(i, i) = 1.0;
    for (int j = 0; j < i; ++j) z(j, i) = z(i, j) = 0.0;
  }

  constexpr int kMaxIter = 50;
  constexpr double eps = std::numeric_limits<double>::epsilon();
  for (int i = 1; i < n; ++i) e[i - 1] = e[i];
  e[n - 1] = 0.0;
  for (int l = 0; l < n; ++l) {
    int iter = 0;
    int m;
    do {
      for (m = l; m < n - 1; ++m) {
        const double dd = std::abs(d[m]) + std::abs(d[m + 1]);
        if (std::abs(e[m]) <= eps * dd) break;
      }
      if (m != l) {
        if (iter++ == kMaxIter) {
          double residual = 0.0;
          for (double v : e) residual = std::max(residual, std::abs(v));
          throw ConvergenceError("sym_eigen: QL iteration did not converge for eigenvalue " +
                                     std::to_string(l) + " (off-diagonal residual " +
                                     std::to_string(residual) + ")",
                                 residual);
        }
        double g = (d[l + 1] - d[l]) / (2.0 * e[l]);
        double r = std::hypot(g, 1.0);
        g = d[m] - d[l] + e[l] / (g + (g >= 0.0 ? std::abs(r) : -std::abs(r)));
        double s = 1.0, c = 1.0, p = 0.0;
        int i;
        for (i = m - 1; i >= l; --i) {
          double f = s * e[i];
          const double b = c * e[i];
          e[i + 1] = (r = std::hypot(f, g));
          if (r == 0.0) {
            d[i + 1] -= p;
            e[m] = 0.0;
            break;
          }
          s = f / r;
          c = g / r;
          g = d[i + 1] - p;
          r = (d[i] - g) * s + 2.0 * c * b;
          d[i + 1] = g + (p = s * r);
          g = c * r - b;
          for (int k = 0; k < n; ++k) {
            f = z(k, i + 1);
            z(k, i + 1) = s * z(k, i) + c * f;
            z(k, i) = c * z(k, i) - s * f;
          }
        }
        if (r == 0.0 && i >= l) continue;
        d[l] -= p;
        e[l] = g;
        e[m] = 0.0;
      }
    } while (m != l);
  }
  vectors = std::move(z);
}

inline EigenPair finalize_eigen(const std::vector<double>& d, const Matrix& v) {
  const std::size_t n = d.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return d[a] > d[b]; });

  EigenPair out;
  out.values.resize(n);
  out.vectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    const std::size_t src = order[j];
    out.values[j] = d[src];
    std::size_t arg = 0;
    double best = -1.0;
    for (std::size_t i = 0; i < n; ++i) {
      if (std::abs(v(i, src)) > best) {
        best = std::abs(v(i, src));
        arg = i;
      }
    }
    const double sign = v(arg, src) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, j) = sign * v(i, src);
  }
  double scale = 1.0;
  for (double x : out.values) scale = std::max(scale, std::abs(x));
  for (std::size_t j = 1; j < n; ++j)
    if (out.values[j - 1] - out.values[j] < kDegenerateGap * scale) out.degenerate = true;
  return out;
}

}  // namespace detail

/// Symmetric eigendecomposition a = V diag(values) V^T.
///
/// Cyclic Jacobi for order <= 64, Householder tridiagonalization plus
/// implicit QL above that.
inline EigenPair sym_eigen(const SymMatrix& a) {
  detail::check_finite(a.matrix(), "sym_eigen");
  std::vector<double> d;
  Matrix v;
  if (a.order() <= kJacobiMaxOrder)
    detail::jacobi_eigen(a.matrix(), d, v);
  else
    detail::tridiagonal_ql_eigen(a.matrix(), d, v);
  return detail::finalize_eigen(d, v);
}

/// V diag(f(values)) V^T, symmetrized.
template <class F>
SymMatrix spectral_apply(const EigenPair& eig, F f) {
  const std::size_t n = eig.values.size();
  Matrix out(n, n);
  std::vector<double> fv(n);
  for (std::size_t k = 0; k < n; ++k) fv[k] = f(eig.values[k]);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i; j < n; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < n; ++k) s += eig.vectors(i, k) * fv[k] * eig.vectors(j, k);
      out(i, j) = s;
      out(j, i) = s;
    }
  }
  return SymMatrix(std::move(out));
}

namespace detail {

inline void require_spd(const EigenPair& eig, const char* who) {
  const double largest = eig.values.front();
  const double smallest = eig.values.back();
  if (!(smallest > kSpdThreshold * std::max(1.0, largest))) {
    std::ostringstream os;
    os << who << ": matrix is not positive definite (smallest eigenvalue " << smallest << ")";
    throw NotPositiveDefiniteError(os.str(), smallest);
  }
}

}  // namespace detail

/// Both SPD roots from one eigendecomposition.
struct SpdRoots {
  SymMatrix sqrt;
  SymMatrix inv_sqrt;
};

inline SpdRoots spd_roots(const SymMatrix& a) {
  const EigenPair eig = sym_eigen(a);
  detail::require_spd(eig, "spd_roots");
  return {spectral_apply(eig, [](double x) { return std::sqrt(x); }),
          spectral_apply(eig, [](double x) { return 1.0 / std::sqrt(x); })};
}

inline SymMatrix spd_sqrt(const SymMatrix& a) {
  const EigenPair eig = sym_eigen(a);
  detail::require_spd(eig, "spd_sqrt");
  return spectral_apply(eig, [](double x) { return std::sqrt(x); });
}

inline SymMatrix spd_inv_sqrt(const SymMatrix& a) {
  const EigenPair eig = sym_eigen(a);
  detail::require_spd(eig, "spd_inv_sqrt");
  return spectral_apply(eig, [](double x) { return 1.0 / std::sqrt(x); });
}

struct CholeskyResult {
  Matrix lower;
  double jitter = 0.0;  // diagonal shift actually applied
};

namespace detail {

// Row-oriented Cholesky; returns false on a non-positive pivot.
inline bool cholesky_attempt(const Matrix& a, double shift, Matrix& l) {
  const std::size_t n = a.rows();
  l = Matrix(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* li = &l(i, 0);
    for (std::size_t j = 0; j <= i; ++j) {
      const double* lj = &l(j, 0);
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      std::size_t k = 0;
      for (; k + 4 <= j; k += 4) {
        s0 += li[k] * lj[k];
        s1 += li[k + 1] * lj[k + 1];
        s2 += li[k + 2] * lj[k + 2];
        s3 += li[k + 3] * lj[k + 3];
      }
      for (; k < j; ++k) s0 += li[k] * lj[k];
      const double dot = (s0 + s1) + (s2 + s3);
      if (i == j) {
        const double piv = a(i, i) + shift - dot;
        if (!(piv > 0.0)) return false;
        l(i, i) = std::sqrt(piv);
      } else {
        l(i, j) = (a(i, j) - dot) / l(j, j);
      }
    }
  }
  return true;
}

}  // namespace detail

/// Lower-triangular L with L L^T = a (+ jitter I).
///
/// With `allow_jitter`, failed factorizations retry along kJitterLadder.
inline CholeskyResult cholesky(const SymMatrix& a, bool allow_jitter = true) {
  detail::check_finite(a.matrix(), "cholesky");
  CholeskyResult out;
  if (detail::cholesky_attempt(a.matrix(), 0.0, out.lower)) return out;
  if (allow_jitter) {
    for (double j : kJitterLadder) {
      if (detail::cholesky_attempt(a.matrix(), j, out.lower)) {
        out.jitter = j;
        return out;
      }
    }
  }
  throw NotPositiveDefiniteError(
      allow_jitter ? "cholesky: not factorizable after maximum jitter 1e-6"
                   : "cholesky: matrix is not positive definite",
      std::numeric_limits<double>::quiet_NaN());
}

/// LU factorization with partial pivoting, used for inverses and solves.
class LuDecomposition {
 public:
  explicit LuDecomposition(const Matrix& a) : lu_(a), perm_(a.rows()) {
    if (!a.square()) throw InvalidInputError("LU: matrix must be square");
    detail::check_finite(a, "LU");
    const std::size_t n = a.rows();
    std::iota(perm_.begin(), perm_.end(), std::size_t{0});
    const double scale = std::max(a.max_abs(), std::numeric_limits<double>::min());
    for (std::size_t k = 0; k < n; ++k) {
      std::size_t piv = k;
      for (std::size_t i = k + 1; i < n; ++i)
        if (std::abs(lu_(i, k)) > std::abs(lu_(piv, k))) piv = i;
      if (std::abs(lu_(piv, k)) <= 1e-14 * scale) {
        singular_ = true;
        return;
      }
      if (piv != k) {
        std::swap(perm_[piv], perm_[k]);
        for (std::size_t j = 0; j < n; ++j) std::swap(lu_(piv, j), lu_(k, j));
      }
      for (std::size_t i = k + 1; i < n; ++i) {
        lu_(i, k) /= lu_(k, k);
        const double f = lu_(i, k);
        for (std::size_t j = k + 1; j < n; ++j) lu_(i, j) -= f * lu_(k, j);
      }
    }
  }

  bool singular() const noexcept { return singular_; }

  /// Solves a X = b column by column.
  Matrix solve(const Matrix& b) const {
    if (singular_) throw NumericalError("LU solve: matrix is singular");
    const std::size_t n = lu_.rows();
    if (b.rows() != n) throw InvalidInputError("LU solve: dimension mismatch");
    Matrix x(n, b.cols());
    for (std::size_t c = 0; c < b.cols(); ++c) {
      std::vector<double> y(n);
      for (std::size_t i = 0; i < n; ++i) {
        double s = b(perm_[i], c);
        for (std::size_t k = 0; k < i; ++k) s -= lu_(i, k) * y[k];
        y[i] = s;
      }
      for (std::size_t i = n; i-- > 0;) {
        double s = y[i];
        for (std::size_t k = i + 1; k < n; ++k) s -= lu_(i, k) * y[k];
        y[i] = s / lu_(i, i);
      }
      for (std::size_t i = 0; i < n; ++i) x(i, c) = y[i];
    }
    return x;
  }

 private:
  Matrix lu_;
  std::vector<std::size_t> perm_;
  bool singular_ = false;
};

inline Matrix inverse(const Matrix& a, const char* who = "inverse") {
  LuDecomposition lu(a);
  if (lu.singular()) throw NumericalError(std::string(who) + ": matrix is singular");
  return lu.solve(Matrix::identity(a.rows()));
}

/// Largest singular value.
inline double spectral_norm(const Matrix& a) {
  if (a.empty()) return 0.0;
  const Matrix gram = a.rows() >= a.cols() ? a.transpose() * a : a * a.transpose();
  const EigenPair eig = sym_eigen(SymMatrix(gram));
  return std::sqrt(std::max(0.0, eig.values.front()));
}

}  // namespace sbss
