#pragma once

// Whitened multi-kernel eigenanalysis for spatial blind source separation.
//
// Pipeline: center -> sample covariance S -> S^{-1/2}
//   -> normalized local covariances M(f_h) = S^{-1/2} M~(f_h) S^{-1/2}
//   -> W = k^{-1} sum_h M(f_h) M(f_h)^T -> eigenvectors U of W
//   -> mixing estimate Omega = S^{1/2} U, unmixing Gamma = U^T S^{-1/2}.

#include <cstddef>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "sbss/error.hpp"
#include "sbss/kernels.hpp"
#include "sbss/linalg.hpp"
#include "sbss/matrix.hpp"

namespace sbss {

/// Observations X(s_i) as rows of an n x p matrix.
class FieldSample {
 public:
  FieldSample() = default;
  FieldSample(LocationSet locs, Matrix values) : locs_(std::move(locs)), values_(std::move(values)) {
    if (locs_.size() < 2) throw InvalidInputError("FieldSample: need at least 2 sites");
    if (values_.rows() != locs_.size())
      throw InvalidInputError("FieldSample: " + std::to_string(values_.rows()) + " rows but " +
                              std::to_string(locs_.size()) + " sites");
    if (values_.cols() == 0) throw InvalidInputError("FieldSample: no variables");
    if (!values_.all_finite()) throw InvalidInputError("FieldSample: non-finite value");
  }

  const LocationSet& locations() const noexcept { return locs_; }
  const Matrix& values() const noexcept { return values_; }
  std::size_t sites() const noexcept { return values_.rows(); }
  std::size_t variables() const noexcept { return values_.cols(); }

 private:
  LocationSet locs_;
  Matrix values_;
};

/// Index of the identity kernel f_0(s) = 1(s = 0); ring kernels are 1..k.
inline constexpr std::size_t kIdentityKernel = 0;

inline std::vector<double> column_means(const Matrix& x) {
  std::vector<double> mean(x.cols(), 0.0);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) mean[j] += x(i, j);
  for (double& m : mean) m /= static_cast<double>(x.rows());
  return mean;
}

inline FieldSample center(const FieldSample& data) {
  Matrix x = data.values();
  const auto mean = column_means(x);
  for (std::size_t i = 0; i < x.rows(); ++i)
    for (std::size_t j = 0; j < x.cols(); ++j) x(i, j) -= mean[j];
  return FieldSample(data.locations(), std::move(x));
}

/// n^{-1} sum_j x_j x_j^T of an already centered sample.
inline SymMatrix sample_cov(const Matrix& centered) {
  const std::size_t n = centered.rows(), p = centered.cols();
  Matrix s(p, p);
  for (std::size_t i = 0; i < n; ++i) {
    auto r = centered.row(i);
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = a; b < p; ++b) s(a, b) += r[a] * r[b];
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a; b < p; ++b) {
      s(a, b) *= inv_n;
      s(b, a) = s(a, b);
    }
  }
  return SymMatrix(std::move(s));
}

inline SymMatrix sample_cov(const FieldSample& centered) { return sample_cov(centered.values()); }

/// Local covariances M~(f_h) for h = 1..k in one pass over the pair list.
///
/// Each unordered pair adds x_i x_j^T + x_j x_i^T to its ring, so pairs of a
/// ring are always accumulated in the fixed pair order. Entry h-1 of the
/// result is ring h.
inline std::vector<Matrix> local_covs(const Matrix& centered, const PairRings& pairs) {
  const std::size_t p = centered.cols();
  const std::size_t k = pairs.kernel_count;
  std::vector<Matrix> acc(k, Matrix(p, p));
  for (std::size_t t = 0; t < pairs.size(); ++t) {
    const std::size_t r = pairs.ring[t];
    if (r == 0) continue;
    Matrix& m = acc[r - 1];
    auto xi = centered.row(pairs.first[t]);
    auto xj = centered.row(pairs.second[t]);
    for (std::size_t a = 0; a < p; ++a)
      for (std::size_t b = a; b < p; ++b) m(a, b) += xi[a] * xj[b] + xj[a] * xi[b];
  }
  const double inv_n = 1.0 / static_cast<double>(centered.rows());
  for (Matrix& m : acc) {
    for (std::size_t a = 0; a < p; ++a) {
      for (std::size_t b = a; b < p; ++b) {
        m(a, b) *= inv_n;
        m(b, a) = m(a, b);
      }
    }
  }
  return acc;
}

/// M~(f_h) = n^{-1} sum_{i,j} f_h(s_i - s_j) x_i x_j^T for a centered sample.
/// h = kIdentityKernel gives the sample covariance.
inline Matrix local_cov(const FieldSample& centered, const KernelBank& bank, std::size_t h) {
  if (h == kIdentityKernel) return sample_cov(centered).matrix();
  if (h > bank.size())
    throw InvalidInputError("local_cov: kernel index " + std::to_string(h) + " out of range 1.." +
                            std::to_string(bank.size()));
  const PairRings pairs = assign_rings(centered.locations(), bank);
  return local_covs(centered.values(), pairs)[h - 1];
}

/// S^{-1/2} M S^{-1/2}, symmetrized.
inline Matrix whiten_sandwich(const SymMatrix& sigma_inv_sqrt, const Matrix& m) {
  Matrix out = sigma_inv_sqrt.matrix() * m * sigma_inv_sqrt.matrix();
  const std::size_t p = out.rows();
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a + 1; b < p; ++b) {
      const double avg = 0.5 * (out(a, b) + out(b, a));
      out(a, b) = out(b, a) = avg;
    }
  }
  return out;
}

inline Matrix normalized_local_cov(const FieldSample& centered, const SymMatrix& sigma_inv_sqrt,
                                   const KernelBank& bank, std::size_t h) {
  return whiten_sandwich(sigma_inv_sqrt, local_cov(centered, bank, h));
}

/// W = k^{-1} sum_h M_h M_h^T.
inline SymMatrix build_w(std::span<const Matrix> m_hats) {
  if (m_hats.empty()) throw InvalidInputError("build_w: need at least one kernel matrix");
  const std::size_t p = m_hats.front().rows();
  Matrix w(p, p);
  for (const Matrix& m : m_hats) {
    if (m.rows() != p || m.cols() != p)
      throw InvalidInputError("build_w: kernel matrices must all be " + std::to_string(p) + "x" +
                              std::to_string(p));
    for (std::size_t a = 0; a < p; ++a) {
      for (std::size_t b = a; b < p; ++b) {
        double s = 0.0;
        for (std::size_t c = 0; c < p; ++c) s += m(a, c) * m(b, c);
        w(a, b) += s;
      }
    }
  }
  const double inv_k = 1.0 / static_cast<double>(m_hats.size());
  for (std::size_t a = 0; a < p; ++a) {
    for (std::size_t b = a; b < p; ++b) {
      w(a, b) *= inv_k;
      w(b, a) = w(a, b);
    }
  }
  return SymMatrix(std::move(w));
}

struct BssEstimate {
  SymMatrix sigma_hat;
  Matrix u_w;
  std::vector<double> lambda_hat;  // descending
  Matrix omega_hat;                // S^{1/2} U
  Matrix gamma_hat;                // U^T S^{-1/2}
  KernelBank kernel_bank;
  std::vector<std::size_t> kernels;  // 1-based ring indices pooled into W
  std::vector<double> mean;          // column means removed before estimation
  bool degenerate = false;           // near-tied eigenvalues of W
};

/// Everything about a sample that does not depend on the kernel subset:
/// centered data, S and its roots, and all normalized local covariances.
struct WhitenedLocalCovs {
  FieldSample centered;
  std::vector<double> mean;
  SymMatrix sigma_hat;
  SpdRoots sigma_roots;
  KernelBank bank;
  std::vector<Matrix> m_hats;  // entry h-1 is ring h
};

inline WhitenedLocalCovs prepare_local_covs(const FieldSample& data, const KernelBank& bank) {
  if (data.sites() <= data.variables())
    throw NumericalError("estimate: under-determined sample (n = " + std::to_string(data.sites()) +
                         " <= p = " + std::to_string(data.variables()) + ")");
  WhitenedLocalCovs w{center(data), column_means(data.values()), SymMatrix(), SpdRoots(), bank, {}};
  w.sigma_hat = sample_cov(w.centered);
  try {
    w.sigma_roots = spd_roots(w.sigma_hat);
  } catch (const NotPositiveDefiniteError& e) {
    throw NotPositiveDefiniteError(
        std::string("estimate: singular sample covariance (") + e.what() + ")", e.eigenvalue());
  }
  const PairRings pairs = assign_rings(data.locations(), bank);
  w.m_hats = local_covs(w.centered.values(), pairs);
  for (Matrix& m : w.m_hats) m = whiten_sandwich(w.sigma_roots.inv_sqrt, m);
  return w;
}

/// Finish the estimate from prepared local covariances using the given
/// 1-based ring indices (all rings when empty).
inline BssEstimate estimate_from(const WhitenedLocalCovs& prep, std::span<const std::size_t> kernels = {}) {
  std::vector<std::size_t> used(kernels.begin(), kernels.end());
  if (used.empty()) {
    used.resize(prep.m_hats.size());
    std::iota(used.begin(), used.end(), std::size_t{1});
  }
  std::vector<Matrix> selected;
  selected.reserve(used.size());
  for (std::size_t h : used) {
    if (h < 1 || h > prep.m_hats.size())
      throw InvalidInputError("estimate: kernel index " + std::to_string(h) + " out of range 1.." +
                              std::to_string(prep.m_hats.size()));
    selected.push_back(prep.m_hats[h - 1]);
  }
  const SymMatrix w = build_w(selected);
  const EigenPair eig = sym_eigen(w);

  BssEstimate est;
  est.sigma_hat = prep.sigma_hat;
  est.u_w = eig.vectors;
  est.lambda_hat = eig.values;
  est.omega_hat = prep.sigma_roots.sqrt.matrix() * eig.vectors;
  est.gamma_hat = eig.vectors.transpose() * prep.sigma_roots.inv_sqrt.matrix();
  est.kernel_bank = prep.bank;
  est.kernels = std::move(used);
  est.mean = prep.mean;
  est.degenerate = eig.degenerate;
  return est;
}

/// Full estimator. `kernels` restricts W to a subset of rings; a single
/// entry gives the single-kernel baseline.
inline BssEstimate estimate(const FieldSample& data, const KernelBank& bank,
                            std::span<const std::size_t> kernels = {}) {
  return estimate_from(prepare_local_covs(data, bank), kernels);
}

/// Z(s_i) = Gamma (x_i - mean), one row per site. The mean is the sample's own.
inline Matrix ic_scores(const BssEstimate& est, const FieldSample& data) {
  const std::size_t p = est.gamma_hat.rows();
  if (data.variables() != p)
    throw InvalidInputError("ic_scores: data has " + std::to_string(data.variables()) +
                            " variables, estimate has " + std::to_string(p));
  const FieldSample centered = center(data);
  return centered.values() * est.gamma_hat.transpose();
}

}  // namespace sbss
