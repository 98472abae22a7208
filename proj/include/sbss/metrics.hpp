#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sbss/error.hpp"
#include "sbss/linalg.hpp"
#include "sbss/matrix.hpp"

namespace sbss {

/// Performance index D(Omega, Omega_hat) in [0, 1] computed from
/// d = Omega^{-1} Omega_hat. Zero exactly when Omega_hat is Omega up to
/// column permutation and sign changes.
inline double d_index(const Matrix& omega, const Matrix& omega_hat) {
  if (!omega.square() || omega.rows() != omega_hat.rows() || omega.cols() != omega_hat.cols())
    throw InvalidInputError("d_index: Omega and Omega_hat must be square with equal dimensions");
  const std::size_t p = omega.rows();
  if (p == 1) {
    if (omega_hat(0, 0) == 0.0) throw NumericalError("d_index: degenerate Omega_hat (zero entry)");
    return 0.0;
  }
  LuDecomposition lu(omega);
  if (lu.singular()) throw NumericalError("d_index: Omega is singular");
  const Matrix d = lu.solve(omega_hat);

  double total = 0.0;
  for (std::size_t j = 0; j < p; ++j) {
    double col_ss = 0.0, col_max = 0.0, row_ss = 0.0, row_max = 0.0;
    for (std::size_t i = 0; i < p; ++i) {
      col_ss += d(i, j) * d(i, j);
      col_max = std::max(col_max, std::abs(d(i, j)));
      row_ss += d(j, i) * d(j, i);
      row_max = std::max(row_max, std::abs(d(j, i)));
    }
    if (col_max == 0.0 || row_max == 0.0)
      throw NumericalError("d_index: degenerate Omega_hat (zero row or column " + std::to_string(j) +
                           " in Omega^{-1} Omega_hat)");
    total += std::sqrt(col_ss) / col_max + std::sqrt(row_ss) / row_max - 2.0;
  }
  const double pd = static_cast<double>(p);
  return total / (2.0 * pd * (std::sqrt(pd) - 1.0));
}

struct GapReport {
  std::vector<double> gaps;       // gaps[i-2] = lambda_{i-1} - lambda_i, i = 2..p
  std::optional<double> v_gap;    // empty when p == 1
};

/// Adjacent eigengaps of a descending spectrum and their minimum.
inline GapReport gap_report(std::span<const double> lambda) {
  for (std::size_t i = 1; i < lambda.size(); ++i)
    if (lambda[i] > lambda[i - 1])
      throw InvalidInputError("gap_report: eigenvalues must be sorted descending (position " +
                              std::to_string(i) + ")");
  GapReport r;
  for (std::size_t i = 1; i < lambda.size(); ++i) r.gaps.push_back(lambda[i - 1] - lambda[i]);
  if (!r.gaps.empty()) r.v_gap = *std::min_element(r.gaps.begin(), r.gaps.end());
  return r;
}

/// Cuts 0 = p_0 < p_1 < ... < p_m = p of a block partition.
class BlockStructure {
 public:
  explicit BlockStructure(std::vector<std::size_t> cuts) : cuts_(std::move(cuts)) {
    if (cuts_.size() < 2) throw InvalidInputError("BlockStructure: need at least one block");
    if (cuts_.front() != 0) throw InvalidInputError("BlockStructure: first cut must be 0");
    for (std::size_t i = 1; i < cuts_.size(); ++i)
      if (cuts_[i] <= cuts_[i - 1]) throw InvalidInputError("BlockStructure: cuts must be strictly increasing");
  }

  std::size_t blocks() const noexcept { return cuts_.size() - 1; }
  std::size_t dimension() const noexcept { return cuts_.back(); }
  std::size_t begin(std::size_t b) const noexcept { return cuts_[b]; }
  std::size_t size(std::size_t b) const noexcept { return cuts_[b + 1] - cuts_[b]; }
  const std::vector<std::size_t>& cuts() const noexcept { return cuts_; }

 private:
  std::vector<std::size_t> cuts_;
};

/// Splits after the m-1 largest adjacent gaps.
inline BlockStructure suggest_blocks(const GapReport& report, std::size_t m) {
  const std::size_t p = report.gaps.size() + 1;
  if (m < 1 || m > p) throw InvalidInputError("suggest_blocks: block count must be in 1.." + std::to_string(p));
  std::vector<std::size_t> idx(report.gaps.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::stable_sort(idx.begin(), idx.end(),
                   [&](std::size_t a, std::size_t b) { return report.gaps[a] > report.gaps[b]; });
  std::vector<std::size_t> cuts{0, p};
  for (std::size_t t = 0; t + 1 < m; ++t) cuts.push_back(idx[t] + 1);  // gap i sits between i and i+1
  std::sort(cuts.begin(), cuts.end());
  return BlockStructure(std::move(cuts));
}

/// Omega with its columns permuted and sign-flipped to line up with the
/// columns of Omega_hat: greedy matching on |Omega_hat^{-1} Omega|, largest
/// entries first, then signs making the matched entries positive.
inline Matrix align_truth(const Matrix& omega, const Matrix& omega_hat) {
  if (!omega.square() || omega.rows() != omega_hat.rows() || omega.cols() != omega_hat.cols())
    throw InvalidInputError("align_truth: Omega and Omega_hat must be square with equal dimensions");
  LuDecomposition lu(omega_hat);
  if (lu.singular()) throw NumericalError("align_truth: Omega_hat is singular");
  const Matrix g = lu.solve(omega);
  const std::size_t p = g.rows();
  std::vector<std::pair<std::size_t, std::size_t>> cells;
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) cells.emplace_back(i, j);
  std::stable_sort(cells.begin(), cells.end(), [&](const auto& a, const auto& b) {
    return std::abs(g(a.first, a.second)) > std::abs(g(b.first, b.second));
  });
  std::vector<bool> row_used(p, false), col_used(p, false);
  Matrix out(p, p);
  for (const auto& [i, j] : cells) {
    if (row_used[i] || col_used[j]) continue;
    row_used[i] = col_used[j] = true;
    const double sign = g(i, j) < 0.0 ? -1.0 : 1.0;
    for (std::size_t r = 0; r < p; ++r) out(r, i) = sign * omega(r, j);
  }
  return out;
}

/// Spectral norms of the blocks of Gamma_Omega = Omega_hat^{-1} Omega.
struct BlockDiagnostics {
  Matrix gamma_omega;
  Matrix norms;                          // norms(i, j) = |Gamma_ij|
  std::vector<double> diagonal_deviation;  // |Gamma_ii - I|
};

inline BlockDiagnostics gamma_diagnostics(const Matrix& omega, const Matrix& omega_hat,
                                          const BlockStructure& blocks) {
  if (!omega.square() || omega.rows() != omega_hat.rows() || omega.cols() != omega_hat.cols())
    throw InvalidInputError("gamma_diagnostics: Omega and Omega_hat must be square with equal dimensions");
  if (blocks.dimension() != omega.rows())
    throw InvalidInputError("gamma_diagnostics: block cuts end at " + std::to_string(blocks.dimension()) +
                            " but p = " + std::to_string(omega.rows()));
  LuDecomposition lu(omega_hat);
  if (lu.singular()) throw NumericalError("gamma_diagnostics: Omega_hat is singular");

  BlockDiagnostics out;
  out.gamma_omega = lu.solve(omega);
  const std::size_t m = blocks.blocks();
  out.norms = Matrix(m, m);
  out.diagonal_deviation.resize(m);
  for (std::size_t a = 0; a < m; ++a) {
    for (std::size_t b = 0; b < m; ++b) {
      Matrix blk = out.gamma_omega.block(blocks.begin(a), blocks.begin(b), blocks.size(a), blocks.size(b));
      out.norms(a, b) = spectral_norm(blk);
      if (a == b) out.diagonal_deviation[a] = spectral_norm(blk - Matrix::identity(blocks.size(a)));
    }
  }
  return out;
}

/// Trace of Omega_hat^T Omega_hat and of its leading q x q block.
struct TraceSummary {
  double total = 0.0;
  double leading = 0.0;
  std::size_t leading_size = 0;
};

inline TraceSummary trace_summary(const Matrix& omega_hat, std::size_t leading_size) {
  if (leading_size > omega_hat.cols()) throw InvalidInputError("trace_summary: leading block exceeds p");
  const Matrix g = omega_hat.transpose() * omega_hat;
  TraceSummary t;
  t.total = trace(g);
  t.leading_size = leading_size;
  for (std::size_t i = 0; i < leading_size; ++i) t.leading += g(i, i);
  return t;
}

/// |Pearson correlation| between every column of `a` and every column of `b`.
inline Matrix abs_corr_match(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows()) throw InvalidInputError("abs_corr_match: row counts differ");
  const std::size_t n = a.rows();
  if (n < 2) throw InvalidInputError("abs_corr_match: need at least 2 rows");

  auto standardized = [n](const Matrix& m, const char* name) {
    Matrix z(n, m.cols());
    for (std::size_t j = 0; j < m.cols(); ++j) {
      double mean = 0.0;
      for (std::size_t i = 0; i < n; ++i) mean += m(i, j);
      mean /= static_cast<double>(n);
      double ss = 0.0;
      for (std::size_t i = 0; i < n; ++i) ss += (m(i, j) - mean) * (m(i, j) - mean);
      if (!(ss > 0.0))
        throw InvalidInputError(std::string("abs_corr_match: column ") + std::to_string(j) + " of " + name +
                                " is constant; correlation undefined");
      const double inv = 1.0 / std::sqrt(ss);
      for (std::size_t i = 0; i < n; ++i) z(i, j) = (m(i, j) - mean) * inv;
    }
    return z;
  };
  const Matrix za = standardized(a, "scores_a");
  const Matrix zb = standardized(b, "scores_b");
  Matrix c = za.transpose() * zb;
  for (double& v : c.data()) v = std::min(1.0, std::abs(v));
  return c;
}

}  // namespace sbss
