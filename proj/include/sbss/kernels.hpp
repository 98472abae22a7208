#pragma once

// Sampling sites and the ring kernels f_h(s) = 1(c_{h-1} < |s| <= c_h).

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "sbss/error.hpp"

namespace sbss {

/// n sampling sites in R^dim, stored row-major.
class LocationSet {
 public:
  LocationSet() = default;

  /// Validates finiteness and rejects coincident sites.
  /// A single site is accepted (degenerate fields); kernel construction needs two or more.
  LocationSet(std::size_t dim, std::vector<double> coords) : dim_(dim), coords_(std::move(coords)) {
    if (dim_ == 0) throw InvalidInputError("LocationSet: dimension must be >= 1");
    if (coords_.empty() || coords_.size() % dim_ != 0)
      throw InvalidInputError("LocationSet: coordinate count is not a positive multiple of dim");
    for (double c : coords_)
      if (!std::isfinite(c)) throw InvalidInputError("LocationSet: non-finite coordinate");
    const std::size_t n = size();
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (distance(i, j) == 0.0)
          throw InvalidInputError("LocationSet: duplicate sites at rows " + std::to_string(i) +
                                  " and " + std::to_string(j));
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return dim_ == 0 ? 0 : coords_.size() / dim_; }
  std::span<const double> point(std::size_t i) const noexcept {
    return {coords_.data() + i * dim_, dim_};
  }
  std::span<const double> coords() const noexcept { return coords_; }

  double distance(std::size_t i, std::size_t j) const noexcept {
    double s = 0.0;
    for (std::size_t k = 0; k < dim_; ++k) {
      const double d = coords_[i * dim_ + k] - coords_[j * dim_ + k];
      s += d * d;
    }
    return std::sqrt(s);
  }

  friend bool operator==(const LocationSet&, const LocationSet&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> coords_;
};

/// Euclidean distances of all unordered pairs in the order (0,1),(0,2),...,(n-2,n-1).
inline std::vector<double> pairwise_distances(const LocationSet& locs) {
  const std::size_t n = locs.size();
  std::vector<double> out;
  out.reserve(n * (n - 1) / 2);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) out.push_back(locs.distance(i, j));
  return out;
}

/// Ring boundaries 0 = c_0 < c_1 < ... < c_k; ring h covers (c_{h-1}, c_h].
class KernelBank {
 public:
  KernelBank() = default;

  explicit KernelBank(std::vector<double> boundaries) : boundaries_(std::move(boundaries)) {
    if (boundaries_.size() < 2) throw InvalidInputError("KernelBank: need at least one ring");
    if (boundaries_.front() != 0.0) throw InvalidInputError("KernelBank: c_0 must be 0");
    for (std::size_t h = 1; h < boundaries_.size(); ++h) {
      if (std::isnan(boundaries_[h]) || !(boundaries_[h] > boundaries_[h - 1]))
        throw InvalidInputError("KernelBank: boundaries must be strictly increasing");
    }
  }

  std::size_t size() const noexcept { return boundaries_.empty() ? 0 : boundaries_.size() - 1; }
  std::span<const double> boundaries() const noexcept { return boundaries_; }

  /// 1-based ring containing `dist`, or 0 when no ring does (dist == 0 or beyond c_k).
  std::size_t ring_of(double dist) const noexcept {
    if (!(dist > 0.0)) return 0;
    // First boundary >= dist is c_h for the ring (c_{h-1}, c_h].
    auto it = std::lower_bound(boundaries_.begin() + 1, boundaries_.end(), dist);
    if (it == boundaries_.end()) return 0;
    return static_cast<std::size_t>(it - boundaries_.begin());
  }

  friend bool operator==(const KernelBank&, const KernelBank&) = default;

 private:
  std::vector<double> boundaries_;
};

inline constexpr std::size_t kDefaultKernelCount = 10;

/// f_h(dist) for the 1-based kernel index h.
inline int ring_indicator(const KernelBank& bank, std::size_t h, double dist) {
  if (h < 1 || h > bank.size())
    throw InvalidInputError("ring_indicator: kernel index " + std::to_string(h) +
                            " out of range 1.." + std::to_string(bank.size()));
  const auto c = bank.boundaries();
  return (c[h - 1] < dist && dist <= c[h]) ? 1 : 0;
}

/// Boundaries at order statistics of the pair distances, c_h = d_(ceil(hP/k)),
/// with c_k = +inf so that each ring holds about P/k pairs.
///
/// Tied distances stay in one ring. When a tie would repeat the previous
/// boundary, c_h moves to the next distinct distance and later rings
/// return to their targets.
inline KernelBank decile_boundaries(const LocationSet& locs, std::size_t k = kDefaultKernelCount) {
  if (k == 0) throw InvalidInputError("decile_boundaries: kernel count must be >= 1");
  std::vector<double> d = pairwise_distances(locs);
  const std::size_t pairs = d.size();
  if (pairs < k)
    throw InvalidInputError("decile_boundaries: " + std::to_string(pairs) +
                            " site pairs cannot fill " + std::to_string(k) + " rings");
  std::sort(d.begin(), d.end());

  std::vector<double> c{0.0};
  for (std::size_t h = 1; h < k; ++h) {
    const std::size_t rank = (h * pairs + k - 1) / k;  // ceil(h P / k), 1-based
    double b = d[rank - 1];
    if (!(b > c.back())) {
      auto next = std::upper_bound(d.begin(), d.end(), c.back());
      if (next == d.end())
        throw InvalidInputError("decile_boundaries: too few distinct distances for " +
                                std::to_string(k) + " non-empty rings");
      b = *next;
    }
    c.push_back(b);
  }
  c.push_back(std::numeric_limits<double>::infinity());
  return KernelBank(std::move(c));
}

/// Every unordered site pair with its ring (0 = outside all rings).
struct PairRings {
  std::vector<std::uint32_t> first;
  std::vector<std::uint32_t> second;
  std::vector<std::uint16_t> ring;
  std::size_t kernel_count = 0;

  std::size_t size() const noexcept { return ring.size(); }
};

inline PairRings assign_rings(const LocationSet& locs, const KernelBank& bank) {
  const std::size_t n = locs.size();
  PairRings pr;
  pr.kernel_count = bank.size();
  const std::size_t p = n * (n - 1) / 2;
  pr.first.reserve(p);
  pr.second.reserve(p);
  pr.ring.reserve(p);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      pr.first.push_back(static_cast<std::uint32_t>(i));
      pr.second.push_back(static_cast<std::uint32_t>(j));
      pr.ring.push_back(static_cast<std::uint16_t>(bank.ring_of(locs.distance(i, j))));
    }
  }
  return pr;
}

/// Pair counts per ring, index 0 unused.
inline std::vector<std::size_t> ring_counts(const PairRings& pr) {
  std::vector<std::size_t> counts(pr.kernel_count + 1, 0);
  for (auto r : pr.ring) ++counts[r];
  return counts;
}

}  // namespace sbss
