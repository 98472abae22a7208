#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <string>

#include "sbss/error.hpp"

namespace sbss {

namespace detail {

// Taylor coefficients of 1/Gamma(z) = sum_{k>=1} c_k z^k.
inline constexpr std::array<double, 26> kRecipGammaCoeffs = {
    1.0,
    0.5772156649015329,
    -0.6558780715202538,
    -0.0420026350340952,
    0.1665386113822915,
    -0.0421977345555443,
    -0.0096219715278770,
    0.0072189432466630,
    -0.0011651675918591,
    -0.0002152416741149,
    0.0001280502823882,
    -0.0000201348547807,
    -0.0000012504934821,
    0.0000011330272320,
    -0.0000002056338417,
    0.0000000061160950,
    0.0000000050020075,
    -0.0000000011812746,
    0.0000000001043427,
    0.0000000000077823,
    -0.0000000000036968,
    0.0000000000005100,
    -0.0000000000000206,
    -0.0000000000000054,
    0.0000000000000014,
    0.0000000000000001,
};

// Temme's auxiliary functions for |mu| <= 1/2:
//   gam1 = (1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu)
//   gam2 = (1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2
// evaluated from the even/odd parts of the 1/Gamma series, free of the
// cancellation the direct difference suffers near mu = 0.
inline void temme_gamma(double mu, double& gam1, double& gam2) {
  const double mu2 = mu * mu;
  double even = 0.0, odd = 0.0;
  for (int k = static_cast<int>(kRecipGammaCoeffs.size()); k >= 1; --k) {
    const double c = kRecipGammaCoeffs[k - 1];
    if (k % 2 == 0)
      even = even * mu2 + c;  // c_k mu^{k-2}, k even
    else
      odd = odd * mu2 + c;  // c_k mu^{k-1}, k odd
  }
  gam1 = -even;
  gam2 = odd;
}

}  // namespace detail

/// Modified Bessel function of the second kind K_nu(x), nu >= 0, x > 0.
///
/// K_mu and K_{mu+1} for |mu| <= 1/2 come from Temme's series (x < 2) or
/// Steed's continued fraction (x >= 2); forward recurrence in the order
/// reaches nu. Underflows to zero for very large x.
inline double bessel_k(double nu, double x) {
  if (!(x > 0.0) || !std::isfinite(x))
    throw InvalidInputError("bessel_k: argument must be positive and finite");
  if (!(nu >= 0.0) || !std::isfinite(nu)) throw InvalidInputError("bessel_k: order must be >= 0");
  if (x > 745.0) return 0.0;

  constexpr double eps = 1e-16;
  constexpr int kMaxIter = 10000;
  constexpr double pi = std::numbers::pi;

  const int nl = static_cast<int>(nu + 0.5);
  const double mu = nu - nl;
  const double mu2 = mu * mu;
  const double xi = 1.0 / x;
  const double xi2 = 2.0 * xi;

  double k_mu, k_mu1;
  if (x < 2.0) {
    const double x2 = 0.5 * x;
    const double pimu = pi * mu;
    const double fact = std::abs(pimu) < eps ? 1.0 : pimu / std::sin(pimu);
    double d = -std::log(x2);
    double e = mu * d;
    const double fact2 = std::abs(e) < eps ? 1.0 : std::sinh(e) / e;
    double gam1, gam2;
    detail::temme_gamma(mu, gam1, gam2);
    const double gampl = gam2 - mu * gam1;  // 1/Gamma(1+mu)
    const double gammi = gam2 + mu * gam1;  // 1/Gamma(1-mu)
    double ff = fact * (gam1 * std::cosh(e) + gam2 * fact2 * d);
    double sum = ff;
    e = std::exp(e);
    double p = 0.5 * e / gampl;
    double q = 0.5 / (e * gammi);
    double c = 1.0;
    d = x2 * x2;
    double sum1 = p;
    int i = 1;
    for (; i <= kMaxIter; ++i) {
      ff = (i * ff + p + q) / (i * i - mu2);
      c *= d / i;
      p /= (i - mu);
      q /= (i + mu);
      const double del = c * ff;
      sum += del;
      sum1 += c * (p - i * ff);
      if (std::abs(del) < std::abs(sum) * eps) break;
    }
    if (i > kMaxIter) throw ConvergenceError("bessel_k: Temme series did not converge", 0.0);
    k_mu = sum;
    k_mu1 = sum1 * xi2;
  } else {
    double b = 2.0 * (1.0 + x);
    double d = 1.0 / b;
    double h = d, delh = d;
    double q1 = 0.0, q2 = 1.0;
    const double a1 = 0.25 - mu2;
    double q = a1, c = a1;
    double a = -a1;
    double s = 1.0 + q * delh;
    int i = 1;
    for (; i <= kMaxIter; ++i) {
      a -= 2 * i;
      c = -a * c / (i + 1.0);
      const double qnew = (q1 - b * q2) / a;
      q1 = q2;
      q2 = qnew;
      q += c * qnew;
      b += 2.0;
      d = 1.0 / (b + a * d);
      delh = (b * d - 1.0) * delh;
      h += delh;
      const double dels = q * delh;
      s += dels;
      if (std::abs(dels / s) < eps) break;
    }
    if (i > kMaxIter) throw ConvergenceError("bessel_k: continued fraction did not converge", 0.0);
    h = a1 * h;
    k_mu = std::sqrt(pi / (2.0 * x)) * std::exp(-x) / s;
    k_mu1 = k_mu * (mu + x + 0.5 - h) * xi;
  }

  for (int i = 1; i <= nl; ++i) {
    const double next = (mu + i) * xi2 * k_mu1 + k_mu;
    k_mu = k_mu1;
    k_mu1 = next;
  }
  return k_mu;
}

/// Matern shape (kappa) and range (phi).
struct MaternParams {
  double kappa = 0.5;
  double phi = 1.0;
};

inline constexpr double kMaternParamFloor = 1e-2;

/// rho(d) = 2^{1-kappa} / Gamma(kappa) (d/phi)^kappa K_kappa(d/phi), rho(0) = 1.
inline double matern(double dist, const MaternParams& params) {
  if (!(params.kappa > 0.0) || !(params.phi > 0.0) || !std::isfinite(params.kappa) || !std::isfinite(params.phi))
    throw InvalidInputError("matern: kappa and phi must be positive and finite");
  if (dist == 0.0) return 1.0;
  if (!(dist > 0.0)) throw InvalidInputError("matern: distance must be >= 0");
  const double x = dist / params.phi;
  if (x > 745.0) return 0.0;
  const double kappa = params.kappa;
  // log of the prefactor keeps large kappa from overflowing x^kappa.
  const double log_pref = (1.0 - kappa) * std::numbers::ln2 - std::lgamma(kappa) + kappa * std::log(x);
  const double k = bessel_k(kappa, x);
  if (k == 0.0) return 0.0;
  const double r = std::exp(log_pref + std::log(k));
  return std::min(r, 1.0);
}

}  // namespace sbss
