#pragma once

// Synthetic spatial BSS experiments: uniform sites on a square, independent
// Matern random fields (Gaussian or t5 marginals), mixed by Omega.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "sbss/error.hpp"
#include "sbss/estimator.hpp"
#include "sbss/kernels.hpp"
#include "sbss/linalg.hpp"
#include "sbss/matrix.hpp"
#include "sbss/rng.hpp"
#include "sbss/special.hpp"

namespace sbss {

enum class Marginal { Gaussian, T5 };

inline std::string to_string(Marginal m) { return m == Marginal::Gaussian ? "gaussian" : "t5"; }

enum class OmegaKind { Identity, RandomInvertible, Explicit };

struct ScenarioConfig {
  std::size_t n = 100;
  std::size_t p = 3;
  double box = 50.0;
  Marginal marginal = Marginal::Gaussian;
  /// Empty means "random": kappa ~ U(0,6), phi ~ U(0,2), floored at 0.01.
  std::vector<MaternParams> matern;
  OmegaKind omega_kind = OmegaKind::Identity;
  Matrix omega;  // used when omega_kind == Explicit
  std::uint64_t seed = 0;
};

struct SimulatedDataset {
  FieldSample data;
  Matrix truth_omega;
  Matrix truth_z;
  std::vector<MaternParams> matern_used;
};

/// Throws InvalidInputError naming the offending field as "config.<field>".
inline void validate(const ScenarioConfig& cfg) {
  if (cfg.n < 2) throw InvalidInputError("config.n: must be >= 2 (got " + std::to_string(cfg.n) + ")");
  if (cfg.p < 1) throw InvalidInputError("config.p: must be >= 1 (got " + std::to_string(cfg.p) + ")");
  if (!(cfg.box > 0.0) || !std::isfinite(cfg.box)) throw InvalidInputError("config.box: must be positive");
  if (!cfg.matern.empty()) {
    if (cfg.matern.size() != cfg.p)
      throw InvalidInputError("config.matern: expected " + std::to_string(cfg.p) + " entries, got " +
                              std::to_string(cfg.matern.size()));
    for (std::size_t j = 0; j < cfg.matern.size(); ++j) {
      const auto& m = cfg.matern[j];
      const std::string at = "config.matern[" + std::to_string(j) + "]";
      if (!(m.kappa > 0.0) || !std::isfinite(m.kappa)) throw InvalidInputError(at + ".kappa: must be positive");
      if (!(m.phi > 0.0) || !std::isfinite(m.phi)) throw InvalidInputError(at + ".phi: must be positive");
    }
  }
  if (cfg.omega_kind == OmegaKind::Explicit) {
    if (cfg.omega.rows() != cfg.p || cfg.omega.cols() != cfg.p)
      throw InvalidInputError("config.omega: expected a " + std::to_string(cfg.p) + "x" +
                              std::to_string(cfg.p) + " matrix");
    if (!cfg.omega.all_finite()) throw InvalidInputError("config.omega: non-finite entry");
    if (LuDecomposition(cfg.omega).singular()) throw InvalidInputError("config.omega: matrix is singular");
  }
}

inline nlohmann::json to_json(const ScenarioConfig& cfg) {
  nlohmann::json j;
  j["n"] = cfg.n;
  j["p"] = cfg.p;
  j["box"] = cfg.box;
  j["marginal"] = to_string(cfg.marginal);
  if (cfg.matern.empty()) {
    j["matern"] = "random";
  } else {
    j["matern"] = nlohmann::json::array();
    for (const auto& m : cfg.matern) j["matern"].push_back({{"kappa", m.kappa}, {"phi", m.phi}});
  }
  switch (cfg.omega_kind) {
    case OmegaKind::Identity: j["omega"] = "identity"; break;
    case OmegaKind::RandomInvertible: j["omega"] = "random-invertible"; break;
    case OmegaKind::Explicit: {
      auto rows = nlohmann::json::array();
      for (std::size_t i = 0; i < cfg.omega.rows(); ++i) {
        auto r = cfg.omega.row(i);
        rows.push_back(std::vector<double>(r.begin(), r.end()));
      }
      j["omega"] = rows;
      break;
    }
  }
  j["seed"] = cfg.seed;
  return j;
}

namespace detail {

template <class T>
T json_get(const nlohmann::json& j, const char* key, const std::string& path) {
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw InvalidInputError(path + "." + key + ": missing or wrong type");
  }
}

inline std::size_t json_count(const nlohmann::json& j, const char* key, const std::string& path) {
  const auto& v = j.at(key);
  if (v.is_number_integer() && v.get<long long>() < 0)
    throw InvalidInputError(path + "." + key + ": must be non-negative");
  return json_get<std::size_t>(j, key, path);
}

}  // namespace detail

/// Parses a scenario document. Missing optional fields keep their defaults;
/// the result is not validated (call validate()).
inline ScenarioConfig scenario_from_json(const nlohmann::json& j, const std::string& path = "config") {
  if (!j.is_object()) throw InvalidInputError(path + ": expected a JSON object");
  ScenarioConfig cfg;
  if (j.contains("n")) cfg.n = detail::json_count(j, "n", path);
  if (j.contains("p")) cfg.p = detail::json_count(j, "p", path);
  if (j.contains("box")) cfg.box = detail::json_get<double>(j, "box", path);
  if (j.contains("seed")) cfg.seed = detail::json_get<std::uint64_t>(j, "seed", path);
  if (j.contains("marginal")) {
    const auto m = detail::json_get<std::string>(j, "marginal", path);
    if (m == "gaussian")
      cfg.marginal = Marginal::Gaussian;
    else if (m == "t5")
      cfg.marginal = Marginal::T5;
    else
      throw InvalidInputError(path + ".marginal: expected \"gaussian\" or \"t5\", got \"" + m + "\"");
  }
  if (j.contains("matern")) {
    const auto& m = j.at("matern");
    if (m.is_string()) {
      if (m.get<std::string>() != "random")
        throw InvalidInputError(path + ".matern: expected \"random\" or an array");
    } else if (m.is_array()) {
      for (std::size_t i = 0; i < m.size(); ++i) {
        const std::string at = path + ".matern[" + std::to_string(i) + "]";
        if (!m[i].is_object()) throw InvalidInputError(at + ": expected {\"kappa\", \"phi\"}");
        cfg.matern.push_back({detail::json_get<double>(m[i], "kappa", at),
                              detail::json_get<double>(m[i], "phi", at)});
      }
    } else {
      throw InvalidInputError(path + ".matern: expected \"random\" or an array");
    }
  }
  if (j.contains("omega")) {
    const auto& o = j.at("omega");
    if (o.is_string()) {
      const auto s = o.get<std::string>();
      if (s == "identity")
        cfg.omega_kind = OmegaKind::Identity;
      else if (s == "random-invertible")
        cfg.omega_kind = OmegaKind::RandomInvertible;
      else
        throw InvalidInputError(path + ".omega: expected \"identity\", \"random-invertible\" or a matrix");
    } else if (o.is_array()) {
      cfg.omega_kind = OmegaKind::Explicit;
      const std::size_t rows = o.size();
      const std::size_t cols = rows == 0 || !o[0].is_array() ? 0 : o[0].size();
      cfg.omega = Matrix(rows, cols);
      for (std::size_t r = 0; r < rows; ++r) {
        if (!o[r].is_array() || o[r].size() != cols)
          throw InvalidInputError(path + ".omega[" + std::to_string(r) + "]: ragged or malformed row");
        for (std::size_t c = 0; c < cols; ++c) {
          if (!o[r][c].is_number())
            throw InvalidInputError(path + ".omega[" + std::to_string(r) + "][" + std::to_string(c) +
                                    "]: expected a number");
          cfg.omega(r, c) = o[r][c].get<double>();
        }
      }
    } else {
      throw InvalidInputError(path + ".omega: expected \"identity\", \"random-invertible\" or a matrix");
    }
  }
  return cfg;
}

/// n uniform sites on [0, box]^2; a draw within 1e-9 of an earlier site is redrawn.
template <class Rng>
LocationSet sample_locations(std::size_t n, double box, Rng& rng) {
  std::uniform_real_distribution<double> u(0.0, box);
  std::vector<double> coords;
  coords.reserve(2 * n);
  while (coords.size() < 2 * n) {
    const double x = u(rng), y = u(rng);
    bool clash = false;
    for (std::size_t i = 0; i < coords.size() && !clash; i += 2)
      clash = std::hypot(coords[i] - x, coords[i + 1] - y) < 1e-9;
    if (clash) continue;
    coords.push_back(x);
    coords.push_back(y);
  }
  return LocationSet(2, std::move(coords));
}

inline SymMatrix matern_correlation(const LocationSet& locs, const MaternParams& params) {
  const std::size_t n = locs.size();
  Matrix r(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    r(i, i) = 1.0;
    for (std::size_t j = i + 1; j < n; ++j) r(i, j) = r(j, i) = matern(locs.distance(i, j), params);
  }
  return SymMatrix(std::move(r));
}

/// One latent field over the sites with unit marginal variance.
///
/// Gaussian: L eps with L L^T = R (+ jitter, rescaled back to unit variance).
/// t5: the Gaussian vector divided by sqrt(chi2_5 / 5), one chi-square per
/// field, times sqrt(3/5).
template <class Rng>
std::vector<double> gen_latent_field(const LocationSet& locs, const MaternParams& params, Marginal marginal,
                                     Rng& rng) {
  const std::size_t n = locs.size();
  const CholeskyResult chol = cholesky(matern_correlation(locs, params));
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> eps(n);
  for (double& e : eps) e = normal(rng);
  std::vector<double> z = chol.lower * std::span<const double>(eps);
  double scale = 1.0 / std::sqrt(1.0 + chol.jitter);
  if (marginal == Marginal::T5) {
    std::chi_squared_distribution<double> chi2(5.0);
    const double w = chi2(rng);
    scale *= std::sqrt(3.0 / 5.0) / std::sqrt(w / 5.0);
  }
  for (double& v : z) v *= scale;
  return z;
}

namespace detail {

inline constexpr std::uint64_t kStreamLocations = 1;
inline constexpr std::uint64_t kStreamMatern = 2;
inline constexpr std::uint64_t kStreamOmega = 3;
inline constexpr std::uint64_t kStreamField = 100;

inline Matrix random_invertible(std::size_t p, SplitMix64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  for (;;) {
    Matrix m(p, p);
    for (double& v : m.data()) v = normal(rng);
    const EigenPair eig = sym_eigen(SymMatrix(m.transpose() * m));
    if (eig.values.back() > 1e-4 * eig.values.front()) return m;  // condition number <= 100
  }
}

}  // namespace detail

/// Draws the Matern parameters a "random" scenario uses.
inline std::vector<MaternParams> draw_matern_params(std::size_t p, std::uint64_t seed) {
  SplitMix64 rng(derive_stream(seed, detail::kStreamMatern));
  std::uniform_real_distribution<double> kappa(0.0, 6.0), phi(0.0, 2.0);
  std::vector<MaternParams> out(p);
  for (auto& m : out) {
    m.kappa = std::max(kMaternParamFloor, kappa(rng));
    m.phi = std::max(kMaternParamFloor, phi(rng));
  }
  return out;
}

/// X = Z Omega^T with independent latent columns of Z. A pure function of cfg.
inline SimulatedDataset gen_dataset(const ScenarioConfig& cfg) {
  validate(cfg);
  SplitMix64 loc_rng(derive_stream(cfg.seed, detail::kStreamLocations));
  LocationSet locs = sample_locations(cfg.n, cfg.box, loc_rng);

  SimulatedDataset out;
  out.matern_used = cfg.matern.empty() ? draw_matern_params(cfg.p, cfg.seed) : cfg.matern;
  switch (cfg.omega_kind) {
    case OmegaKind::Identity: out.truth_omega = Matrix::identity(cfg.p); break;
    case OmegaKind::Explicit: out.truth_omega = cfg.omega; break;
    case OmegaKind::RandomInvertible: {
      SplitMix64 rng(derive_stream(cfg.seed, detail::kStreamOmega));
      out.truth_omega = detail::random_invertible(cfg.p, rng);
      break;
    }
  }

  out.truth_z = Matrix(cfg.n, cfg.p);
  for (std::size_t j = 0; j < cfg.p; ++j) {
    SplitMix64 rng(derive_stream(cfg.seed, detail::kStreamField, j));
    const auto z = gen_latent_field(locs, out.matern_used[j], cfg.marginal, rng);
    for (std::size_t i = 0; i < cfg.n; ++i) out.truth_z(i, j) = z[i];
  }
  Matrix x = out.truth_z * out.truth_omega.transpose();
  out.data = FieldSample(std::move(locs), std::move(x));
  return out;
}

}  // namespace sbss
