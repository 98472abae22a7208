#pragma once

// Seeded Monte Carlo replication of the simulation study: scenario x n
// cells, R replicates each, every method evaluated on the same dataset.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <limits>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "sbss/dataio.hpp"
#include "sbss/error.hpp"
#include "sbss/estimator.hpp"
#include "sbss/kernels.hpp"
#include "sbss/metrics.hpp"
#include "sbss/rng.hpp"
#include "sbss/simulate.hpp"

namespace sbss {

/// All rings pooled ("multi") or a single ring h.
struct Method {
  enum class Kind { Multi, Single };
  Kind kind = Kind::Multi;
  std::size_t kernel = 0;  // 1-based, Single only

  static Method multi() { return {}; }
  static Method single(std::size_t h) { return {Kind::Single, h}; }

  std::string name() const { return kind == Kind::Multi ? "multi" : "kernel" + std::to_string(kernel); }
  friend bool operator==(const Method&, const Method&) = default;
};

inline Method parse_method(const std::string& s) {
  if (s == "multi") return Method::multi();
  for (const char* prefix : {"single:", "kernel"}) {
    const std::string pre(prefix);
    if (s.rfind(pre, 0) == 0) {
      const std::string rest = s.substr(pre.size());
      if (!rest.empty() && rest.find_first_not_of("0123456789") == std::string::npos)
        return Method::single(std::stoul(rest));
    }
  }
  throw InvalidInputError("grid.methods: unknown method \"" + s + "\" (expected multi, single:<h> or kernel<h>)");
}

struct StudyGrid {
  std::vector<ScenarioConfig> scenarios;  // n and seed are overridden per cell/replicate
  std::vector<std::size_t> n_values;
  std::size_t replications = 100;
  std::vector<Method> methods;
  std::uint64_t base_seed = 1;
  std::size_t kernels = kDefaultKernelCount;
};

inline std::vector<Method> all_methods(std::size_t kernels) {
  std::vector<Method> m{Method::multi()};
  for (std::size_t h = 1; h <= kernels; ++h) m.push_back(Method::single(h));
  return m;
}

inline void validate(const StudyGrid& g) {
  if (g.replications < 1) throw InvalidInputError("grid.replications: must be >= 1");
  if (g.scenarios.empty()) throw InvalidInputError("grid.scenarios: must not be empty");
  if (g.n_values.empty()) throw InvalidInputError("grid.n_values: must not be empty");
  if (g.methods.empty()) throw InvalidInputError("grid.methods: must not be empty");
  if (g.kernels < 1) throw InvalidInputError("grid.kernels: must be >= 1");
  for (const auto& m : g.methods)
    if (m.kind == Method::Kind::Single && (m.kernel < 1 || m.kernel > g.kernels))
      throw InvalidInputError("grid.methods: kernel index " + std::to_string(m.kernel) + " out of range 1.." +
                              std::to_string(g.kernels));
  for (std::size_t s = 0; s < g.scenarios.size(); ++s) {
    for (std::size_t n : g.n_values) {
      ScenarioConfig c = g.scenarios[s];
      c.n = n;
      try {
        sbss::validate(c);
      } catch (const InvalidInputError& e) {
        throw InvalidInputError("grid.scenarios[" + std::to_string(s) + "]: " + e.what());
      }
    }
  }
}

/// Desk-scale default: p in {3, 10}, Gaussian, random Matern, identity
/// mixing, n in {100, 500, 1000}, R = 100, multi plus every single ring.
inline StudyGrid default_grid() {
  StudyGrid g;
  for (std::size_t p : {3u, 10u}) {
    ScenarioConfig c;
    c.p = p;
    g.scenarios.push_back(c);
  }
  g.n_values = {100, 500, 1000};
  g.replications = 100;
  g.methods = all_methods(g.kernels);
  return g;
}

/// Full-scale grid: p in {3, 50} x {Gaussian, t5}, n in {100, 500, 1000, 2000}, R = 1000.
inline StudyGrid full_grid(std::uint64_t base_seed = 1) {
  StudyGrid g;
  for (std::size_t p : {3u, 50u}) {
    for (Marginal m : {Marginal::Gaussian, Marginal::T5}) {
      ScenarioConfig c;
      c.p = p;
      c.marginal = m;
      g.scenarios.push_back(c);
    }
  }
  g.n_values = {100, 500, 1000, 2000};
  g.replications = 1000;
  g.methods = all_methods(g.kernels);
  g.base_seed = base_seed;
  return g;
}

inline nlohmann::json to_json(const StudyGrid& g) {
  nlohmann::json j;
  j["scenarios"] = nlohmann::json::array();
  for (const auto& s : g.scenarios) {
    auto sj = to_json(s);
    sj.erase("n");
    sj.erase("seed");
    j["scenarios"].push_back(sj);
  }
  j["n_values"] = g.n_values;
  j["replications"] = g.replications;
  j["methods"] = nlohmann::json::array();
  for (const auto& m : g.methods) j["methods"].push_back(m.name());
  j["base_seed"] = g.base_seed;
  j["kernels"] = g.kernels;
  return j;
}

/// Missing keys fall back to default_grid(). "methods": "all" expands to
/// multi plus every ring.
inline StudyGrid grid_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw InvalidInputError("grid: expected a JSON object");
  StudyGrid g = default_grid();
  try {
    if (j.contains("kernels")) g.kernels = j.at("kernels").get<std::size_t>();
    if (j.contains("base_seed")) g.base_seed = j.at("base_seed").get<std::uint64_t>();
    if (j.contains("replications")) g.replications = j.at("replications").get<std::size_t>();
    if (j.contains("n_values")) g.n_values = j.at("n_values").get<std::vector<std::size_t>>();
  } catch (const nlohmann::json::exception& e) {
    throw InvalidInputError(std::string("grid: wrong type (") + e.what() + ")");
  }
  if (j.contains("scenarios")) {
    const auto& s = j.at("scenarios");
    if (!s.is_array()) throw InvalidInputError("grid.scenarios: expected an array");
    g.scenarios.clear();
    for (std::size_t i = 0; i < s.size(); ++i)
      g.scenarios.push_back(scenario_from_json(s[i], "grid.scenarios[" + std::to_string(i) + "]"));
  }
  g.methods = all_methods(g.kernels);
  if (j.contains("methods")) {
    const auto& m = j.at("methods");
    if (m.is_string() && m.get<std::string>() == "all") {
      // keep all_methods
    } else if (m.is_array()) {
      g.methods.clear();
      for (const auto& e : m) {
        if (!e.is_string()) throw InvalidInputError("grid.methods: expected strings");
        g.methods.push_back(parse_method(e.get<std::string>()));
      }
    } else {
      throw InvalidInputError("grid.methods: expected \"all\" or an array of method names");
    }
  }
  return g;
}

struct StudyRow {
  std::size_t scenario_id = 0;
  std::size_t n = 0;
  std::size_t p = 0;
  Marginal marginal = Marginal::Gaussian;
  std::string method;
  std::size_t replicate = 0;
  double d_index = std::numeric_limits<double>::quiet_NaN();
  double v_gap = std::numeric_limits<double>::quiet_NaN();
  std::string status = "ok";  // "ok" or "error:<kind>"
  double seconds = 0.0;

  bool ok() const noexcept { return status == "ok"; }
};

/// Seed of replicate r in cell (scenario s, sample size n).
inline std::uint64_t replicate_seed(std::uint64_t base_seed, std::size_t scenario, std::size_t n, std::size_t r) {
  return derive_stream(derive_stream(base_seed, scenario, n), 0x5eed, r);
}

/// Worker count after applying the SPATIAL_BSS_THREADS cap.
inline std::size_t effective_workers(std::size_t requested) {
  std::size_t w = requested == 0 ? std::max(1u, std::thread::hardware_concurrency()) : requested;
  if (const char* cap = std::getenv("SPATIAL_BSS_THREADS"); cap && *cap) {
    char* end = nullptr;
    const unsigned long v = std::strtoul(cap, &end, 10);
    if (end && *end == '\0' && v >= 1) w = std::min<std::size_t>(w, v);
  }
  return std::max<std::size_t>(w, 1);
}

namespace detail {

inline std::string status_of(const Error& e) {
  switch (e.kind()) {
    case ErrorKind::InvalidInput: return "error:invalid-input";
    case ErrorKind::Io: return "error:io";
    case ErrorKind::Numerical: return "error:numerical";
    case ErrorKind::Convergence: return "error:convergence";
  }
  return "error:unknown";
}

// All method rows of one replicate; every failure is recorded in-row.
inline std::vector<StudyRow> run_replicate(const StudyGrid& g, std::size_t s, std::size_t n, std::size_t r) {
  using clock = std::chrono::steady_clock;
  ScenarioConfig cfg = g.scenarios[s];
  cfg.n = n;
  cfg.seed = replicate_seed(g.base_seed, s, n, r);

  std::vector<StudyRow> rows(g.methods.size());
  for (std::size_t m = 0; m < g.methods.size(); ++m) {
    rows[m].scenario_id = s;
    rows[m].n = n;
    rows[m].p = cfg.p;
    rows[m].marginal = cfg.marginal;
    rows[m].method = g.methods[m].name();
    rows[m].replicate = r;
  }

  const auto t0 = clock::now();
  SimulatedDataset ds;
  WhitenedLocalCovs prep;
  try {
    ds = gen_dataset(cfg);
    prep = prepare_local_covs(ds.data, decile_boundaries(ds.data.locations(), g.kernels));
  } catch (const Error& e) {
    for (auto& row : rows) row.status = status_of(e);
    return rows;
  }
  const double prep_seconds = std::chrono::duration<double>(clock::now() - t0).count();

  for (std::size_t m = 0; m < g.methods.size(); ++m) {
    const auto t1 = clock::now();
    try {
      const Method& method = g.methods[m];
      const std::vector<std::size_t> sel =
          method.kind == Method::Kind::Multi ? std::vector<std::size_t>{} : std::vector<std::size_t>{method.kernel};
      const BssEstimate est = estimate_from(prep, sel);
      rows[m].d_index = d_index(ds.truth_omega, est.omega_hat);
      const GapReport gaps = gap_report(est.lambda_hat);
      if (gaps.v_gap) rows[m].v_gap = *gaps.v_gap;
    } catch (const Error& e) {
      rows[m].status = status_of(e);
    }
    rows[m].seconds = prep_seconds + std::chrono::duration<double>(clock::now() - t1).count();
  }
  return rows;
}

}  // namespace detail

/// Runs every (scenario, n, replicate) on a pool of `workers` threads.
/// Rows come back sorted by (scenario_id, n, replicate, method order), so
/// the table is independent of scheduling.
inline std::vector<StudyRow> run_study(const StudyGrid& grid, std::size_t workers = 1) {
  validate(grid);
  struct Task {
    std::size_t s, n, r;
  };
  std::vector<Task> tasks;
  for (std::size_t s = 0; s < grid.scenarios.size(); ++s)
    for (std::size_t n : grid.n_values)
      for (std::size_t r = 0; r < grid.replications; ++r) tasks.push_back({s, n, r});

  std::vector<std::vector<StudyRow>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t t = next++; t < tasks.size(); t = next++)
      results[t] = detail::run_replicate(grid, tasks[t].s, tasks[t].n, tasks[t].r);
  };
  const std::size_t w = std::min(effective_workers(workers), std::max<std::size_t>(tasks.size(), 1));
  if (w <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t i = 0; i < w; ++i) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<StudyRow> rows;
  rows.reserve(tasks.size() * grid.methods.size());
  for (auto& r : results) rows.insert(rows.end(), r.begin(), r.end());
  return rows;
}

struct SummaryRow {
  std::size_t scenario_id = 0;
  std::size_t n = 0;
  std::size_t p = 0;
  Marginal marginal = Marginal::Gaussian;
  std::string method;
  std::size_t count = 0;     // successful replicates
  std::size_t failures = 0;
  double d_min = std::numeric_limits<double>::quiet_NaN();
  double d_q1 = d_min, d_median = d_min, d_q3 = d_min, d_max = d_min, d_mean = d_min;
  double v_gap_median = d_min;
};

/// Linear-interpolation quantile of sorted data (type 7).
inline double quantile_sorted(const std::vector<double>& sorted, double q) {
  if (sorted.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

/// Per (scenario, n, method) quantiles of D over successful replicates.
inline std::vector<SummaryRow> summarize(const std::vector<StudyRow>& rows) {
  using Key = std::tuple<std::size_t, std::size_t, std::string>;
  std::vector<Key> order;
  std::map<Key, std::pair<std::vector<double>, std::vector<double>>> groups;
  std::map<Key, SummaryRow> heads;
  for (const auto& r : rows) {
    const Key k{r.scenario_id, r.n, r.method};
    auto [it, fresh] = heads.try_emplace(k);
    if (fresh) {
      order.push_back(k);
      it->second.scenario_id = r.scenario_id;
      it->second.n = r.n;
      it->second.p = r.p;
      it->second.marginal = r.marginal;
      it->second.method = r.method;
    }
    if (r.ok() && std::isfinite(r.d_index)) {
      groups[k].first.push_back(r.d_index);
      if (std::isfinite(r.v_gap)) groups[k].second.push_back(r.v_gap);
    } else {
      ++it->second.failures;
    }
  }
  std::vector<SummaryRow> out;
  for (const auto& k : order) {
    SummaryRow s = heads[k];
    auto& [d, gaps] = groups[k];
    std::sort(d.begin(), d.end());
    std::sort(gaps.begin(), gaps.end());
    s.count = d.size();
    if (!d.empty()) {
      s.d_min = d.front();
      s.d_q1 = quantile_sorted(d, 0.25);
      s.d_median = quantile_sorted(d, 0.5);
      s.d_q3 = quantile_sorted(d, 0.75);
      s.d_max = d.back();
      double sum = 0.0;
      for (double v : d) sum += v;
      s.d_mean = sum / static_cast<double>(d.size());
    }
    s.v_gap_median = quantile_sorted(gaps, 0.5);
    out.push_back(std::move(s));
  }
  return out;
}

namespace detail {
inline std::string num_or_na(double v) { return std::isfinite(v) ? format_double(v) : "NA"; }
}  // namespace detail

/// study.csv. Wall time is written only with `include_timing`; otherwise the
/// seconds column holds NA and the file is reproducible bit for bit.
inline void write_study_csv(const std::vector<StudyRow>& rows, const std::filesystem::path& path,
                            bool include_timing = false) {
  auto out = detail::open_out(path);
  out << "scenario_id,n,p,marginal,method,replicate,d_index,v_gap,status,seconds\n";
  for (const auto& r : rows) {
    out << r.scenario_id << ',' << r.n << ',' << r.p << ',' << to_string(r.marginal) << ',' << r.method << ','
        << r.replicate << ',' << detail::num_or_na(r.d_index) << ',' << detail::num_or_na(r.v_gap) << ','
        << r.status << ',' << (include_timing ? format_double(r.seconds) : std::string("NA")) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

inline void write_summary_csv(const std::vector<SummaryRow>& rows, const std::filesystem::path& path) {
  auto out = detail::open_out(path);
  out << "scenario_id,n,p,marginal,method,count,failures,d_min,d_q1,d_median,d_q3,d_max,d_mean,v_gap_median\n";
  for (const auto& s : rows) {
    out << s.scenario_id << ',' << s.n << ',' << s.p << ',' << to_string(s.marginal) << ',' << s.method << ','
        << s.count << ',' << s.failures << ',' << detail::num_or_na(s.d_min) << ','
        << detail::num_or_na(s.d_q1) << ',' << detail::num_or_na(s.d_median) << ','
        << detail::num_or_na(s.d_q3) << ',' << detail::num_or_na(s.d_max) << ','
        << detail::num_or_na(s.d_mean) << ',' << detail::num_or_na(s.v_gap_median) << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace sbss
