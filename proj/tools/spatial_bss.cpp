// spatial_bss: simulate, estimate, replicate and diagnose from the command line.
//
// Exit codes: 0 success, 1 configuration, 2 I/O, 3 numerical degeneracy,
// 4 convergence failure.

#include <cstdint>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sbss/sbss.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

json base_meta(const std::string& command, const json& config) {
  json meta;
  meta["tool"] = "spatial_bss";
  meta["version"] = sbss::kVersion;
  meta["command"] = command;
  meta["config"] = config;
  meta["config_hash"] = sbss::fnv1a_hex(config.dump());
  meta["timestamp"] = sbss::run_timestamp();
  return meta;
}

json load_json_object(const std::string& path, const char* what) {
  json j = sbss::read_json(path);
  if (!j.is_object()) throw sbss::InvalidInputError(std::string(what) + ": expected a JSON object in " + path);
  return j;
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ','))
    if (!item.empty()) out.push_back(item);
  return out;
}

std::vector<std::size_t> parse_cuts(const std::string& s) {
  std::vector<std::size_t> cuts;
  for (const auto& item : split_list(s)) {
    if (item.find_first_not_of("0123456789") != std::string::npos)
      throw sbss::InvalidInputError("--blocks: \"" + item + "\" is not a non-negative integer");
    cuts.push_back(std::stoul(item));
  }
  return cuts;
}

json matern_json(const std::vector<sbss::MaternParams>& ms) {
  json a = json::array();
  for (const auto& m : ms) a.push_back({{"kappa", m.kappa}, {"phi", m.phi}});
  return a;
}

// ---------------------------------------------------------------- simulate

struct SimulateOptions {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> n, p;
  std::optional<std::string> marginal;
};

sbss::ScenarioConfig effective_scenario(const std::string& path, const std::optional<std::uint64_t>& seed,
                                        const std::optional<std::size_t>& n, const std::optional<std::size_t>& p,
                                        const std::optional<std::string>& marginal) {
  json j = path.empty() ? json::object() : load_json_object(path, "config");
  if (seed) j["seed"] = *seed;
  if (n) j["n"] = *n;
  if (p) j["p"] = *p;
  if (marginal) j["marginal"] = *marginal;
  sbss::ScenarioConfig cfg = sbss::scenario_from_json(j);
  sbss::validate(cfg);
  return cfg;
}

int run_simulate(const SimulateOptions& o) {
  const sbss::ScenarioConfig cfg = effective_scenario(o.config, o.seed, o.n, o.p, o.marginal);
  const sbss::SimulatedDataset ds = sbss::gen_dataset(cfg);
  const fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw sbss::IoError("cannot create directory " + dir.string() + ": " + ec.message());

  const auto& locs = ds.data.locations();
  sbss::Matrix joined(cfg.n, 2 + cfg.p);
  std::vector<std::string> header{"x", "y"};
  for (std::size_t j = 0; j < cfg.p; ++j) header.push_back("X" + std::to_string(j + 1));
  for (std::size_t i = 0; i < cfg.n; ++i) {
    joined(i, 0) = locs.point(i)[0];
    joined(i, 1) = locs.point(i)[1];
    for (std::size_t j = 0; j < cfg.p; ++j) joined(i, 2 + j) = ds.data.values()(i, j);
  }
  sbss::write_matrix_csv(dir / "data.csv", joined, header);
  sbss::write_matrix_csv(dir / "truth_omega.csv", ds.truth_omega);
  std::vector<std::string> zh;
  for (std::size_t j = 0; j < cfg.p; ++j) zh.push_back("z" + std::to_string(j + 1));
  sbss::write_matrix_csv(dir / "truth_z.csv", ds.truth_z, zh);

  json meta = base_meta("simulate", sbss::to_json(cfg));
  meta["seed"] = cfg.seed;
  meta["matern_used"] = matern_json(ds.matern_used);
  meta["n"] = cfg.n;
  meta["p"] = cfg.p;
  sbss::write_json(dir / "meta.json", meta);
  std::cout << "wrote " << (dir / "data.csv").string() << " (" << cfg.n << " sites, " << cfg.p << " fields)\n";
  return 0;
}

// ---------------------------------------------------------------- estimate

struct EstimateOptions {
  std::string config;
  std::optional<std::string> data;
  std::optional<std::string> scenario;
  std::optional<std::string> coords;
  std::optional<std::string> values;
  std::optional<std::size_t> kernels;
  std::optional<std::size_t> single_kernel;
  bool ilr = false;
  bool standardize = false;
  std::optional<std::string> out;
};

int run_estimate(const EstimateOptions& o) {
  // Config file first, flags on top.
  json cfg = o.config.empty() ? json::object() : load_json_object(o.config, "estimate config");
  if (o.data) cfg["data"] = *o.data;
  if (o.scenario) cfg["scenario"] = *o.scenario;
  if (o.coords) cfg["coords"] = split_list(*o.coords);
  if (o.values) cfg["values"] = split_list(*o.values);
  if (o.kernels) cfg["kernels"] = *o.kernels;
  if (o.single_kernel) cfg["single_kernel"] = *o.single_kernel;
  if (o.ilr) cfg["ilr"] = true;
  if (o.standardize) cfg["standardize"] = true;
  if (o.out) cfg["out"] = *o.out;
  if (!cfg.contains("coords")) cfg["coords"] = std::vector<std::string>{"x", "y"};
  if (!cfg.contains("values")) cfg["values"] = std::vector<std::string>{};
  if (!cfg.contains("kernels")) cfg["kernels"] = sbss::kDefaultKernelCount;
  if (!cfg.contains("ilr")) cfg["ilr"] = false;
  if (!cfg.contains("standardize")) cfg["standardize"] = false;

  const bool has_data = cfg.contains("data"), has_scenario = cfg.contains("scenario");
  if (has_data == has_scenario)
    throw sbss::InvalidInputError("estimate: give exactly one input source, --data CSV or --scenario JSON");
  if (!cfg.contains("out")) throw sbss::InvalidInputError("estimate: --out is required");

  std::size_t kernels, single = 0;
  std::vector<std::string> coord_names, value_names;
  bool ilr, standardize;
  try {
    kernels = cfg.at("kernels").get<std::size_t>();
    if (cfg.contains("single_kernel")) single = cfg.at("single_kernel").get<std::size_t>();
    coord_names = cfg.at("coords").get<std::vector<std::string>>();
    value_names = cfg.at("values").get<std::vector<std::string>>();
    ilr = cfg.at("ilr").get<bool>();
    standardize = cfg.at("standardize").get<bool>();
  } catch (const json::exception& e) {
    throw sbss::InvalidInputError(std::string("estimate config: wrong type (") + e.what() + ")");
  }
  if (kernels < 1) throw sbss::InvalidInputError("estimate: --kernels must be >= 1");
  if (cfg.contains("single_kernel") && (single < 1 || single > kernels))
    throw sbss::InvalidInputError("estimate: --single-kernel must be in 1.." + std::to_string(kernels));

  sbss::FieldSample sample;
  std::optional<sbss::Matrix> truth;
  json seed = nullptr;
  if (has_data) {
    sbss::RawTable table = sbss::read_csv(cfg.at("data").get<std::string>(), coord_names, value_names);
    sbss::Matrix values = table.values;
    if (ilr) values = sbss::ilr_transform(values);
    sample = sbss::FieldSample(table.locations(), std::move(values));
  } else {
    const sbss::ScenarioConfig sc = effective_scenario(cfg.at("scenario").get<std::string>(), {}, {}, {}, {});
    if (ilr) throw sbss::InvalidInputError("estimate: --ilr applies to CSV compositions only");
    sbss::SimulatedDataset ds = sbss::gen_dataset(sc);
    sample = ds.data;
    truth = ds.truth_omega;
    seed = sc.seed;
    cfg["scenario_config"] = sbss::to_json(sc);
    coord_names = {"x", "y"};
  }
  if (standardize) sample = sbss::standardize(sample);

  const sbss::KernelBank bank = sbss::decile_boundaries(sample.locations(), kernels);
  std::vector<std::size_t> selection;
  if (single) selection.push_back(single);
  const sbss::BssEstimate est = sbss::estimate(sample, bank, selection);

  const fs::path dir(cfg.at("out").get<std::string>());
  cfg.erase("out");  // the echo must not depend on where results go
  json meta = base_meta("estimate", cfg);
  meta["seed"] = seed;
  json bounds = json::array();
  for (double c : bank.boundaries()) bounds.push_back(std::isfinite(c) ? json(c) : json("inf"));
  meta["kernel_boundaries"] = bounds;
  meta["kernels_used"] = est.kernels;
  meta["degenerate_eigenvalues"] = est.degenerate;

  auto manifest = sbss::write_results(sbss::make_bundle(est, sample, coord_names, meta), dir);
  if (truth) {
    sbss::write_matrix_csv(dir / "truth_omega.csv", *truth);
    manifest.push_back(dir / "truth_omega.csv");
  }
  for (const auto& f : manifest) std::cout << "wrote " << f.string() << '\n';
  return 0;
}

// ---------------------------------------------------------------- replicate

struct ReplicateOptions {
  std::string grid;
  std::string out;
  std::size_t workers = 1;
  std::optional<std::uint64_t> seed;
  bool full = false;
  bool dry_run = false;
  bool timing = false;
};

int run_replicate(const ReplicateOptions& o) {
  sbss::StudyGrid grid = o.grid.empty() ? sbss::default_grid() : sbss::grid_from_json(load_json_object(o.grid, "grid"));
  if (o.full) grid = sbss::full_grid(grid.base_seed);
  if (o.seed) grid.base_seed = *o.seed;
  sbss::validate(grid);

  const fs::path dir(o.out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw sbss::IoError("cannot create directory " + dir.string() + ": " + ec.message());

  json meta = base_meta("replicate", sbss::to_json(grid));
  meta["full"] = o.full;
  meta["seed"] = grid.base_seed;
  meta["timing"] = o.timing;
  sbss::write_json(dir / "meta.json", meta);
  if (o.dry_run) {
    std::cout << sbss::to_json(grid).dump(2) << '\n';
    return 0;
  }

  const auto rows = sbss::run_study(grid, o.workers);
  const auto summary = sbss::summarize(rows);
  sbss::write_study_csv(rows, dir / "study.csv", o.timing);
  sbss::write_summary_csv(summary, dir / "summary.csv");

  std::size_t failures = 0;
  for (const auto& s : summary) failures += s.failures;
  std::cout << "wrote " << rows.size() << " rows to " << (dir / "study.csv").string() << " and "
            << summary.size() << " cells to " << (dir / "summary.csv").string();
  if (failures) std::cout << " (" << failures << " failed replicate rows)";
  std::cout << '\n';
  return 0;
}

// ---------------------------------------------------------------- diagnose

struct DiagnoseOptions {
  std::string bundle;
  std::optional<std::string> blocks;
  std::optional<std::size_t> suggest;
  std::optional<std::string> truth;
  std::optional<std::string> out;
};

void print_block_table(std::ostream& os, const sbss::Matrix& norms) {
  for (std::size_t a = 0; a < norms.rows(); ++a) {
    os << "  ";
    for (std::size_t b = 0; b < norms.cols(); ++b) os << ' ' << std::setw(16) << norms(a, b);
    os << '\n';
  }
}

json matrix_json(const sbss::Matrix& m) {
  json rows = json::array();
  for (std::size_t i = 0; i < m.rows(); ++i) {
    auto r = m.row(i);
    rows.push_back(std::vector<double>(r.begin(), r.end()));
  }
  return rows;
}

int run_diagnose(const DiagnoseOptions& o) {
  const fs::path dir(o.bundle);
  if (!fs::is_directory(dir)) throw sbss::IoError("diagnose: bundle directory " + dir.string() + " not found");
  const sbss::ResultBundle b = sbss::read_results(dir);
  const std::size_t p = b.p;
  if (p == 0) throw sbss::IoError("diagnose: bundle has no eigenvalues");

  json report;
  std::ostream& os = std::cout;
  const sbss::GapReport gaps = sbss::gap_report(b.lambda_hat);
  report["p"] = p;
  report["lambda_hat"] = b.lambda_hat;
  report["gaps"] = gaps.gaps;
  os << "eigenvalues (p = " << p << ")\n";
  os << std::setprecision(10);
  for (std::size_t i = 0; i < p; ++i) {
    os << "  " << std::setw(4) << (i + 1) << "  " << std::setw(16) << b.lambda_hat[i];
    if (i > 0) os << "  gap " << gaps.gaps[i - 1];
    os << '\n';
  }
  if (gaps.v_gap) {
    os << "v_gap = " << *gaps.v_gap << '\n';
    report["v_gap"] = *gaps.v_gap;
  } else {
    os << "no gaps (p = 1)\n";
    report["v_gap"] = nullptr;
  }

  std::optional<sbss::BlockStructure> blocks;
  if (o.blocks && o.suggest) throw sbss::InvalidInputError("diagnose: --blocks and --suggest-blocks are exclusive");
  if (o.blocks) {
    blocks.emplace(parse_cuts(*o.blocks));
    if (blocks->dimension() != p)
      throw sbss::InvalidInputError("--blocks: last cut " + std::to_string(blocks->dimension()) +
                                    " must equal p = " + std::to_string(p));
  } else if (o.suggest) {
    if (p == 1) throw sbss::InvalidInputError("--suggest-blocks: p = 1 has no gaps to split at");
    blocks.emplace(sbss::suggest_blocks(gaps, *o.suggest));
  }
  if (blocks) {
    report["blocks"] = blocks->cuts();
    os << "blocks:";
    for (auto c : blocks->cuts()) os << ' ' << c;
    os << '\n';

    // Omega_hat^T Omega_hat = U^T S U, blockwise.
    const sbss::Matrix g = b.omega_hat.transpose() * b.omega_hat;
    const std::size_t m = blocks->blocks();
    sbss::Matrix norms(m, m);
    std::vector<double> traces(m);
    for (std::size_t a = 0; a < m; ++a) {
      for (std::size_t c = 0; c < m; ++c)
        norms(a, c) = sbss::spectral_norm(g.block(blocks->begin(a), blocks->begin(c), blocks->size(a), blocks->size(c)));
      traces[a] = sbss::trace(g.block(blocks->begin(a), blocks->begin(a), blocks->size(a), blocks->size(a)));
    }
    os << "Omega_hat^T Omega_hat block spectral norms:\n";
    print_block_table(os, norms);
    report["omega_gram_block_norms"] = matrix_json(norms);
    report["omega_gram_block_traces"] = traces;
  }

  const std::size_t leading = blocks ? blocks->size(0) : p;
  const sbss::TraceSummary tr = sbss::trace_summary(b.omega_hat, leading);
  os << "tr(Omega_hat^T Omega_hat) = " << tr.total << '\n';
  os << "tr(leading " << tr.leading_size << "x" << tr.leading_size << " block) = " << tr.leading << '\n';
  report["trace_total"] = tr.total;
  report["trace_leading"] = tr.leading;
  report["trace_leading_size"] = tr.leading_size;

  std::optional<fs::path> truth_path;
  if (o.truth)
    truth_path = fs::path(*o.truth);
  else if (fs::exists(dir / "truth_omega.csv"))
    truth_path = dir / "truth_omega.csv";
  if (truth_path) {
    const sbss::Matrix truth = sbss::read_matrix_csv(*truth_path);
    if (truth.rows() != p || truth.cols() != p)
      throw sbss::InvalidInputError("diagnose: truth Omega in " + truth_path->string() + " is not " +
                                    std::to_string(p) + "x" + std::to_string(p));
    const sbss::BlockStructure bs = blocks ? *blocks : sbss::BlockStructure({0, p});
    // Truth columns follow the estimate's eigenvalue order before blocking.
    const sbss::Matrix aligned = sbss::align_truth(truth, b.omega_hat);
    const sbss::BlockDiagnostics diag = sbss::gamma_diagnostics(aligned, b.omega_hat, bs);
    const double d = sbss::d_index(truth, b.omega_hat);
    os << "D(Omega, Omega_hat) = " << d << '\n';
    os << "Gamma_Omega = Omega_hat^{-1} Omega block spectral norms:\n";
    print_block_table(os, diag.norms);
    os << "diagonal-block deviations |Gamma_ii - I|:";
    for (double v : diag.diagonal_deviation) os << ' ' << v;
    os << '\n';
    report["d_index"] = d;
    report["gamma_block_norms"] = matrix_json(diag.norms);
    report["gamma_diagonal_deviation"] = diag.diagonal_deviation;
  }

  if (o.out) sbss::write_json(*o.out, report);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Spatial blind source separation by whitened multi-kernel eigenanalysis"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(sbss::kVersion));

  SimulateOptions sim;
  auto* simulate = app.add_subcommand("simulate", "Generate a synthetic dataset from a scenario config");
  simulate->add_option("--config", sim.config, "Scenario JSON (n, p, box, marginal, matern, omega, seed)");
  simulate->add_option("--out", sim.out, "Output directory")->required();
  simulate->add_option("--seed", sim.seed, "Override config seed");
  simulate->add_option("--n", sim.n, "Override site count");
  simulate->add_option("--p", sim.p, "Override field count");
  simulate->add_option("--marginal", sim.marginal, "Override marginal (gaussian|t5)");

  EstimateOptions est;
  auto* estimate = app.add_subcommand("estimate", "Estimate the mixing matrix and IC scores");
  estimate->add_option("--config", est.config, "Estimate JSON; flags override its keys");
  auto* data_opt = estimate->add_option("--data", est.data, "Input CSV with header");
  auto* scen_opt = estimate->add_option("--scenario", est.scenario, "Simulate from this scenario JSON instead");
  data_opt->excludes(scen_opt);
  estimate->add_option("--coords", est.coords, "Coordinate columns (default x,y)");
  estimate->add_option("--values", est.values, "Value columns (default: all others)");
  estimate->add_option("--kernels", est.kernels, "Number of ring kernels (default 10)");
  estimate->add_option("--single-kernel", est.single_kernel, "Use only ring h of the bank");
  estimate->add_flag("--ilr", est.ilr, "Apply the isometric log-ratio transform to the value columns");
  estimate->add_flag("--standardize", est.standardize, "Standardize to zero mean and identity covariance");
  estimate->add_option("--out", est.out, "Output bundle directory");

  ReplicateOptions rep;
  auto* replicate = app.add_subcommand("replicate", "Run a seeded Monte Carlo study");
  replicate->add_option("--grid", rep.grid, "Study grid JSON (default: desk-scale grid)");
  replicate->add_option("--out", rep.out, "Output directory")->required();
  replicate->add_option("--workers", rep.workers, "Worker threads (capped by SPATIAL_BSS_THREADS)");
  replicate->add_option("--seed", rep.seed, "Override base seed");
  replicate->add_flag("--full", rep.full, "Use the full-scale grid (R=1000, n up to 2000, p up to 50)");
  replicate->add_flag("--dry-run", rep.dry_run, "Write meta.json with the effective grid and stop");
  replicate->add_flag("--timing", rep.timing, "Record wall time per row (makes study.csv non-reproducible)");

  DiagnoseOptions dia;
  auto* diagnose = app.add_subcommand("diagnose", "Eigengaps, block diagnostics and traces of a bundle");
  diagnose->add_option("--bundle", dia.bundle, "Bundle directory written by estimate")->required();
  diagnose->add_option("--blocks", dia.blocks, "Block cuts, e.g. 0,12,30");
  diagnose->add_option("--suggest-blocks", dia.suggest, "Split into m blocks at the largest gaps");
  diagnose->add_option("--truth", dia.truth, "True mixing matrix CSV (default: bundle/truth_omega.csv)");
  diagnose->add_option("--out", dia.out, "Write the report as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return sbss::exit_code(sbss::ErrorKind::InvalidInput);
  }

  try {
    if (*simulate) return run_simulate(sim);
    if (*estimate) return run_estimate(est);
    if (*replicate) return run_replicate(rep);
    if (*diagnose) return run_diagnose(dia);
  } catch (const sbss::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return sbss::exit_code(e.kind());
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return sbss::exit_code(sbss::ErrorKind::InvalidInput);
  }
  return 0;
}
