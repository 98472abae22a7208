// Simulate three mixed Matern fields, unmix them, and report how well the
// mixing matrix was recovered.

#include <cstdio>

#include "sbss/sbss.hpp"

int main() {
  sbss::ScenarioConfig cfg;
  cfg.n = 500;
  cfg.p = 3;
  cfg.matern = {{1.0, 0.5}, {1.0, 2.0}, {2.0, 5.0}};
  cfg.omega_kind = sbss::OmegaKind::RandomInvertible;
  cfg.seed = 7;

  try {
    const auto ds = sbss::gen_dataset(cfg);
    const auto bank = sbss::decile_boundaries(ds.data.locations());
    const auto est = sbss::estimate(ds.data, bank);

    std::printf("eigenvalues of W:");
    for (double l : est.lambda_hat) std::printf(" %.4f", l);
    const auto gaps = sbss::gap_report(est.lambda_hat);
    std::printf("\nv_gap = %.4f\n", *gaps.v_gap);
    std::printf("D(Omega, Omega_hat) = %.4f\n", sbss::d_index(ds.truth_omega, est.omega_hat));

    const sbss::Matrix z = sbss::ic_scores(est, ds.data);
    const sbss::Matrix corr = sbss::abs_corr_match(z, ds.truth_z);
    std::printf("|corr(IC, latent)|:\n");
    for (std::size_t i = 0; i < corr.rows(); ++i) {
      for (std::size_t j = 0; j < corr.cols(); ++j) std::printf(" %.3f", corr(i, j));
      std::printf("\n");
    }
  } catch (const sbss::Error& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return sbss::exit_code(e.kind());
  }
  return 0;
}
