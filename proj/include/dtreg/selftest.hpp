#ifndef DTREG_SELFTEST_HPP
#define DTREG_SELFTEST_HPP

#include <cmath>
#include <ostream>
#include <string>

#include "dtreg/bootstrap.hpp"
#include "dtreg/curves.hpp"
#include "dtreg/dr_fit.hpp"
#include "dtreg/simulation.hpp"

namespace dtreg {

/// Quick invariant suite behind the `selftest` subcommand: canonical
/// balance, the decomposition identity, degenerate-weight replicates,
/// rearrangement, and bootstrap determinism on a small synthetic dataset.
/// Returns the number of failed checks.
inline int run_selftest(std::ostream& log) {
  int failures = 0;
  auto check = [&](bool ok, const std::string& what) {
    log << (ok ? "[ok]   " : "[FAIL] ") << what << '\n';
    if (!ok) ++failures;
  };

  DgpSpec spec;
  spec.id = DgpId::dgp1;
  spec.pi1 = 0.5;
  spec.n = 400;
  spec.seed = 20240911;
  Dataset data = sample_dgp(spec);
  DesignMatrix design = build_design_matrix(data, TransformSpec{});

  GridSpec gspec;
  gspec.kind = GridKind::quantile;
  gspec.count = 7;
  gspec.lower_prob = 0.1;
  gspec.upper_prob = 0.9;
  ThresholdGrid grid = make_threshold_grid(data, gspec);
  check(std::is_sorted(grid.values.begin(), grid.values.end()) &&
            std::adjacent_find(grid.values.begin(), grid.values.end()) ==
                grid.values.end(),
        "threshold grid strictly increasing");

  for (Link link : {Link::logit, Link::linear}) {
    DrFit fit = fit_all(data, design, grid, link);
    Eigen::MatrixXd balance = balance_residual(fit, data, design);
    double worst = balance.cwiseAbs().maxCoeff();
    double tol = link == Link::logit ? 1e-8 : 1e-12;
    check(worst <= tol, "canonical balance (" + link_name(link) +
                            "): max |residual| = " + std::to_string(worst));

    // adjusted equals simple + augmentation wherever balance holds
    double worst_gap = 0.0;
    for (int k = 0; k < 2; ++k) {
      CurveEstimate adj = adjusted_cdf(fit, data, design, k);
      CurveEstimate simple = simple_cdf(data, grid, k);
      Eigen::MatrixXd pred = predict_cdf(fit, design, k);
      auto rows = data.rows_of_arm(k);
      for (std::size_t j = 0; j < grid.size(); ++j) {
        double all_mean = pred.col(static_cast<Eigen::Index>(j)).mean();
        double arm_mean = 0.0;
        for (auto i : rows) arm_mean += pred(i, static_cast<Eigen::Index>(j));
        arm_mean /= static_cast<double>(rows.size());
        double augmented = simple.values[j] + all_mean - arm_mean;
        worst_gap = std::max(worst_gap, std::abs(adj.values[j] - augmented));
      }
    }
    check(worst_gap <= 1e-10, "decomposition identity (" + link_name(link) +
                                  "): max gap = " + std::to_string(worst_gap));

    // degenerate weights reproduce the point estimate
    ReplicateEngine engine(fit, data, design, 1, 0);
    CurveEstimate point = engine.point_effect(EffectKind::dte, 0.0,
                                              Adjustment::regression_adjusted, false);
    std::vector<double> rep = engine.replicate_effect(
        EffectKind::dte, 0.0, Adjustment::regression_adjusted,
        ReplicateFormula::augmented, Eigen::VectorXd::Ones(data.n()), false);
    double gap = 0.0;
    for (std::size_t j = 0; j < rep.size(); ++j) {
      gap = std::max(gap, std::abs(rep[j] - point.values[j]));
    }
    check(gap <= 1e-9, "unit weights reproduce the point estimate (" +
                           link_name(link) + ")");
  }

  // rearrangement: idempotent, multiset-preserving
  CurveEstimate wiggly;
  wiggly.grid = grid;
  wiggly.kind = CurveKind::cdf;
  wiggly.values = {0.2, 0.1, 0.5, 0.4, 0.4, 0.9, 1.0};
  wiggly.values.resize(grid.size(), 1.0);
  CurveEstimate once = rearrange(wiggly);
  CurveEstimate twice = rearrange(once);
  check(once.values == twice.values && once.monotonized,
        "rearrangement idempotent");

  // weight schemes
  std::mt19937_64 rng(7);
  Eigen::VectorXd s = gen_weights(WeightScheme::multinomial, 257, rng);
  check(std::lround(s.sum()) == 257 && s.minCoeff() >= 0.0,
        "multinomial weights sum to n");

  // determinism of a bootstrap run
  DrFit fit = fit_all(data, design, grid, Link::logit);
  ReplicateEngine engine(fit, data, design, 1, 0);
  BootstrapConfig boot;
  boot.replicates = 50;
  boot.seed = 99;
  boot.threads = 1;
  InferenceResult a = bootstrap_effect(engine, EffectKind::dte, 0.0,
                                       Adjustment::regression_adjusted, boot);
  boot.threads = 4;
  InferenceResult b = bootstrap_effect(engine, EffectKind::dte, 0.0,
                                       Adjustment::regression_adjusted, boot);
  check(a.se == b.se && a.ci_lo == b.ci_lo,
        "bootstrap bit-identical across thread counts");

  log << (failures == 0 ? "selftest: all checks passed\n"
                        : "selftest: " + std::to_string(failures) + " check(s) failed\n");
  return failures;
}

}  // namespace dtreg

#endif  // DTREG_SELFTEST_HPP
