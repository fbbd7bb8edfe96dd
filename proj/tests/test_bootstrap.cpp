#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "dtreg/bootstrap.hpp"
#include "dtreg/simulation.hpp"

using namespace dtreg;

namespace {

struct Fixture {
  Dataset data;
  DesignMatrix design;
  ThresholdGrid grid;
  DrFit fit;
};

Fixture make_fixture(Eigen::Index n = 300, Link link = Link::logit,
                     std::uint64_t seed = 404) {
  DgpSpec spec;
  spec.id = DgpId::dgp1;
  spec.n = n;
  spec.seed = seed;
  Fixture f{sample_dgp(spec), {}, {}, {}};
  f.design = build_design_matrix(f.data, TransformSpec{});
  GridSpec gspec;
  gspec.kind = GridKind::quantile;
  gspec.count = 7;
  f.grid = make_threshold_grid(f.data, gspec);
  f.fit = fit_all(f.data, f.design, f.grid, link);
  return f;
}

}  // namespace

TEST_CASE("multinomial weights sum to n; single unit gets weight one") {
  std::mt19937_64 rng(5);
  for (Eigen::Index n : {1, 2, 17, 300}) {
    Eigen::VectorXd s = gen_weights(WeightScheme::multinomial, n, rng);
    CHECK(std::lround(s.sum()) == n);
    CHECK(s.minCoeff() >= 0.0);
  }
  Eigen::VectorXd one = gen_weights(WeightScheme::multinomial, 1, rng);
  CHECK(one[0] == 1.0);
}

TEST_CASE("bayesian weights concentrate around mean one") {
  std::mt19937_64 rng(6);
  Eigen::VectorXd s = gen_weights(WeightScheme::bayesian, 100000, rng);
  CHECK(s.minCoeff() >= 0.0);
  CHECK(s.mean() > 0.99);
  CHECK(s.mean() < 1.01);
  double var = (s.array() - s.mean()).square().sum() / (s.size() - 1.0);
  CHECK(var == Catch::Approx(1.0).epsilon(0.05));
}

TEST_CASE("unit weights reproduce the point estimate for both formulas") {
  Fixture f = make_fixture();
  ReplicateEngine engine(f.fit, f.data, f.design, 1, 0);
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(f.data.n());

  CurveEstimate adjusted = engine.point_effect(EffectKind::dte, 0.0,
                                               Adjustment::regression_adjusted, false);
  std::vector<double> plug = engine.replicate_effect(
      EffectKind::dte, 0.0, Adjustment::regression_adjusted,
      ReplicateFormula::plug_in, ones, false);
  for (std::size_t j = 0; j < plug.size(); ++j) {
    CHECK(plug[j] == Catch::Approx(adjusted.values[j]).margin(1e-15));
  }
  std::vector<double> augmented = engine.replicate_effect(
      EffectKind::dte, 0.0, Adjustment::regression_adjusted,
      ReplicateFormula::augmented, ones, false);
  for (std::size_t j = 0; j < augmented.size(); ++j) {
    // augmented = adjusted + balance residual difference, which is ~1e-11
    CHECK(augmented[j] == Catch::Approx(adjusted.values[j]).margin(1e-8));
    CHECK(augmented[j] == Catch::Approx(plug[j]).margin(1e-8));
  }

  CurveEstimate simple = engine.point_effect(EffectKind::dte, 0.0,
                                             Adjustment::simple, false);
  std::vector<double> simple_rep = engine.replicate_effect(
      EffectKind::dte, 0.0, Adjustment::simple, ReplicateFormula::augmented,
      ones, false);
  for (std::size_t j = 0; j < simple_rep.size(); ++j) {
    CHECK(simple_rep[j] == simple.values[j]);
  }
}

TEST_CASE("intercept-only augmented replicate collapses to the weighted simple difference") {
  DgpSpec spec;
  spec.id = DgpId::dgp1;
  spec.n = 240;
  spec.seed = 888;
  Dataset full = sample_dgp(spec);
  Dataset data = validate_dataset(full.y, full.w, Eigen::MatrixXd(full.n(), 0));
  DesignMatrix design = build_design_matrix(data, TransformSpec{});
  GridSpec gspec;
  gspec.kind = GridKind::quantile;
  gspec.count = 5;
  ThresholdGrid grid = make_threshold_grid(data, gspec);
  DrFit fit = fit_all(data, design, grid, Link::logit);
  ReplicateEngine engine(fit, data, design, 1, 0);

  for (int b = 0; b < 20; ++b) {
    Eigen::VectorXd s =
        engine.replicate_weights(WeightScheme::multinomial, 321, b);
    std::vector<double> augmented = engine.replicate_effect(
        EffectKind::dte, 0.0, Adjustment::regression_adjusted,
        ReplicateFormula::augmented, s, false);
    std::vector<double> weighted_simple = engine.replicate_effect(
        EffectKind::dte, 0.0, Adjustment::simple, ReplicateFormula::augmented,
        s, false);
    for (std::size_t j = 0; j < augmented.size(); ++j) {
      CHECK(std::abs(augmented[j] - weighted_simple[j]) <= 1e-12);
    }
  }
}

TEST_CASE("stratified weight field preserves arm masses") {
  Fixture f = make_fixture(257);
  ReplicateEngine engine(f.fit, f.data, f.design, 1, 0);
  for (WeightScheme scheme : {WeightScheme::multinomial, WeightScheme::bayesian}) {
    for (int b = 0; b < 5; ++b) {
      Eigen::VectorXd s = engine.replicate_weights(scheme, 99, b);
      for (int k = 0; k < 2; ++k) {
        double mass = 0.0;
        for (auto i : f.data.rows_of_arm(k)) mass += s[i];
        CHECK(mass == Catch::Approx(static_cast<double>(
                          f.data.arm_counts[static_cast<size_t>(k)]))
                          .margin(1e-9));
      }
    }
  }
}

TEST_CASE("infer: degenerate replicates, two-point variance, CI kinds") {
  ThresholdGrid grid;
  grid.kind = GridKind::user;
  grid.values = {0.0};
  CurveEstimate point;
  point.grid = grid;
  point.kind = CurveKind::effect;
  point.values = {0.5};

  BootstrapConfig config;
  config.replicates = 100;

  Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(100, 1, 0.5);
  InferenceResult flat = infer(point, constant, config);
  CHECK(flat.se[0] == 0.0);
  CHECK(flat.ci_lo[0] == 0.5);
  CHECK(flat.ci_hi[0] == 0.5);

  Eigen::MatrixXd two_point(100, 1);
  for (int b = 0; b < 100; ++b) two_point(b, 0) = b < 50 ? 0.0 : 1.0;
  InferenceResult split = infer(point, two_point, config);
  double expected_se = std::sqrt(0.25 * 100.0 / 99.0);
  CHECK(split.se[0] == Catch::Approx(expected_se).margin(1e-12));
  CHECK(split.ci_lo[0] <= point.values[0]);
  CHECK(split.ci_hi[0] >= point.values[0]);

  config.ci_kind = CiKind::percentile;
  InferenceResult pct = infer(point, two_point, config);
  CHECK(pct.ci_lo[0] == 0.0);
  CHECK(pct.ci_hi[0] == 1.0);

  Eigen::MatrixXd lone(1, 1);
  lone(0, 0) = 0.5;
  CHECK_THROWS_WITH(infer(point, lone, config),
                    Catch::Matchers::ContainsSubstring("TooFewReplicates"));
}

TEST_CASE("raising the level never shrinks normal-se intervals") {
  Fixture f = make_fixture(200);
  ReplicateEngine engine(f.fit, f.data, f.design, 1, 0);
  BootstrapConfig narrow;
  narrow.replicates = 60;
  narrow.seed = 12;
  narrow.ci_level = 0.90;
  BootstrapConfig wide = narrow;
  wide.ci_level = 0.99;
  InferenceResult a = bootstrap_effect(engine, EffectKind::dte, 0.0,
                                       Adjustment::regression_adjusted, narrow);
  InferenceResult b = bootstrap_effect(engine, EffectKind::dte, 0.0,
                                       Adjustment::regression_adjusted, wide);
  for (std::size_t j = 0; j < a.se.size(); ++j) {
    CHECK(b.ci_hi[j] - b.ci_lo[j] >= a.ci_hi[j] - a.ci_lo[j]);
  }
}

TEST_CASE("bootstrap SE of the one-arm simple CDF matches the binomial formula") {
  // single-arm dataset: the weighted ECDF with the original denominator is
  // the classical resampled ECDF
  std::mt19937_64 rng(2718);
  const Eigen::Index n = 2000;
  Eigen::VectorXd y(n);
  std::uniform_real_distribution<double> unif(0, 1);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = unif(rng);
  Dataset data = validate_dataset(y, std::vector<int>(static_cast<size_t>(n), 0),
                                  Eigen::MatrixXd(n, 0));
  ThresholdGrid grid;
  grid.kind = GridKind::user;
  grid.values = {0.5};

  ReplicateEngine engine(data, grid, 0, 0);
  CurveEstimate point = engine.point_cdf(0, Adjustment::simple);
  const int b_count = 1000;
  std::vector<double> reps(b_count);
  for (int b = 0; b < b_count; ++b) {
    Eigen::VectorXd s = engine.replicate_weights(WeightScheme::multinomial, 55, b);
    Eigen::VectorXd indicator(n);
    for (Eigen::Index i = 0; i < n; ++i) indicator[i] = y[i] <= 0.5 ? 1.0 : 0.0;
    reps[static_cast<size_t>(b)] = s.dot(indicator) / static_cast<double>(n);
  }
  double f_hat = point.values[0];
  double analytic = std::sqrt(f_hat * (1.0 - f_hat) / static_cast<double>(n));
  CHECK(sd_of(reps) == Catch::Approx(analytic).epsilon(0.10));
}

TEST_CASE("uniform band dominates pointwise intervals and flags zero SEs") {
  Fixture f = make_fixture(220);
  ReplicateEngine engine(f.fit, f.data, f.design, 1, 0);
  BootstrapConfig config;
  config.replicates = 400;
  config.seed = 31;
  config.keep_replicates = true;
  InferenceResult result = bootstrap_effect(engine, EffectKind::dte, 0.0,
                                            Adjustment::regression_adjusted, config);
  REQUIRE(result.replicate_curves.has_value());
  UniformBand band = uniform_band(result.point, *result.replicate_curves,
                                  result.se, 0.95);
  double z = normal_quantile(0.975);
  for (std::size_t j = 0; j < result.se.size(); ++j) {
    CHECK(band.half_width[j] >= z * result.se[j] - 1e-12);
  }

  // constant replicates: zero-width band, all points excluded
  Eigen::MatrixXd constant = Eigen::MatrixXd::Constant(
      400, static_cast<Eigen::Index>(result.point.values.size()), 0.0);
  CurveEstimate zero_point = result.point;
  std::fill(zero_point.values.begin(), zero_point.values.end(), 0.0);
  std::vector<double> zero_se(result.se.size(), 0.0);
  UniformBand degenerate = uniform_band(zero_point, constant, zero_se, 0.95);
  CHECK(degenerate.excluded.size() == result.se.size());
  for (double w : degenerate.half_width) CHECK(w == 0.0);
}

TEST_CASE("bootstrap results are bit-identical across thread counts") {
  Fixture f = make_fixture(180);
  ReplicateEngine engine(f.fit, f.data, f.design, 1, 0);
  BootstrapConfig config;
  config.replicates = 80;
  config.seed = 4242;
  config.keep_replicates = true;

  config.threads = 1;
  InferenceResult seq = bootstrap_effect(engine, EffectKind::dte, 0.0,
                                         Adjustment::regression_adjusted, config);
  config.threads = 8;
  InferenceResult par = bootstrap_effect(engine, EffectKind::dte, 0.0,
                                         Adjustment::regression_adjusted, config);
  CHECK(seq.se == par.se);
  CHECK(seq.ci_lo == par.ci_lo);
  CHECK(seq.ci_hi == par.ci_hi);
  CHECK(*seq.replicate_curves == *par.replicate_curves);
}

TEST_CASE("augmented falls back to plug-in when balance diagnostics fail") {
  Fixture f = make_fixture(300);
  // starve the solver so the canonical balance is far from zero
  SolverOptions bad;
  bad.max_iterations = 1;
  DrFit rough = fit_all(f.data, f.design, f.grid, Link::logit, bad);
  ReplicateEngine engine(rough, f.data, f.design, 1, 0);
  REQUIRE_FALSE(engine.balance_ok());

  Eigen::VectorXd s = engine.replicate_weights(WeightScheme::multinomial, 3, 0);
  std::vector<std::string> warnings;
  std::vector<double> augmented = engine.replicate_effect(
      EffectKind::dte, 0.0, Adjustment::regression_adjusted,
      ReplicateFormula::augmented, s, false, &warnings);
  std::vector<double> plug = engine.replicate_effect(
      EffectKind::dte, 0.0, Adjustment::regression_adjusted,
      ReplicateFormula::plug_in, s, false);
  REQUIRE_FALSE(warnings.empty());
  CHECK(warnings[0].find("FormulaUnavailable") != std::string::npos);
  CHECK(augmented == plug);

  BootstrapConfig config;
  config.replicates = 20;
  config.seed = 9;
  InferenceResult result = bootstrap_effect(engine, EffectKind::dte, 0.0,
                                            Adjustment::regression_adjusted, config);
  REQUIRE_FALSE(result.warnings.empty());
  CHECK(result.warnings[0].find("FormulaUnavailable") != std::string::npos);
}

TEST_CASE("normal quantile hits the textbook constants") {
  CHECK(normal_quantile(0.975) == Catch::Approx(1.959963984540054).margin(1e-12));
  CHECK(normal_quantile(0.995) == Catch::Approx(2.5758293035489004).margin(1e-12));
  CHECK(normal_quantile(0.5) == Catch::Approx(0.0).margin(1e-15));
  CHECK(normal_quantile(0.025) == Catch::Approx(-1.959963984540054).margin(1e-12));
  CHECK(normal_quantile(1e-10) == Catch::Approx(-6.361340902404056).margin(1e-9));
  CHECK_THROWS_AS(normal_quantile(0.0), ConfigError);
  CHECK_THROWS_AS(normal_quantile(1.0), ConfigError);
}

TEST_CASE("uniform band covers the truth in most runs", "[heavy]") {
  DgpSpec spec;
  spec.id = DgpId::dgp1;
  spec.pi1 = 0.5;
  spec.n = 2000;
  spec.seed = 612;
  OracleTruth oracle(spec, 500000);
  GridSpec gspec;
  gspec.kind = GridKind::user;
  gspec.values = oracle.default_thresholds();

  int covered = 0;
  const int runs = 200;
  for (int r = 0; r < runs; ++r) {
    DgpSpec draw = spec;
    draw.seed = 612 + static_cast<std::uint64_t>(r);
    Dataset data = sample_dgp(draw);
    DesignMatrix design = build_design_matrix(data, TransformSpec{});
    ThresholdGrid grid = make_threshold_grid(data, gspec);
    DrFit fit = fit_all(data, design, grid, Link::logit);
    ReplicateEngine engine(fit, data, design, 1, 0);
    BootstrapConfig config;
    config.replicates = 200;
    config.seed = draw.seed;
    config.keep_replicates = true;
    config.threads = 2;
    InferenceResult result = bootstrap_effect(
        engine, EffectKind::dte, 0.0, Adjustment::regression_adjusted, config);
    UniformBand band =
        uniform_band(result.point, *result.replicate_curves, result.se, 0.95);
    bool all_inside = true;
    for (std::size_t j = 0; j < grid.values.size(); ++j) {
      double truth = oracle.dte_at(grid.values[j]);
      if (std::abs(result.point.values[j] - truth) > band.half_width[j]) {
        all_inside = false;
      }
    }
    if (all_inside) ++covered;
  }
  CHECK(covered >= static_cast<int>(0.90 * runs));
}

TEST_CASE("pte bootstrap lives on the pte sub-grid") {
  std::mt19937_64 rng(14);
  std::poisson_distribution<int> pois(3);
  const Eigen::Index n = 400;
  Eigen::VectorXd y(n);
  std::vector<int> w(static_cast<size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    y[i] = pois(rng);
    w[static_cast<size_t>(i)] = i % 2;
  }
  Dataset data = validate_dataset(y, w, Eigen::MatrixXd(n, 0));
  ThresholdGrid grid = make_threshold_grid(data, GridSpec{});
  ReplicateEngine engine(data, grid, 1, 0);
  BootstrapConfig config;
  config.replicates = 50;
  config.seed = 77;
  InferenceResult result =
      bootstrap_effect(engine, EffectKind::pte, 1.0, Adjustment::simple, config);
  CHECK(result.point.grid.values.size() == result.se.size());
  CHECK(result.point.h == 1.0);
}
