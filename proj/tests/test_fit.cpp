#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "dtreg/dr_fit.hpp"
#include "dtreg/simulation.hpp"
#include "oracles.hpp"

using namespace dtreg;

namespace {

Eigen::MatrixXd intercept_only(Eigen::Index n) {
  return Eigen::MatrixXd::Ones(n, 1);
}

}  // namespace

TEST_CASE("intercept-only logit recovers the log-odds of the proportion") {
  Eigen::VectorXd z(10);
  z << 1, 1, 1, 0, 0, 0, 0, 0, 0, 0;
  ThresholdFit fit = fit_threshold(intercept_only(10), z, Link::logit);
  REQUIRE(fit.diag.converged);
  CHECK(fit.beta[0] == Catch::Approx(std::log(0.3 / 0.7)).epsilon(1e-9));
  CHECK(sigmoid(fit.beta[0]) == Catch::Approx(0.3).margin(1e-12));
}

TEST_CASE("logit fit matches the grid-search likelihood oracle") {
  Eigen::MatrixXd x(8, 2);
  x << 1, -2, 1, -1, 1, -0.5, 1, 0, 1, 0.5, 1, 1, 1, 2, 1, 3;
  Eigen::VectorXd z(8);
  z << 0, 0, 0, 1, 0, 1, 1, 1;
  ThresholdFit fit = fit_threshold(x, z, Link::logit);
  REQUIRE(fit.diag.converged);

  oracles::GridSearchResult oracle = oracles::logit_grid_search(x, z);
  REQUIRE_FALSE(oracle.on_boundary);
  for (Eigen::Index c = 0; c < 2; ++c) {
    CHECK(std::abs(fit.beta[c] - oracle.beta[c]) < 2e-3);
  }
}

TEST_CASE("all-equal indicators give a degenerate constant cell") {
  Eigen::VectorXd ones = Eigen::VectorXd::Ones(6);
  ThresholdFit fit = fit_threshold(intercept_only(6), ones, Link::logit);
  CHECK(fit.diag.degenerate);
  CHECK(fit.diag.constant_value == 1.0);
  CHECK(fit.beta.size() == 0);

  Eigen::VectorXd zeros = Eigen::VectorXd::Zero(6);
  fit = fit_threshold(intercept_only(6), zeros, Link::linear);
  CHECK(fit.diag.degenerate);
  CHECK(fit.diag.constant_value == 0.0);
}

TEST_CASE("linear link is the closed-form least-squares fit") {
  std::mt19937_64 rng(31);
  std::normal_distribution<double> normal;
  Eigen::MatrixXd x(40, 2);
  Eigen::VectorXd z(40);
  for (Eigen::Index i = 0; i < 40; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = normal(rng);
    z[i] = (normal(rng) > 0.0) ? 1.0 : 0.0;
  }
  ThresholdFit fit = fit_threshold(x, z, Link::linear);
  REQUIRE(fit.diag.converged);
  Eigen::VectorXd expected =
      (x.transpose() * x).ldlt().solve(x.transpose() * z);
  CHECK((fit.beta - expected).lpNorm<Eigen::Infinity>() < 1e-12);
  // residuals orthogonal to the intercept
  double resid_mean = (z - x * fit.beta).mean();
  CHECK(std::abs(resid_mean) < 1e-13);
}

TEST_CASE("rank-deficient design falls back to ridge and is flagged") {
  Eigen::MatrixXd x(12, 2);
  for (Eigen::Index i = 0; i < 12; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = 1.0;  // duplicated intercept
  }
  Eigen::VectorXd z(12);
  for (Eigen::Index i = 0; i < 12; ++i) z[i] = i % 3 == 0 ? 1.0 : 0.0;
  ThresholdFit linear = fit_threshold(x, z, Link::linear);
  CHECK(linear.diag.ridge_used);
  ThresholdFit logit = fit_threshold(x, z, Link::logit);
  CHECK(logit.diag.ridge_used);
}

TEST_CASE("fit_all: shapes, degenerate extremes, and arm-size guard") {
  std::mt19937_64 rng(7);
  DgpSpec spec;
  spec.id = DgpId::dgp1;
  spec.n = 200;
  spec.seed = 7;
  Dataset data = sample_dgp(spec, rng);
  DesignMatrix design = build_design_matrix(data, TransformSpec{});

  GridSpec gspec;
  gspec.kind = GridKind::user;
  gspec.values = {data.y.minCoeff() - 1.0, 0.5, 1.0};
  ThresholdGrid grid = make_threshold_grid(data, gspec);

  DrFit fit = fit_all(data, design, grid, Link::logit);
  REQUIRE(fit.arms() == 2);
  REQUIRE(fit.coefficients[0].rows() == 3);
  REQUIRE(fit.coefficients[0].cols() == 3);
  for (int k = 0; k < 2; ++k) {
    CHECK(fit.cell(k, 0).degenerate);
    CHECK(fit.cell(k, 0).constant_value == 0.0);
  }

  // n_k <= d must abort
  Eigen::MatrixXd x2(4, 2);
  x2 << 1, 2, 3, 4, 5, 6, 7, 8;
  Dataset small = validate_dataset(Eigen::VectorXd::LinSpaced(4, 1, 4),
                                   {0, 0, 0, 1}, x2);
  DesignMatrix d2 = build_design_matrix(small, TransformSpec{});
  GridSpec g2;
  g2.kind = GridKind::user;
  g2.values = {2.5};
  CHECK_THROWS_AS(fit_all(small, d2, make_threshold_grid(small, g2), Link::logit),
                  DataError);
}

TEST_CASE("predict_cdf fills constants, applies the link, rejects mismatches") {
  Eigen::VectorXd y(10);
  y << 1, 1, 1, 2, 2, 2, 2, 3, 3, 3;
  std::vector<int> w(10, 0);
  for (int i = 5; i < 10; ++i) w[static_cast<size_t>(i)] = 1;
  Dataset data = validate_dataset(y, w, Eigen::MatrixXd(10, 0));
  DesignMatrix design = build_design_matrix(data, TransformSpec{});
  GridSpec gspec;
  gspec.kind = GridKind::user;
  gspec.values = {1.5, 3.0};
  ThresholdGrid grid = make_threshold_grid(data, gspec);
  DrFit fit = fit_all(data, design, grid, Link::logit);

  Eigen::MatrixXd pred = predict_cdf(fit, design, 0);
  // arm 0: 3 of 5 outcomes <= 1.5
  for (Eigen::Index i = 0; i < 10; ++i) {
    CHECK(pred(i, 0) == Catch::Approx(0.6).margin(1e-9));
    CHECK(pred(i, 1) == 1.0);  // degenerate constant
  }

  DesignMatrix other = design;
  other.spec.intercept = false;
  CHECK_THROWS_WITH(predict_cdf(fit, other, 0),
                    Catch::Matchers::ContainsSubstring("SpecMismatch"));
}

TEST_CASE("logit link maps a zero linear predictor to one half") {
  CHECK(sigmoid(0.0) == 0.5);
  CHECK(link_eval(Link::logit, 0.0) == 0.5);
  CHECK(link_eval(Link::linear, 0.37) == 0.37);
}

TEST_CASE("linear-link column means reproduce the arm ECDF exactly") {
  std::mt19937_64 rng(23);
  DgpSpec spec;
  spec.id = DgpId::dgp2;
  spec.n = 300;
  spec.seed = 23;
  Dataset data = sample_dgp(spec, rng);
  DesignMatrix design = build_design_matrix(data, TransformSpec{});
  GridSpec gspec;
  gspec.kind = GridKind::quantile;
  gspec.count = 9;
  ThresholdGrid grid = make_threshold_grid(data, gspec);
  DrFit fit = fit_all(data, design, grid, Link::linear);

  for (int k = 0; k < 2; ++k) {
    Eigen::MatrixXd pred = predict_cdf(fit, design, k);
    auto rows = data.rows_of_arm(k);
    CurveEstimate ecdf = simple_cdf(data, grid, k);
    for (std::size_t j = 0; j < grid.size(); ++j) {
      double mean = 0.0;
      for (auto i : rows) mean += pred(i, static_cast<Eigen::Index>(j));
      mean /= static_cast<double>(rows.size());
      CHECK(std::abs(mean - ecdf.values[j]) < 1e-12);
    }
  }
}

TEST_CASE("balance residual is at the optimum for canonical links") {
  std::mt19937_64 rng(47);
  DgpSpec spec;
  spec.id = DgpId::dgp1;
  spec.n = 400;
  spec.seed = 47;
  Dataset data = sample_dgp(spec, rng);
  DesignMatrix design = build_design_matrix(data, TransformSpec{});
  GridSpec gspec;
  gspec.kind = GridKind::quantile;
  gspec.count = 7;
  ThresholdGrid grid = make_threshold_grid(data, gspec);

  DrFit logit_fit = fit_all(data, design, grid, Link::logit);
  CHECK(balance_residual(logit_fit, data, design).cwiseAbs().maxCoeff() <= 1e-8);

  DrFit linear_fit = fit_all(data, design, grid, Link::linear);
  CHECK(balance_residual(linear_fit, data, design).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("analytic logit score matches central finite differences") {
  std::mt19937_64 rng(101);
  std::normal_distribution<double> normal;
  std::bernoulli_distribution coin(0.5);
  for (int rep = 0; rep < 20; ++rep) {
    Eigen::Index n = 20 + rep;
    Eigen::MatrixXd x(n, 3);
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      x(i, 0) = 1.0;
      x(i, 1) = normal(rng);
      x(i, 2) = normal(rng);
      z[i] = coin(rng) ? 1.0 : 0.0;
    }
    Eigen::VectorXd beta(3);
    beta << normal(rng), normal(rng), normal(rng);

    Eigen::VectorXd eta = x * beta;
    Eigen::VectorXd prob(n);
    for (Eigen::Index i = 0; i < n; ++i) prob[i] = sigmoid(eta[i]);
    Eigen::VectorXd analytic = x.transpose() * (z - prob) / static_cast<double>(n);

    auto ll = [&](const Eigen::VectorXd& b) {
      return oracles::logit_loglik(x, z, b) / static_cast<double>(n);
    };
    for (Eigen::Index c = 0; c < 3; ++c) {
      double numeric = oracles::central_difference(ll, beta, c);
      double rel = std::abs(numeric - analytic[c]) /
                   std::max(1e-8, std::abs(analytic[c]));
      CHECK(rel <= 1e-5);
    }
  }
}

TEST_CASE("observed Hessian is negative semi-definite at the optimum") {
  std::mt19937_64 rng(9);
  std::normal_distribution<double> normal;
  for (int rep = 0; rep < 10; ++rep) {
    Eigen::Index n = 60;
    Eigen::MatrixXd x(n, 2);
    Eigen::VectorXd z(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      x(i, 0) = 1.0;
      x(i, 1) = normal(rng);
      double p = sigmoid(0.3 + 0.8 * x(i, 1));
      z[i] = std::uniform_real_distribution<double>(0, 1)(rng) < p ? 1.0 : 0.0;
    }
    ThresholdFit fit = fit_threshold(x, z, Link::logit);
    if (fit.diag.degenerate || !fit.diag.converged) continue;
    Eigen::VectorXd prob = x * fit.beta;
    for (Eigen::Index i = 0; i < n; ++i) prob[i] = sigmoid(prob[i]);
    Eigen::VectorXd wgt = prob.array() * (1.0 - prob.array());
    Eigen::MatrixXd hessian =
        -(x.transpose() * wgt.asDiagonal() * x) / static_cast<double>(n);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(hessian);
    CHECK(eig.eigenvalues().maxCoeff() <= 1e-8);
  }
}

TEST_CASE("fit_all is bit-identical across thread counts at scale", "[heavy]") {
  DgpSpec spec;
  spec.id = DgpId::dgp1;
  spec.n = 100000;
  spec.seed = 2024;
  Dataset data = sample_dgp(spec);
  DesignMatrix design = build_design_matrix(data, TransformSpec{});
  OracleTruth oracle(spec, 200000);
  GridSpec gspec;
  gspec.kind = GridKind::user;
  gspec.values = oracle.default_thresholds();
  ThresholdGrid grid = make_threshold_grid(data, gspec);

  SolverOptions seq;
  seq.threads = 1;
  SolverOptions par;
  par.threads = 4;
  DrFit a = fit_all(data, design, grid, Link::logit, seq);
  DrFit b = fit_all(data, design, grid, Link::logit, par);
  for (int k = 0; k < 2; ++k) {
    double gap = (a.coefficients[static_cast<size_t>(k)] -
                  b.coefficients[static_cast<size_t>(k)])
                     .cwiseAbs()
                     .maxCoeff();
    CHECK(gap <= 1e-9);  // bit-identical in practice
    CHECK(gap == 0.0);
  }
}
