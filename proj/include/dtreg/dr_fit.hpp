#ifndef DTREG_DR_FIT_HPP
#define DTREG_DR_FIT_HPP

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dtreg/dataset.hpp"
#include "dtreg/design.hpp"
#include "dtreg/errors.hpp"
#include "dtreg/grid.hpp"
#include "dtreg/link.hpp"
#include "dtreg/parallel.hpp"

namespace dtreg {

struct SolverOptions {
  double gradient_tol = 1e-10;   // sup-norm of the score at return
  int max_iterations = 100;
  int max_step_halvings = 50;
  double predictor_clamp = 30.0; // linear-predictor guard inside the likelihood
  double ridge = 1e-8;           // Hessian damping for near-singular cells
  double condition_limit = 1e12;
  int threads = 0;               // 0 = hardware concurrency
};

struct CellDiagnostics {
  bool converged = false;
  bool degenerate = false;       // all indicators equal; constant fit
  bool ridge_used = false;
  int iterations = 0;
  double gradient_norm = std::numeric_limits<double>::quiet_NaN();
  double constant_value = std::numeric_limits<double>::quiet_NaN();

  bool usable() const { return degenerate || converged; }
};

struct ThresholdFit {
  Eigen::VectorXd beta;  // empty for degenerate cells
  CellDiagnostics diag;
};

/// Per-arm, per-threshold coefficients of the distributional regression,
/// with solver diagnostics for every cell.
struct DrFit {
  Link link = Link::logit;
  ThresholdGrid grid;
  TransformSpec design_spec;
  Eigen::Index dim = 0;  // d
  // coefficients[k] is d x J; column j holds beta_k(y_j) (zero if degenerate)
  std::vector<Eigen::MatrixXd> coefficients;
  std::vector<std::vector<CellDiagnostics>> diagnostics;

  int arms() const { return static_cast<int>(coefficients.size()); }

  const CellDiagnostics& cell(int k, std::size_t j) const {
    return diagnostics[static_cast<size_t>(k)][j];
  }

  bool all_usable() const {
    for (const auto& arm : diagnostics) {
      for (const auto& cell : arm) {
        if (!cell.usable()) return false;
      }
    }
    return true;
  }
};

namespace detail {

inline double logit_loglik(const Eigen::MatrixXd& x, const Eigen::VectorXd& z,
                           const Eigen::VectorXd& beta, double clamp) {
  Eigen::VectorXd eta = (x * beta).cwiseMax(-clamp).cwiseMin(clamp);
  double ll = 0.0;
  for (Eigen::Index i = 0; i < z.size(); ++i) {
    // z*eta - log(1+e^eta), computed from the stable softplus
    double softplus = eta[i] > 0.0 ? eta[i] + std::log1p(std::exp(-eta[i]))
                                   : std::log1p(std::exp(eta[i]));
    ll += z[i] * eta[i] - softplus;
  }
  return ll / static_cast<double>(z.size());
}

/// Newton-Raphson with step halving on the Bernoulli log-likelihood.
inline ThresholdFit fit_logit(const Eigen::MatrixXd& x, const Eigen::VectorXd& z,
                              const SolverOptions& opt) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  const double n_d = static_cast<double>(n);

  ThresholdFit out;
  out.beta = Eigen::VectorXd::Zero(d);
  double ll = logit_loglik(x, z, out.beta, opt.predictor_clamp);

  Eigen::VectorXd best_beta = out.beta;
  double best_ll = ll;
  double best_grad = std::numeric_limits<double>::infinity();

  for (int iter = 1; iter <= opt.max_iterations; ++iter) {
    out.diag.iterations = iter;
    Eigen::VectorXd eta =
        (x * out.beta).cwiseMax(-opt.predictor_clamp).cwiseMin(opt.predictor_clamp);
    Eigen::VectorXd prob(n);
    for (Eigen::Index i = 0; i < n; ++i) prob[i] = sigmoid(eta[i]);

    Eigen::VectorXd grad = x.transpose() * (z - prob) / n_d;
    out.diag.gradient_norm = grad.lpNorm<Eigen::Infinity>();
    if (out.diag.gradient_norm <= opt.gradient_tol) {
      out.diag.converged = true;
      return out;
    }
    if (ll >= best_ll) {
      best_ll = ll;
      best_beta = out.beta;
      best_grad = out.diag.gradient_norm;
    }

    Eigen::VectorXd wgt = prob.array() * (1.0 - prob.array());
    Eigen::MatrixXd info =
        x.transpose() * wgt.asDiagonal() * x / n_d;  // negative Hessian

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
    double lo = eig.eigenvalues().minCoeff();
    double hi = eig.eigenvalues().maxCoeff();
    if (!(lo > 0.0) || hi / lo > opt.condition_limit) {
      info.diagonal().array() += opt.ridge;
      out.diag.ridge_used = true;
    }

    Eigen::VectorXd step = info.ldlt().solve(grad);
    // near the optimum the Newton improvement drops below the rounding
    // noise of the likelihood; accept steps within that slack or the line
    // search would reject the final step and stall above the tolerance
    const double slack = 1e-13 * (1.0 + std::abs(ll));
    double scale = 1.0;
    Eigen::VectorXd candidate = out.beta + step;
    double cand_ll = logit_loglik(x, z, candidate, opt.predictor_clamp);
    int halvings = 0;
    while (cand_ll < ll - slack && halvings < opt.max_step_halvings) {
      scale *= 0.5;
      candidate = out.beta + scale * step;
      cand_ll = logit_loglik(x, z, candidate, opt.predictor_clamp);
      ++halvings;
    }
    out.beta = candidate;
    ll = cand_ll;
  }

  // NoConvergence: hand back the best iterate, flagged
  Eigen::VectorXd eta =
      (x * out.beta).cwiseMax(-opt.predictor_clamp).cwiseMin(opt.predictor_clamp);
  Eigen::VectorXd prob(n);
  for (Eigen::Index i = 0; i < n; ++i) prob[i] = sigmoid(eta[i]);
  double final_grad = (x.transpose() * (z - prob) / n_d).lpNorm<Eigen::Infinity>();
  if (ll < best_ll || final_grad > best_grad) {
    out.beta = best_beta;
    out.diag.gradient_norm = best_grad;
  } else {
    out.diag.gradient_norm = final_grad;
  }
  out.diag.converged = out.diag.gradient_norm <= opt.gradient_tol;
  return out;
}

/// Least squares of the indicator on the design: the quasi-MLE under the
/// Gaussian canonical pairing.
inline ThresholdFit fit_linear(const Eigen::MatrixXd& x, const Eigen::VectorXd& z,
                               const SolverOptions& opt) {
  const double n_d = static_cast<double>(x.rows());
  ThresholdFit out;
  const Eigen::MatrixXd gram = x.transpose() * x / n_d;
  const Eigen::VectorXd moment = x.transpose() * z / n_d;

  Eigen::MatrixXd system = gram;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  double lo = eig.eigenvalues().minCoeff();
  double hi = eig.eigenvalues().maxCoeff();
  if (!(lo > 0.0) || hi / lo > opt.condition_limit) {
    system.diagonal().array() += opt.ridge;  // SingularDesign fallback
    out.diag.ridge_used = true;
  }
  out.beta = system.ldlt().solve(moment);
  out.diag.iterations = 1;
  // score of the unpenalized objective at the returned point
  out.diag.gradient_norm = (moment - gram * out.beta).lpNorm<Eigen::Infinity>();
  out.diag.converged = !out.diag.ridge_used;
  return out;
}

}  // namespace detail

/// Quasi-MLE for one (arm, threshold) cell.  `rows` are the design rows of
/// the arm, `indicator` the 0/1 responses 1{Y_i <= y}.
inline ThresholdFit fit_threshold(const Eigen::MatrixXd& rows,
                                  const Eigen::VectorXd& indicator, Link link,
                                  const SolverOptions& opt = {}) {
  if (rows.rows() != indicator.size()) {
    throw DataError("fit_threshold: design rows and indicator length differ");
  }
  if (rows.rows() == 0) throw DataError("fit_threshold: empty arm");

  double lo = indicator.minCoeff();
  double hi = indicator.maxCoeff();
  if (lo == hi) {
    ThresholdFit out;
    out.diag.degenerate = true;
    out.diag.constant_value = lo;
    return out;
  }
  return link == Link::logit ? detail::fit_logit(rows, indicator, opt)
                             : detail::fit_linear(rows, indicator, opt);
}

/// Fits all K x J cells independently.  Cells run in parallel; assembly is
/// by (k, j) index, so results are bit-identical for any thread count.
inline DrFit fit_all(const Dataset& data, const DesignMatrix& design,
                     const ThresholdGrid& grid, Link link,
                     const SolverOptions& opt = {}) {
  if (design.t.rows() != data.n()) {
    throw DataError("fit_all: design and dataset row counts differ");
  }
  const int k_arms = data.arms();
  const Eigen::Index d = design.d();
  const std::size_t j_count = grid.size();
  for (int k = 0; k < k_arms; ++k) {
    if (data.arm_counts[static_cast<size_t>(k)] < d + 1) {
      throw DataError("arm " + std::to_string(k) + " has " +
                      std::to_string(data.arm_counts[static_cast<size_t>(k)]) +
                      " observations but the design needs at least " +
                      std::to_string(d + 1));
    }
  }

  DrFit fit;
  fit.link = link;
  fit.grid = grid;
  fit.design_spec = design.spec;
  fit.dim = d;
  fit.coefficients.assign(static_cast<size_t>(k_arms),
                          Eigen::MatrixXd::Zero(d, static_cast<Eigen::Index>(j_count)));
  fit.diagnostics.assign(static_cast<size_t>(k_arms),
                         std::vector<CellDiagnostics>(j_count));

  // per-arm views shared by all thresholds of that arm
  std::vector<Eigen::MatrixXd> arm_design(static_cast<size_t>(k_arms));
  std::vector<Eigen::VectorXd> arm_outcomes(static_cast<size_t>(k_arms));
  for (int k = 0; k < k_arms; ++k) {
    auto rows = data.rows_of_arm(k);
    Eigen::MatrixXd sub(static_cast<Eigen::Index>(rows.size()), d);
    Eigen::VectorXd suby(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      sub.row(static_cast<Eigen::Index>(r)) = design.t.row(rows[r]);
      suby[static_cast<Eigen::Index>(r)] = data.y[rows[r]];
    }
    arm_design[static_cast<size_t>(k)] = std::move(sub);
    arm_outcomes[static_cast<size_t>(k)] = std::move(suby);
  }

  parallel_for(static_cast<std::int64_t>(k_arms) * static_cast<std::int64_t>(j_count),
               opt.threads, [&](std::int64_t cell) {
                 int k = static_cast<int>(cell / static_cast<std::int64_t>(j_count));
                 std::size_t j = static_cast<std::size_t>(
                     cell % static_cast<std::int64_t>(j_count));
                 const Eigen::VectorXd& ys = arm_outcomes[static_cast<size_t>(k)];
                 Eigen::VectorXd indicator(ys.size());
                 for (Eigen::Index i = 0; i < ys.size(); ++i) {
                   indicator[i] = ys[i] <= grid.values[j] ? 1.0 : 0.0;
                 }
                 ThresholdFit cell_fit = fit_threshold(
                     arm_design[static_cast<size_t>(k)], indicator, link, opt);
                 if (!cell_fit.diag.degenerate) {
                   fit.coefficients[static_cast<size_t>(k)]
                       .col(static_cast<Eigen::Index>(j)) = cell_fit.beta;
                 }
                 fit.diagnostics[static_cast<size_t>(k)][j] = cell_fit.diag;
               });
  return fit;
}

/// Conditional-CDF predictions: entry (i, j) is Lambda(T(X_i)' beta_k(y_j)).
/// The linear link is intentionally not clipped here; clamping would break
/// the balance identity that the adjustment relies on.
inline Eigen::MatrixXd predict_cdf(const DrFit& fit, const DesignMatrix& design,
                                   int arm) {
  if (design.spec != fit.design_spec) {
    throw ConfigError(
        "SpecMismatch: design was built with a different transform than the fit");
  }
  if (design.d() != fit.dim) {
    throw ConfigError("SpecMismatch: design has " + std::to_string(design.d()) +
                      " columns, fit expects " + std::to_string(fit.dim));
  }
  const std::size_t j_count = fit.grid.size();
  Eigen::MatrixXd pred = design.t * fit.coefficients[static_cast<size_t>(arm)];
  for (std::size_t j = 0; j < j_count; ++j) {
    const CellDiagnostics& cell = fit.cell(arm, j);
    auto col = pred.col(static_cast<Eigen::Index>(j));
    if (cell.degenerate) {
      col.setConstant(cell.constant_value);
    } else if (fit.link == Link::logit) {
      for (Eigen::Index i = 0; i < col.size(); ++i) col[i] = sigmoid(col[i]);
    }
  }
  return pred;
}

/// Canonical-balance diagnostic: per (arm, threshold) mean of
/// (indicator - fitted probability) within the arm.  Near zero for every
/// converged canonical fit.
inline Eigen::MatrixXd balance_residual(const DrFit& fit, const Dataset& data,
                                        const DesignMatrix& design) {
  const int k_arms = fit.arms();
  const std::size_t j_count = fit.grid.size();
  Eigen::MatrixXd out(k_arms, static_cast<Eigen::Index>(j_count));
  for (int k = 0; k < k_arms; ++k) {
    Eigen::MatrixXd pred = predict_cdf(fit, design, k);
    auto rows = data.rows_of_arm(k);
    for (std::size_t j = 0; j < j_count; ++j) {
      double acc = 0.0;
      for (Eigen::Index i : rows) {
        double indicator = data.y[i] <= fit.grid.values[j] ? 1.0 : 0.0;
        acc += indicator - pred(i, static_cast<Eigen::Index>(j));
      }
      out(k, static_cast<Eigen::Index>(j)) =
          acc / static_cast<double>(rows.size());
    }
  }
  return out;
}

}  // namespace dtreg

#endif  // DTREG_DR_FIT_HPP
