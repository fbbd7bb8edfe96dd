#ifndef DTREG_CURVES_HPP
#define DTREG_CURVES_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "dtreg/dataset.hpp"
#include "dtreg/dr_fit.hpp"
#include "dtreg/errors.hpp"
#include "dtreg/grid.hpp"

namespace dtreg {

enum class CurveKind { cdf, effect };
enum class Adjustment { simple, regression_adjusted };
enum class EffectKind { dte, pte };

/// A function on the threshold grid: either a per-arm CDF estimate or an
/// effect curve between two arms.
struct CurveEstimate {
  ThresholdGrid grid;
  std::vector<double> values;
  CurveKind kind = CurveKind::cdf;
  Adjustment adjustment = Adjustment::simple;
  int arm = -1;        // cdf: the arm; effect: treatment arm k
  int arm_other = -1;  // effect: comparison arm k'
  double h = 0.0;      // PTE width; 0 otherwise
  bool monotonized = false;
};

/// Right-continuous step evaluation of grid values at an off-grid point:
/// the value at the largest threshold <= t, or `below` left of the grid.
inline double step_eval(const ThresholdGrid& grid,
                        const std::vector<double>& values, double t,
                        double below = 0.0) {
  auto it = std::upper_bound(grid.values.begin(), grid.values.end(), t);
  if (it == grid.values.begin()) return below;
  std::size_t idx = static_cast<std::size_t>(it - grid.values.begin()) - 1;
  return values[idx];
}

/// Empirical CDF of arm k on the grid.
inline CurveEstimate simple_cdf(const Dataset& data, const ThresholdGrid& grid,
                                int arm) {
  if (arm < 0 || arm >= data.arms()) {
    throw DataError("EmptyArm: no arm " + std::to_string(arm));
  }
  auto rows = data.rows_of_arm(arm);
  std::vector<double> sorted;
  sorted.reserve(rows.size());
  for (Eigen::Index i : rows) sorted.push_back(data.y[i]);
  std::sort(sorted.begin(), sorted.end());

  CurveEstimate out;
  out.grid = grid;
  out.kind = CurveKind::cdf;
  out.adjustment = Adjustment::simple;
  out.arm = arm;
  out.values.reserve(grid.size());
  const double n_k = static_cast<double>(sorted.size());
  for (double y : grid.values) {
    auto it = std::upper_bound(sorted.begin(), sorted.end(), y);
    out.values.push_back(static_cast<double>(it - sorted.begin()) / n_k);
  }
  return out;
}

/// Regression-adjusted CDF of arm k: the average of the arm's fitted
/// conditional CDF over all n units' covariates.
inline CurveEstimate adjusted_cdf(const DrFit& fit, const Dataset& data,
                                  const DesignMatrix& design, int arm,
                                  std::vector<std::string>* warnings = nullptr) {
  for (std::size_t j = 0; j < fit.grid.size(); ++j) {
    if (!fit.cell(arm, j).usable()) {
      if (warnings) {
        warnings->push_back("arm " + std::to_string(arm) + ", threshold index " +
                            std::to_string(j) +
                            " did not converge; adjusted CDF uses its best iterate");
      }
    }
  }
  Eigen::MatrixXd pred = predict_cdf(fit, design, arm);
  CurveEstimate out;
  out.grid = fit.grid;
  out.kind = CurveKind::cdf;
  out.adjustment = Adjustment::regression_adjusted;
  out.arm = arm;
  out.values.resize(fit.grid.size());
  Eigen::VectorXd col_means = pred.colwise().mean();
  for (std::size_t j = 0; j < fit.grid.size(); ++j) {
    out.values[j] = col_means[static_cast<Eigen::Index>(j)];
  }
  if (warnings) {
    Eigen::MatrixXd balance = balance_residual(fit, data, design);
    double worst = balance.cwiseAbs().maxCoeff();
    if (worst > 1e-6) {
      warnings->push_back(
          "balance residual reaches " + std::to_string(worst) +
          "; the decomposition identity simple + augmentation may fail");
    }
  }
  return out;
}

namespace detail {

inline void require_same_grid(const CurveEstimate& a, const CurveEstimate& b) {
  if (!a.grid.same_values(b.grid)) {
    throw ConfigError("GridMismatch: curves live on different threshold grids");
  }
}

/// Evaluation plan for PTE on a grid: which thresholds stay, and where each
/// one's y+h lands (index of the largest threshold <= y+h, or -1 when y+h is
/// past a full-support grid and both CDFs count as 1).
struct PteLayout {
  std::vector<std::size_t> keep;
  std::vector<std::ptrdiff_t> ahead;
};

inline PteLayout pte_layout(const ThresholdGrid& grid, double h) {
  if (!(h > 0.0)) throw ConfigError("NonpositiveH: PTE width must be positive");
  PteLayout layout;
  const double top = grid.values.back();
  for (std::size_t j = 0; j < grid.size(); ++j) {
    double target = grid.values[j] + h;
    if (target > top) {
      if (!grid.covers_full_support) continue;
      layout.keep.push_back(j);
      layout.ahead.push_back(-1);
    } else {
      auto it = std::upper_bound(grid.values.begin(), grid.values.end(), target);
      layout.keep.push_back(j);
      layout.ahead.push_back((it - grid.values.begin()) - 1);
    }
  }
  if (layout.keep.empty()) {
    throw ConfigError("PTE width h=" + std::to_string(h) +
                      " leaves no evaluable grid point");
  }
  return layout;
}

/// delta_ahead - delta at the kept thresholds; delta = F_k - F_k' on the grid.
inline std::vector<double> pte_values(const std::vector<double>& delta,
                                      const PteLayout& layout) {
  std::vector<double> out(layout.keep.size());
  for (std::size_t m = 0; m < layout.keep.size(); ++m) {
    double ahead = layout.ahead[m] < 0
                       ? 0.0
                       : delta[static_cast<std::size_t>(layout.ahead[m])];
    out[m] = ahead - delta[layout.keep[m]];
  }
  return out;
}

}  // namespace detail

/// Distributional treatment effect: F_k - F_k' pointwise.
inline CurveEstimate dte(const CurveEstimate& f_k, const CurveEstimate& f_other) {
  detail::require_same_grid(f_k, f_other);
  CurveEstimate out;
  out.grid = f_k.grid;
  out.kind = CurveKind::effect;
  out.adjustment = f_k.adjustment;
  out.arm = f_k.arm;
  out.arm_other = f_other.arm;
  out.monotonized = f_k.monotonized && f_other.monotonized;
  out.values.resize(f_k.values.size());
  for (std::size_t j = 0; j < out.values.size(); ++j) {
    out.values[j] = f_k.values[j] - f_other.values[j];
  }
  return out;
}

/// Probability treatment effect over intervals (y, y+h].  Off-grid points
/// y+h are evaluated by right-continuous step interpolation; points beyond
/// the grid are kept (both CDFs treated as 1) only when the grid covers the
/// full observed support, and dropped otherwise.
inline CurveEstimate pte(const CurveEstimate& f_k, const CurveEstimate& f_other,
                         double h) {
  detail::require_same_grid(f_k, f_other);
  const ThresholdGrid& grid = f_k.grid;
  detail::PteLayout layout = detail::pte_layout(grid, h);

  std::vector<double> delta(grid.size());
  for (std::size_t j = 0; j < grid.size(); ++j) {
    delta[j] = f_k.values[j] - f_other.values[j];
  }

  CurveEstimate out;
  out.kind = CurveKind::effect;
  out.adjustment = f_k.adjustment;
  out.arm = f_k.arm;
  out.arm_other = f_other.arm;
  out.h = h;
  out.monotonized = f_k.monotonized && f_other.monotonized;
  out.grid = grid;
  out.grid.warnings.clear();
  out.grid.values.clear();
  for (std::size_t j : layout.keep) out.grid.values.push_back(grid.values[j]);
  out.values = detail::pte_values(delta, layout);
  return out;
}

/// Quantile treatment effect at probabilities u: generalized-inverse
/// difference of two monotonized CDF curves.  Probabilities that exceed the
/// top of either curve yield NaN.
inline std::vector<double> qte(const CurveEstimate& f_k,
                               const CurveEstimate& f_other,
                               const std::vector<double>& u_grid,
                               std::vector<std::string>* warnings = nullptr) {
  detail::require_same_grid(f_k, f_other);
  if (!f_k.monotonized || !f_other.monotonized) {
    throw ConfigError("qte requires monotonized CDF inputs; call rearrange first");
  }
  if (f_k.grid.kind == GridKind::discrete_support && warnings) {
    warnings->push_back(
        "QTE on a discrete-support grid: quantile inversion assumes a "
        "continuous outcome and may be misleading here");
  }
  auto inverse = [](const CurveEstimate& f, double u) {
    auto it = std::lower_bound(f.values.begin(), f.values.end(), u);
    if (it == f.values.end()) return std::numeric_limits<double>::quiet_NaN();
    return f.grid.values[static_cast<std::size_t>(it - f.values.begin())];
  };
  std::vector<double> out;
  out.reserve(u_grid.size());
  for (double u : u_grid) {
    if (!(u > 0.0 && u < 1.0)) {
      throw ConfigError("UNotInOpenInterval: quantile level must be in (0, 1)");
    }
    out.push_back(inverse(f_k, u) - inverse(f_other, u));
  }
  return out;
}

/// Difference of arm means; comparison diagnostic only, no adjustment.
inline double ate(const Dataset& data, int k, int k_other) {
  if (k < 0 || k >= data.arms() || k_other < 0 || k_other >= data.arms()) {
    throw DataError("EmptyArm: arm index out of range");
  }
  double sum_k = 0.0, sum_o = 0.0;
  for (Eigen::Index i = 0; i < data.n(); ++i) {
    if (data.w[static_cast<size_t>(i)] == k) sum_k += data.y[i];
    if (data.w[static_cast<size_t>(i)] == k_other) sum_o += data.y[i];
  }
  return sum_k / static_cast<double>(data.arm_counts[static_cast<size_t>(k)]) -
         sum_o / static_cast<double>(data.arm_counts[static_cast<size_t>(k_other)]);
}

/// Monotone rearrangement: sorts the CDF values into non-decreasing order,
/// then clamps into [0, 1].  Idempotent.
inline CurveEstimate rearrange(CurveEstimate curve) {
  if (curve.kind != CurveKind::cdf) {
    throw ConfigError("rearrange applies to CDF curves only");
  }
  std::stable_sort(curve.values.begin(), curve.values.end());
  for (double& v : curve.values) v = std::clamp(v, 0.0, 1.0);
  curve.monotonized = true;
  return curve;
}

}  // namespace dtreg

#endif  // DTREG_CURVES_HPP
