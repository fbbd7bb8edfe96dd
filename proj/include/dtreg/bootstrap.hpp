#ifndef DTREG_BOOTSTRAP_HPP
#define DTREG_BOOTSTRAP_HPP

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dtreg/curves.hpp"
#include "dtreg/dataset.hpp"
#include "dtreg/dr_fit.hpp"
#include "dtreg/errors.hpp"
#include "dtreg/parallel.hpp"
#include "dtreg/rng.hpp"
#include "dtreg/stats.hpp"

namespace dtreg {

enum class WeightScheme { multinomial, bayesian };
enum class CiKind { normal_se, percentile };
enum class ReplicateFormula { augmented, plug_in };

struct BootstrapConfig {
  WeightScheme scheme = WeightScheme::multinomial;
  int replicates = 1000;
  std::uint64_t seed = 0;
  double ci_level = 0.95;
  CiKind ci_kind = CiKind::normal_se;
  ReplicateFormula formula = ReplicateFormula::augmented;
  // divide weighted arm sums by the weighted arm mass instead of n_k;
  // identical under the arm-stratified weight field, where the two coincide
  bool normalize_by_weighted_counts = false;
  bool keep_replicates = false;
  int threads = 0;

  void validate() const {
    if (replicates < 2) throw ConfigError("TooFewReplicates: need B >= 2");
    if (!(ci_level > 0.0 && ci_level < 1.0)) {
      throw ConfigError("ci_level must lie in (0, 1)");
    }
  }
};

struct InferenceResult {
  CurveEstimate point;
  std::vector<double> se;
  std::vector<double> ci_lo;
  std::vector<double> ci_hi;
  std::optional<Eigen::MatrixXd> replicate_curves;  // B x J when kept
  BootstrapConfig config;
  std::vector<std::string> warnings;
};

/// Exchangeable-bootstrap weight vector over n units: multinomial counts
/// from n equal-probability draws (sum is exactly n), or i.i.d. standard
/// exponentials (Bayesian bootstrap, mean and variance about 1).
inline Eigen::VectorXd gen_weights(WeightScheme scheme, Eigen::Index n,
                                   std::mt19937_64& rng) {
  if (n < 1) throw ConfigError("gen_weights: n must be positive");
  Eigen::VectorXd s = Eigen::VectorXd::Zero(n);
  if (scheme == WeightScheme::multinomial) {
    std::uniform_int_distribution<Eigen::Index> pick(0, n - 1);
    for (Eigen::Index draw = 0; draw < n; ++draw) s[pick(rng)] += 1.0;
  } else {
    std::exponential_distribution<double> expo(1.0);
    for (Eigen::Index i = 0; i < n; ++i) s[i] = expo(rng);
  }
  return s;
}

/// Precomputed state for bootstrapping one arm pair: indicator and
/// conditional-CDF matrices, arm index lists, and the point estimates.
///
/// Replicates hold the conditional-distribution fit fixed at its
/// original-sample value; only the random weights vary.  The weight field is
/// drawn arm by arm (each arm's weights sum to its own n_k), so the weighted
/// simple CDF with the original n_k denominator is the classical stratified
/// resample and the augmentation term cancels exactly for intercept-only
/// models.
class ReplicateEngine {
 public:
  /// Adjusted + simple bootstrap for the pair (k, k_other).
  ReplicateEngine(const DrFit& fit, const Dataset& data,
                  const DesignMatrix& design, int k, int k_other)
      : grid_(fit.grid), k_(k), k_other_(k_other), n_(data.n()) {
    init_arms(data);
    const std::size_t j_count = grid_.size();
    for (int side = 0; side < 2; ++side) {
      int arm = side == 0 ? k_ : k_other_;
      ArmBlock& block = blocks_[side];
      block.pred_all = predict_cdf(fit, design, arm);
      block.pred_arm.resize(block.rows.size(), j_count);
      for (std::size_t r = 0; r < block.rows.size(); ++r) {
        block.pred_arm.row(static_cast<Eigen::Index>(r)) =
            block.pred_all.row(block.rows[r]);
      }
      fill_indicators(data, block);
    }
    Eigen::MatrixXd balance = balance_residual(fit, data, design);
    max_balance_ = balance.cwiseAbs().maxCoeff();
    has_fit_ = true;
  }

  /// Simple-only bootstrap (no regression adjustment available).
  ReplicateEngine(const Dataset& data, const ThresholdGrid& grid, int k,
                  int k_other)
      : grid_(grid), k_(k), k_other_(k_other), n_(data.n()) {
    init_arms(data);
    for (int side = 0; side < 2; ++side) {
      fill_indicators(data, blocks_[side]);
    }
  }

  const ThresholdGrid& grid() const { return grid_; }
  bool balance_ok() const { return max_balance_ <= 1e-6; }
  double max_balance() const { return max_balance_; }

  CurveEstimate point_cdf(int side, Adjustment adjustment) const {
    if (adjustment == Adjustment::regression_adjusted) require_fit();
    const ArmBlock& block = blocks_[side];
    CurveEstimate out;
    out.grid = grid_;
    out.kind = CurveKind::cdf;
    out.adjustment = adjustment;
    out.arm = side == 0 ? k_ : k_other_;
    Eigen::VectorXd means =
        adjustment == Adjustment::simple
            ? Eigen::VectorXd(block.indicators.colwise().mean())
            : Eigen::VectorXd(block.pred_all.colwise().mean());
    out.values.assign(means.data(), means.data() + means.size());
    return out;
  }

  CurveEstimate point_effect(EffectKind kind, double h, Adjustment adjustment,
                             bool monotonize) const {
    CurveEstimate f_k = point_cdf(0, adjustment);
    CurveEstimate f_o = point_cdf(1, adjustment);
    if (monotonize) {
      f_k = rearrange(std::move(f_k));
      f_o = rearrange(std::move(f_o));
    }
    CurveEstimate out = kind == EffectKind::dte ? dte(f_k, f_o) : pte(f_k, f_o, h);
    return out;
  }

  /// Arm-stratified weight field for replicate `index`: multinomial counts
  /// summing to n_k within each arm, or within-arm mean-one exponentials.
  Eigen::VectorXd replicate_weights(WeightScheme scheme, std::uint64_t seed,
                                    std::int64_t index) const {
    Eigen::VectorXd s(n_);
    std::uint64_t replicate_seed =
        derive_seed(seed, static_cast<std::uint64_t>(index), kBootstrapSalt);
    for (std::size_t k = 0; k < arm_rows_.size(); ++k) {
      const auto& rows = arm_rows_[k];
      std::mt19937_64 rng = make_stream(replicate_seed, k);
      Eigen::VectorXd sub =
          gen_weights(scheme, static_cast<Eigen::Index>(rows.size()), rng);
      if (scheme == WeightScheme::bayesian) {
        sub *= static_cast<double>(rows.size()) / sub.sum();
      }
      for (std::size_t r = 0; r < rows.size(); ++r) {
        s[rows[r]] = sub[static_cast<Eigen::Index>(r)];
      }
    }
    return s;
  }

  /// One replicate effect curve for the given weight field.
  std::vector<double> replicate_effect(EffectKind kind, double h,
                                       Adjustment adjustment,
                                       ReplicateFormula formula,
                                       const Eigen::VectorXd& weights,
                                       bool monotonize,
                                       std::vector<std::string>* warnings
                                       = nullptr) const {
    if (weights.size() != n_) {
      throw ConfigError("replicate weights must have length n");
    }
    if (adjustment == Adjustment::regression_adjusted) {
      require_fit();
      if (formula == ReplicateFormula::augmented && !balance_ok()) {
        // FormulaUnavailable: the augmented replicate centers away from the
        // adjusted point when balance fails; fall back to the plug-in form.
        if (warnings) {
          warnings->push_back(
              "FormulaUnavailable: balance residual " +
              std::to_string(max_balance_) +
              " exceeds 1e-6; using the plug-in replicate formula");
        }
        formula = ReplicateFormula::plug_in;
      }
    }

    std::vector<double> cdf_k = replicate_cdf_curve(0, adjustment, formula, weights);
    std::vector<double> cdf_o = replicate_cdf_curve(1, adjustment, formula, weights);
    if (monotonize) {
      monotonize_values(cdf_k);
      monotonize_values(cdf_o);
    }
    std::vector<double> delta(cdf_k.size());
    for (std::size_t j = 0; j < delta.size(); ++j) delta[j] = cdf_k[j] - cdf_o[j];
    if (kind == EffectKind::dte) return delta;
    return detail::pte_values(delta, detail::pte_layout(grid_, h));
  }

  /// One replicate of a single arm's CDF curve (side 0 = k, side 1 = k').
  std::vector<double> replicate_cdf_curve(int side, Adjustment adjustment,
                                          ReplicateFormula formula,
                                          const Eigen::VectorXd& weights) const {
    if (weights.size() != n_) {
      throw ConfigError("replicate weights must have length n");
    }
    if (adjustment == Adjustment::regression_adjusted) require_fit();
    const ArmBlock& block = blocks_[side];
    const Eigen::Index n_k = static_cast<Eigen::Index>(block.rows.size());
    Eigen::VectorXd sub(n_k);
    for (Eigen::Index r = 0; r < n_k; ++r) {
      sub[r] = weights[block.rows[static_cast<size_t>(r)]];
    }
    const double denom = static_cast<double>(n_k);

    Eigen::VectorXd values;
    if (adjustment == Adjustment::simple) {
      values = block.indicators.transpose() * sub / denom;
    } else if (formula == ReplicateFormula::plug_in) {
      values = block.pred_all.transpose() * weights / static_cast<double>(n_);
    } else {
      values = block.indicators.transpose() * sub / denom +
               block.pred_all.transpose() * weights / static_cast<double>(n_) -
               block.pred_arm.transpose() * sub / denom;
    }
    return std::vector<double>(values.data(), values.data() + values.size());
  }

 private:
  struct ArmBlock {
    std::vector<Eigen::Index> rows;
    Eigen::MatrixXd indicators;  // n_k x J
    Eigen::MatrixXd pred_arm;    // n_k x J
    Eigen::MatrixXd pred_all;    // n x J
  };

  static constexpr std::uint64_t kBootstrapSalt = 0xb007;

  void init_arms(const Dataset& data) {
    arm_rows_.resize(static_cast<size_t>(data.arms()));
    for (int k = 0; k < data.arms(); ++k) {
      arm_rows_[static_cast<size_t>(k)] = data.rows_of_arm(k);
    }
    blocks_[0].rows = arm_rows_[static_cast<size_t>(k_)];
    blocks_[1].rows = arm_rows_[static_cast<size_t>(k_other_)];
  }

  void fill_indicators(const Dataset& data, ArmBlock& block) {
    const std::size_t j_count = grid_.size();
    block.indicators.resize(static_cast<Eigen::Index>(block.rows.size()),
                            static_cast<Eigen::Index>(j_count));
    for (std::size_t r = 0; r < block.rows.size(); ++r) {
      double y = data.y[block.rows[r]];
      for (std::size_t j = 0; j < j_count; ++j) {
        block.indicators(static_cast<Eigen::Index>(r),
                         static_cast<Eigen::Index>(j)) =
            y <= grid_.values[j] ? 1.0 : 0.0;
      }
    }
  }

  void require_fit() const {
    if (!has_fit_) {
      throw ConfigError(
          "this engine was built without a fit; adjusted curves unavailable");
    }
  }

  static void monotonize_values(std::vector<double>& values) {
    std::stable_sort(values.begin(), values.end());
    for (double& v : values) v = std::clamp(v, 0.0, 1.0);
  }

  ThresholdGrid grid_;
  int k_ = 0;
  int k_other_ = 0;
  Eigen::Index n_ = 0;
  std::vector<std::vector<Eigen::Index>> arm_rows_;
  ArmBlock blocks_[2];
  bool has_fit_ = false;
  double max_balance_ = 0.0;
};

/// Pointwise SEs and confidence intervals from a B x J replicate matrix.
inline InferenceResult infer(const CurveEstimate& point,
                             const Eigen::MatrixXd& replicates,
                             const BootstrapConfig& config) {
  config.validate();
  const Eigen::Index b_count = replicates.rows();
  const Eigen::Index j_count = replicates.cols();
  if (b_count < 2) throw ConfigError("TooFewReplicates: need B >= 2");
  if (static_cast<std::size_t>(j_count) != point.values.size()) {
    throw ConfigError("replicate matrix and point curve disagree on J");
  }

  InferenceResult out;
  out.point = point;
  out.config = config;
  out.se.resize(static_cast<size_t>(j_count));
  out.ci_lo.resize(static_cast<size_t>(j_count));
  out.ci_hi.resize(static_cast<size_t>(j_count));

  const double alpha = 1.0 - config.ci_level;
  const double z = normal_quantile(1.0 - alpha / 2.0);
  std::vector<double> column(static_cast<size_t>(b_count));
  for (Eigen::Index j = 0; j < j_count; ++j) {
    for (Eigen::Index b = 0; b < b_count; ++b) column[static_cast<size_t>(b)] = replicates(b, j);
    double se = sd_of(column);
    out.se[static_cast<size_t>(j)] = se;
    if (config.ci_kind == CiKind::normal_se) {
      out.ci_lo[static_cast<size_t>(j)] = point.values[static_cast<size_t>(j)] - z * se;
      out.ci_hi[static_cast<size_t>(j)] = point.values[static_cast<size_t>(j)] + z * se;
    } else {
      std::sort(column.begin(), column.end());
      out.ci_lo[static_cast<size_t>(j)] = quantile_sorted(column, alpha / 2.0);
      out.ci_hi[static_cast<size_t>(j)] = quantile_sorted(column, 1.0 - alpha / 2.0);
    }
  }
  if (config.keep_replicates) out.replicate_curves = replicates;
  return out;
}

struct UniformBand {
  double scale = 0.0;               // level-quantile of the sup statistic
  std::vector<double> half_width;   // scale * se_j; 0 at excluded points
  std::vector<std::size_t> excluded;
  std::vector<std::string> warnings;
};

/// Experimental sup-t band over the replicate process.  Pointwise intervals
/// are the primary inference; this is a convenience diagnostic.
inline UniformBand uniform_band(const CurveEstimate& point,
                                const Eigen::MatrixXd& replicates,
                                const std::vector<double>& se, double level) {
  const Eigen::Index b_count = replicates.rows();
  if (b_count < 100) throw ConfigError("uniform_band needs at least 100 replicates");
  UniformBand band;
  for (std::size_t j = 0; j < se.size(); ++j) {
    if (se[j] <= 0.0) {
      band.excluded.push_back(j);
      band.warnings.push_back("DegenerateSE: threshold index " +
                              std::to_string(j) + " excluded from the band");
    }
  }
  std::vector<double> sup(static_cast<size_t>(b_count), 0.0);
  for (Eigen::Index b = 0; b < b_count; ++b) {
    double worst = 0.0;
    for (std::size_t j = 0; j < se.size(); ++j) {
      if (se[j] <= 0.0) continue;
      worst = std::max(worst, std::abs(replicates(b, static_cast<Eigen::Index>(j)) -
                                       point.values[j]) / se[j]);
    }
    sup[static_cast<size_t>(b)] = worst;
  }
  std::sort(sup.begin(), sup.end());
  band.scale = quantile_sorted(sup, level);
  band.half_width.resize(se.size());
  for (std::size_t j = 0; j < se.size(); ++j) {
    band.half_width[j] = se[j] > 0.0 ? band.scale * se[j] : 0.0;
  }
  return band;
}

/// Runs the full B-replicate bootstrap for one effect curve.  Replicates
/// run in parallel on independent per-index streams and land in fixed rows,
/// so results are bit-identical for any thread count.
inline InferenceResult bootstrap_effect(const ReplicateEngine& engine,
                                        EffectKind kind, double h,
                                        Adjustment adjustment,
                                        const BootstrapConfig& config,
                                        bool monotonize = false) {
  config.validate();
  CurveEstimate point = engine.point_effect(kind, h, adjustment, monotonize);
  const Eigen::Index j_count = static_cast<Eigen::Index>(point.values.size());
  Eigen::MatrixXd replicates(config.replicates, j_count);
  std::vector<std::string> warnings;
  if (adjustment == Adjustment::regression_adjusted &&
      config.formula == ReplicateFormula::augmented && !engine.balance_ok()) {
    warnings.push_back("FormulaUnavailable: balance residual " +
                       std::to_string(engine.max_balance()) +
                       " exceeds 1e-6; using the plug-in replicate formula");
  }
  parallel_for(config.replicates, config.threads, [&](std::int64_t b) {
    Eigen::VectorXd weights =
        engine.replicate_weights(config.scheme, config.seed, b);
    std::vector<double> values = engine.replicate_effect(
        kind, h, adjustment, config.formula, weights, monotonize);
    for (Eigen::Index j = 0; j < j_count; ++j) {
      replicates(static_cast<Eigen::Index>(b), j) = values[static_cast<size_t>(j)];
    }
  });
  InferenceResult result = infer(point, replicates, config);
  result.warnings.insert(result.warnings.end(), warnings.begin(), warnings.end());
  return result;
}

}  // namespace dtreg

#endif  // DTREG_BOOTSTRAP_HPP
