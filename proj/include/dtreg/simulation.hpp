#ifndef DTREG_SIMULATION_HPP
#define DTREG_SIMULATION_HPP

#include <Eigen/Dense>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include "dtreg/bootstrap.hpp"
#include "dtreg/csv.hpp"
#include "dtreg/curves.hpp"
#include "dtreg/dataset.hpp"
#include "dtreg/design.hpp"
#include "dtreg/dr_fit.hpp"
#include "dtreg/errors.hpp"
#include "dtreg/grid.hpp"
#include "dtreg/parallel.hpp"
#include "dtreg/rng.hpp"
#include "dtreg/stats.hpp"

namespace dtreg {

enum class DgpId { dgp1 = 1, dgp2 = 2, dgp3 = 3, dgp4 = 4 };

/// Monte Carlo design: two covariates X1 ~ U(0.5, 1.5) and X2 ~ N(0, 1),
/// binary assignment with treatment probability pi1, and
///   dgp1/dgp2 (continuous): Y = X1 + (X1 + X2) W + |X1 + X2| U,
///     U standard normal (dgp1) or chi-squared with 3 df (dgp2);
///   dgp3/dgp4 (counts): E[Y | X, W] = exp(W + X1 + X2/2),
///     Poisson (dgp3) or negative binomial with dispersion r = 5, i.e.
///     Var = mu + mu^2/5 (dgp4).
struct DgpSpec {
  DgpId id = DgpId::dgp1;
  double pi1 = 0.5;
  Eigen::Index n = 1000;
  std::uint64_t seed = 1;
  // replaces the recorded covariates with independent noise while Y keeps
  // its original law; the equality case of the variance-dominance property
  bool noise_covariates = false;

  void validate() const {
    if (!(pi1 > 0.0 && pi1 < 1.0)) throw ConfigError("pi1 must lie in (0, 1)");
    if (n < 1) throw ConfigError("sample size must be positive");
  }
};

namespace sim_detail {

constexpr std::uint64_t kDataSalt = 0xda7a;
constexpr std::uint64_t kOracleSalt = 0xabcd;
constexpr std::uint64_t kBootSalt = 0xb005;
constexpr int kNegBinDispersion = 5;

/// Poisson quantile at u by CDF inversion; monotone in u for fixed mean, so
/// sharing u across arms couples the potential outcomes.
inline double poisson_inverse(double mu, double u) {
  if (mu <= 0.0) return 0.0;
  if (mu > 500.0) {
    // far outside the reachable range of these DGPs; normal fallback keeps
    // the loop bounded
    double z = normal_quantile(std::clamp(u, 1e-12, 1.0 - 1e-12));
    return std::max(0.0, std::round(mu + std::sqrt(mu) * z));
  }
  double pmf = std::exp(-mu);
  double cdf = pmf;
  double k = 0.0;
  while (u > cdf) {
    k += 1.0;
    pmf *= mu / k;
    cdf += pmf;
    if (k > 1e6) break;  // u in the far numerical tail
  }
  return k;
}

struct UnitDraw {
  double x1 = 0.0;
  double x2 = 0.0;
  double y0 = 0.0;
  double y1 = 0.0;
};

/// One unit's covariates and both potential outcomes on shared latent draws.
template <typename Rng>
inline UnitDraw draw_unit(DgpId id, Rng& rng) {
  std::uniform_real_distribution<double> unif01(0.0, 1.0);
  std::normal_distribution<double> normal(0.0, 1.0);

  UnitDraw unit;
  unit.x1 = 0.5 + unif01(rng);
  unit.x2 = normal(rng);
  switch (id) {
    case DgpId::dgp1:
    case DgpId::dgp2: {
      double noise;
      if (id == DgpId::dgp1) {
        noise = normal(rng);
      } else {
        std::chi_squared_distribution<double> chisq(3.0);
        noise = chisq(rng);
      }
      double scale = std::abs(unit.x1 + unit.x2);
      unit.y0 = unit.x1 + scale * noise;
      unit.y1 = unit.y0 + (unit.x1 + unit.x2);
      break;
    }
    case DgpId::dgp3: {
      double mu0 = std::exp(unit.x1 + unit.x2 / 2.0);
      double u = unif01(rng);
      unit.y0 = poisson_inverse(mu0, u);
      unit.y1 = poisson_inverse(std::exp(1.0) * mu0, u);
      break;
    }
    case DgpId::dgp4: {
      double mu0 = std::exp(unit.x1 + unit.x2 / 2.0);
      // gamma(r, 1)/r mixing: sum of r unit exponentials
      double gamma_sum = 0.0;
      std::exponential_distribution<double> expo(1.0);
      for (int s = 0; s < kNegBinDispersion; ++s) gamma_sum += expo(rng);
      double mix = gamma_sum / static_cast<double>(kNegBinDispersion);
      double u = unif01(rng);
      unit.y0 = poisson_inverse(mu0 * mix, u);
      unit.y1 = poisson_inverse(std::exp(1.0) * mu0 * mix, u);
      break;
    }
  }
  return unit;
}

}  // namespace sim_detail

/// Draws one observed dataset from the DGP.  Sampling is sequential in the
/// unit index, so (spec, rng state) fully determines the result.
inline Dataset sample_dgp(const DgpSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  const Eigen::Index n = spec.n;
  Eigen::VectorXd y(n);
  std::vector<int> w(static_cast<size_t>(n));
  Eigen::MatrixXd x(n, 2);
  std::bernoulli_distribution treat(spec.pi1);

  for (Eigen::Index i = 0; i < n; ++i) {
    sim_detail::UnitDraw unit = sim_detail::draw_unit(spec.id, rng);
    bool treated = treat(rng);
    w[static_cast<size_t>(i)] = treated ? 1 : 0;
    y[i] = treated ? unit.y1 : unit.y0;
    x(i, 0) = unit.x1;
    x(i, 1) = unit.x2;
  }
  if (spec.noise_covariates) {
    // fresh draws after the main pass: outcomes keep their stream, recorded
    // covariates become independent of them
    std::uniform_real_distribution<double> unif01(0.0, 1.0);
    std::normal_distribution<double> normal(0.0, 1.0);
    for (Eigen::Index i = 0; i < n; ++i) {
      x(i, 0) = 0.5 + unif01(rng);
      x(i, 1) = normal(rng);
    }
  }
  return validate_dataset(std::move(y), std::move(w), std::move(x), 2);
}

inline Dataset sample_dgp(const DgpSpec& spec) {
  std::mt19937_64 rng =
      make_stream(spec.seed, 0, sim_detail::kDataSalt);
  return sample_dgp(spec, rng);
}

/// Large-sample ground truth: both potential outcomes evaluated on the same
/// covariate and latent draws, so the truth DTE at a threshold is a
/// difference of CDFs computed from common randomness.
class OracleTruth {
 public:
  explicit OracleTruth(const DgpSpec& spec, Eigen::Index size = 1000000,
                       std::optional<std::uint64_t> seed_override = std::nullopt)
      : spec_(spec), size_(size) {
    spec_.validate();
    if (size < 1) throw ConfigError("oracle size must be positive");
    std::uint64_t seed = seed_override.value_or(
        derive_seed(spec.seed, 0, sim_detail::kOracleSalt));
    std::mt19937_64 rng(seed);
    y0_.resize(static_cast<size_t>(size));
    y1_.resize(static_cast<size_t>(size));
    for (Eigen::Index i = 0; i < size; ++i) {
      sim_detail::UnitDraw unit = sim_detail::draw_unit(spec.id, rng);
      y0_[static_cast<size_t>(i)] = unit.y0;
      y1_[static_cast<size_t>(i)] = unit.y1;
    }
    std::sort(y0_.begin(), y0_.end());
    std::sort(y1_.begin(), y1_.end());
  }

  const DgpSpec& spec() const { return spec_; }
  Eigen::Index size() const { return size_; }

  double cdf(int arm, double y) const {
    const std::vector<double>& v = arm == 0 ? y0_ : y1_;
    auto it = std::upper_bound(v.begin(), v.end(), y);
    return static_cast<double>(it - v.begin()) / static_cast<double>(v.size());
  }

  double dte_at(double y) const { return cdf(1, y) - cdf(0, y); }

  double quantile(int arm, double p) const {
    return quantile_sorted(arm == 0 ? y0_ : y1_, p);
  }

  /// Quantile of the observed-outcome mixture (1 - pi1) F0 + pi1 F1.
  double pooled_quantile(double p) const {
    std::vector<double> merged;
    merged.reserve(y0_.size() + y1_.size());
    std::merge(y0_.begin(), y0_.end(), y1_.begin(), y1_.end(),
               std::back_inserter(merged));
    auto mix_cdf = [&](double y) {
      return (1.0 - spec_.pi1) * cdf(0, y) + spec_.pi1 * cdf(1, y);
    };
    auto it = std::partition_point(merged.begin(), merged.end(),
                                   [&](double y) { return mix_cdf(y) < p; });
    return it == merged.end() ? merged.back() : *it;
  }

  /// DTE evaluation points used in the reported studies: pooled-outcome
  /// deciles for the continuous DGPs, the counts 1..5 for the discrete ones.
  std::vector<double> default_thresholds() const {
    std::vector<double> out;
    if (spec_.id == DgpId::dgp1 || spec_.id == DgpId::dgp2) {
      for (int t = 1; t <= 9; ++t) {
        out.push_back(pooled_quantile(static_cast<double>(t) / 10.0));
      }
    } else {
      for (int v = 1; v <= 5; ++v) out.push_back(static_cast<double>(v));
    }
    return out;
  }

 private:
  DgpSpec spec_;
  Eigen::Index size_;
  std::vector<double> y0_;
  std::vector<double> y1_;
};

enum class EstimatorId { simple, ols_adjusted, logit_adjusted };

inline std::string estimator_name(EstimatorId id) {
  switch (id) {
    case EstimatorId::simple: return "simple";
    case EstimatorId::ols_adjusted: return "ols";
    case EstimatorId::logit_adjusted: return "logit";
  }
  return "?";
}

struct StudyConfig {
  int replications = 1000;
  std::vector<EstimatorId> estimators = {EstimatorId::simple,
                                         EstimatorId::ols_adjusted,
                                         EstimatorId::logit_adjusted};
  BootstrapConfig bootstrap = [] {
    BootstrapConfig b;
    b.replicates = 200;  // desk-scale default inside studies
    return b;
  }();
  std::vector<double> thresholds;  // empty: oracle defaults
  int threads = 0;

  void validate() const {
    if (replications < 1) throw ConfigError("replications must be positive");
    if (estimators.empty()) throw ConfigError("estimator set is empty");
    bootstrap.validate();
  }
};

struct EstimatorMetrics {
  EstimatorId id = EstimatorId::simple;
  std::vector<double> bias;
  std::vector<double> rmse;
  std::vector<double> ci_length;
  std::vector<double> coverage;
  std::vector<double> mc_var;   // Monte Carlo variance of the estimate
  std::vector<double> mc_se;    // sd(estimate)/sqrt(R)
  Eigen::MatrixXd estimates;    // R x J, NaN rows for failed replications
};

struct StudyResult {
  DgpSpec spec;
  StudyConfig config;
  std::vector<double> thresholds;
  std::vector<double> truth;  // oracle DTE at the thresholds
  std::vector<EstimatorMetrics> metrics;
  int completed = 0;
  int failed = 0;
  double runtime_seconds = 0.0;

  const EstimatorMetrics& of(EstimatorId id) const {
    for (const auto& m : metrics) {
      if (m.id == id) return m;
    }
    throw ConfigError("estimator not present in study result");
  }
};

/// Replication study of the DTE estimators between arm 1 and arm 0: bias,
/// RMSE, mean CI length and coverage against the oracle truth.
inline StudyResult run_study(const DgpSpec& spec, const StudyConfig& config,
                             const OracleTruth& oracle) {
  spec.validate();
  config.validate();

  StudyResult result;
  result.spec = spec;
  result.config = config;
  result.thresholds = config.thresholds.empty() ? oracle.default_thresholds()
                                                : config.thresholds;
  for (double y : result.thresholds) result.truth.push_back(oracle.dte_at(y));

  const std::size_t j_count = result.thresholds.size();
  const int r_count = config.replications;
  const std::size_t e_count = config.estimators.size();

  ThresholdGrid grid;
  grid.kind = GridKind::user;
  grid.values = result.thresholds;
  grid.covers_full_support = false;

  TransformSpec transform;  // intercept + linear terms in (X1, X2)

  std::vector<Eigen::MatrixXd> estimates(
      e_count, Eigen::MatrixXd::Constant(r_count, static_cast<Eigen::Index>(j_count),
                                         std::numeric_limits<double>::quiet_NaN()));
  std::vector<Eigen::MatrixXd> ci_lo = estimates;
  std::vector<Eigen::MatrixXd> ci_hi = estimates;
  std::vector<char> ok(static_cast<size_t>(r_count), 0);

  const double z = normal_quantile(1.0 - (1.0 - config.bootstrap.ci_level) / 2.0);

  auto run_one = [&](std::int64_t r) {
    DgpSpec draw = spec;
    std::mt19937_64 rng = make_stream(spec.seed, static_cast<std::uint64_t>(r),
                                      sim_detail::kDataSalt);
    Dataset data = sample_dgp(draw, rng);
    DesignMatrix design = build_design_matrix(data, transform);

    SolverOptions solver;
    solver.threads = 1;  // parallelism lives at the replication level

    std::vector<std::unique_ptr<ReplicateEngine>> engines(e_count);
    for (std::size_t e = 0; e < e_count; ++e) {
      switch (config.estimators[e]) {
        case EstimatorId::simple:
          engines[e] = std::make_unique<ReplicateEngine>(data, grid, 1, 0);
          break;
        case EstimatorId::ols_adjusted: {
          DrFit fit = fit_all(data, design, grid, Link::linear, solver);
          engines[e] = std::make_unique<ReplicateEngine>(fit, data, design, 1, 0);
          break;
        }
        case EstimatorId::logit_adjusted: {
          DrFit fit = fit_all(data, design, grid, Link::logit, solver);
          engines[e] = std::make_unique<ReplicateEngine>(fit, data, design, 1, 0);
          break;
        }
      }
    }

    std::uint64_t boot_seed = derive_seed(spec.seed, static_cast<std::uint64_t>(r),
                                          sim_detail::kBootSalt);
    const int b_count = config.bootstrap.replicates;
    std::vector<Eigen::MatrixXd> reps(
        e_count, Eigen::MatrixXd(b_count, static_cast<Eigen::Index>(j_count)));
    for (int b = 0; b < b_count; ++b) {
      // one weight field per replicate, shared across estimators
      Eigen::VectorXd weights =
          engines[0]->replicate_weights(config.bootstrap.scheme, boot_seed, b);
      for (std::size_t e = 0; e < e_count; ++e) {
        Adjustment adj = config.estimators[e] == EstimatorId::simple
                             ? Adjustment::simple
                             : Adjustment::regression_adjusted;
        std::vector<double> values = engines[e]->replicate_effect(
            EffectKind::dte, 0.0, adj, config.bootstrap.formula, weights, false);
        for (std::size_t j = 0; j < j_count; ++j) {
          reps[e](b, static_cast<Eigen::Index>(j)) = values[j];
        }
      }
    }

    for (std::size_t e = 0; e < e_count; ++e) {
      Adjustment adj = config.estimators[e] == EstimatorId::simple
                           ? Adjustment::simple
                           : Adjustment::regression_adjusted;
      CurveEstimate point = engines[e]->point_effect(EffectKind::dte, 0.0, adj, false);
      for (std::size_t j = 0; j < j_count; ++j) {
        std::vector<double> column(static_cast<size_t>(b_count));
        for (int b = 0; b < b_count; ++b) {
          column[static_cast<size_t>(b)] = reps[e](b, static_cast<Eigen::Index>(j));
        }
        double se = sd_of(column);
        estimates[e](r, static_cast<Eigen::Index>(j)) = point.values[j];
        if (config.bootstrap.ci_kind == CiKind::normal_se) {
          ci_lo[e](r, static_cast<Eigen::Index>(j)) = point.values[j] - z * se;
          ci_hi[e](r, static_cast<Eigen::Index>(j)) = point.values[j] + z * se;
        } else {
          std::sort(column.begin(), column.end());
          double alpha = 1.0 - config.bootstrap.ci_level;
          ci_lo[e](r, static_cast<Eigen::Index>(j)) = quantile_sorted(column, alpha / 2.0);
          ci_hi[e](r, static_cast<Eigen::Index>(j)) = quantile_sorted(column, 1.0 - alpha / 2.0);
        }
      }
    }
    ok[static_cast<size_t>(r)] = 1;
  };

  auto start = std::chrono::steady_clock::now();
  parallel_for(r_count, config.threads, [&](std::int64_t r) {
    try {
      run_one(r);
    } catch (const Error&) {
      ok[static_cast<size_t>(r)] = 0;  // recorded and excluded
    }
  });
  result.runtime_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  for (int r = 0; r < r_count; ++r) {
    if (ok[static_cast<size_t>(r)]) {
      ++result.completed;
    } else {
      ++result.failed;
    }
  }
  if (result.completed == 0) throw NumericError("every study replication failed");

  for (std::size_t e = 0; e < e_count; ++e) {
    EstimatorMetrics metrics;
    metrics.id = config.estimators[e];
    metrics.estimates = estimates[e];
    metrics.bias.resize(j_count);
    metrics.rmse.resize(j_count);
    metrics.ci_length.resize(j_count);
    metrics.coverage.resize(j_count);
    metrics.mc_var.resize(j_count);
    metrics.mc_se.resize(j_count);
    for (std::size_t j = 0; j < j_count; ++j) {
      std::vector<double> est;
      est.reserve(static_cast<size_t>(result.completed));
      double len_sum = 0.0;
      int cover = 0;
      for (int r = 0; r < r_count; ++r) {
        if (!ok[static_cast<size_t>(r)]) continue;
        double value = estimates[e](r, static_cast<Eigen::Index>(j));
        est.push_back(value);
        double lo = ci_lo[e](r, static_cast<Eigen::Index>(j));
        double hi = ci_hi[e](r, static_cast<Eigen::Index>(j));
        len_sum += hi - lo;
        if (lo <= result.truth[j] && result.truth[j] <= hi) ++cover;
      }
      double truth = result.truth[j];
      double mean = mean_of(est);
      double mse = 0.0;
      for (double v : est) mse += (v - truth) * (v - truth);
      mse /= static_cast<double>(est.size());
      metrics.bias[j] = mean - truth;
      metrics.rmse[j] = std::sqrt(mse);
      metrics.ci_length[j] = len_sum / static_cast<double>(est.size());
      metrics.coverage[j] = static_cast<double>(cover) / static_cast<double>(est.size());
      metrics.mc_var[j] = variance_of(est);
      metrics.mc_se[j] = sd_of(est) / std::sqrt(static_cast<double>(est.size()));
    }
    result.metrics.push_back(std::move(metrics));
  }
  return result;
}

/// Tidy CSV of study aggregates, one row per (estimator, threshold).
inline void write_study_csv(const StudyResult& result, const std::string& path) {
  std::vector<std::vector<std::string>> rows;
  for (const auto& metrics : result.metrics) {
    for (std::size_t j = 0; j < result.thresholds.size(); ++j) {
      rows.push_back({std::to_string(static_cast<int>(result.spec.id)),
                      format_double(result.spec.pi1),
                      std::to_string(result.spec.n),
                      estimator_name(metrics.id),
                      format_double(result.thresholds[j]),
                      format_double(metrics.bias[j]),
                      format_double(metrics.rmse[j]),
                      format_double(metrics.ci_length[j]),
                      format_double(metrics.coverage[j]),
                      std::to_string(result.completed)});
    }
  }
  write_csv_file(path,
                 {"dgp", "pi1", "n", "estimator", "y", "bias", "rmse",
                  "ci_length", "coverage", "R"},
                 rows);
}

struct VarianceComparison {
  std::vector<double> thresholds;
  std::vector<double> var_simple;
  std::vector<double> var_adjusted;
  std::vector<double> difference;      // simple - adjusted
  std::vector<double> mc_se;           // Monte Carlo SE of the difference
};

/// Per-threshold Monte Carlo variance comparison between the simple and an
/// adjusted estimator, with a paired standard error for the difference.
inline VarianceComparison compare_variance(const StudyResult& result,
                                           EstimatorId adjusted) {
  const EstimatorMetrics& s = result.of(EstimatorId::simple);
  const EstimatorMetrics& a = result.of(adjusted);
  if (result.completed < 100) {
    throw ConfigError("compare_variance needs at least 100 completed replications");
  }
  VarianceComparison out;
  out.thresholds = result.thresholds;
  const Eigen::Index r_count = s.estimates.rows();
  for (std::size_t j = 0; j < result.thresholds.size(); ++j) {
    std::vector<double> sv, av;
    for (Eigen::Index r = 0; r < r_count; ++r) {
      double x = s.estimates(r, static_cast<Eigen::Index>(j));
      double y = a.estimates(r, static_cast<Eigen::Index>(j));
      if (std::isnan(x) || std::isnan(y)) continue;
      sv.push_back(x);
      av.push_back(y);
    }
    double ms = mean_of(sv), ma = mean_of(av);
    std::vector<double> paired(sv.size());
    for (std::size_t r = 0; r < sv.size(); ++r) {
      paired[r] = (sv[r] - ms) * (sv[r] - ms) - (av[r] - ma) * (av[r] - ma);
    }
    double count = static_cast<double>(sv.size());
    double scale = count / (count - 1.0);
    out.var_simple.push_back(variance_of(sv));
    out.var_adjusted.push_back(variance_of(av));
    out.difference.push_back(scale * mean_of(paired));
    out.mc_se.push_back(scale * sd_of(paired) / std::sqrt(count));
  }
  return out;
}

}  // namespace dtreg

#endif  // DTREG_SIMULATION_HPP
