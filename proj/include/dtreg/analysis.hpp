#ifndef DTREG_ANALYSIS_HPP
#define DTREG_ANALYSIS_HPP

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "dtreg/bootstrap.hpp"
#include "dtreg/csv.hpp"
#include "dtreg/curves.hpp"
#include "dtreg/dataset.hpp"
#include "dtreg/design.hpp"
#include "dtreg/dr_fit.hpp"
#include "dtreg/errors.hpp"
#include "dtreg/grid.hpp"
#include "dtreg/link.hpp"
#include "dtreg/svg.hpp"

namespace dtreg {

struct ColumnRoles {
  std::string outcome;
  std::string treatment;
  std::vector<std::string> covariates;
};

/// Declarative description of one end-to-end analysis, parsed from a JSON
/// config document.  The schema is documented in the README.
struct AnalysisConfig {
  std::string data_path;
  ColumnRoles columns;
  std::string outcome_unit;
  TransformSpec transform;
  Link link = Link::logit;
  GridSpec grid;
  std::vector<std::pair<int, int>> pairs = {{1, 0}};
  std::vector<double> widths;  // PTE widths h
  BootstrapConfig bootstrap;
  std::optional<std::uint64_t> seed;
  bool monotonize = true;
  std::string output_dir = ".";
  int threads = 0;

  void validate() const {
    if (data_path.empty()) throw ConfigError("config: 'data' path is missing");
    if (columns.outcome.empty() || columns.treatment.empty()) {
      throw ConfigError("config: outcome and treatment columns are required");
    }
    for (double h : widths) {
      if (!(h > 0.0)) throw ConfigError("NonpositiveH: config h values must be positive");
    }
    if (!seed.has_value()) {
      throw ConfigError("a seed is required: pass --seed or set \"seed\" in the config");
    }
    bootstrap.validate();
  }
};

namespace analysis_detail {

inline WeightScheme parse_scheme(const std::string& s) {
  if (s == "multinomial") return WeightScheme::multinomial;
  if (s == "bayesian") return WeightScheme::bayesian;
  throw ConfigError("unknown bootstrap scheme '" + s +
                    "' (expected multinomial or bayesian)");
}

inline CiKind parse_ci(const std::string& s) {
  if (s == "normal" || s == "normal-se") return CiKind::normal_se;
  if (s == "percentile") return CiKind::percentile;
  throw ConfigError("unknown ci kind '" + s + "' (expected normal or percentile)");
}

inline ReplicateFormula parse_formula(const std::string& s) {
  if (s == "augmented") return ReplicateFormula::augmented;
  if (s == "plugin" || s == "plug-in") return ReplicateFormula::plug_in;
  throw ConfigError("unknown replicate formula '" + s +
                    "' (expected augmented or plugin)");
}

inline GridKind parse_grid_kind(const std::string& s) {
  if (s == "discrete-support" || s == "discrete") return GridKind::discrete_support;
  if (s == "quantile" || s == "quantile-grid") return GridKind::quantile;
  if (s == "user" || s == "user-supplied") return GridKind::user;
  throw ConfigError("unknown grid kind '" + s + "'");
}

inline std::string short_number(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%g", v);
  return buf;
}

}  // namespace analysis_detail

inline AnalysisConfig parse_analysis_config(const nlohmann::json& j) {
  using nlohmann::json;
  AnalysisConfig cfg;
  try {
    cfg.data_path = j.at("data").get<std::string>();
    const json& cols = j.at("columns");
    cfg.columns.outcome = cols.at("outcome").get<std::string>();
    cfg.columns.treatment = cols.at("treatment").get<std::string>();
    if (cols.contains("covariates")) {
      cfg.columns.covariates = cols.at("covariates").get<std::vector<std::string>>();
    }
    if (j.contains("outcome_unit")) cfg.outcome_unit = j.at("outcome_unit").get<std::string>();

    if (j.contains("transform")) {
      const json& t = j.at("transform");
      if (t.contains("intercept")) cfg.transform.intercept = t.at("intercept").get<bool>();
      if (t.contains("degrees")) {
        cfg.transform.degree = t.at("degrees").get<std::vector<int>>();
      } else if (t.contains("degree")) {
        cfg.transform.degree.assign(cfg.columns.covariates.size(),
                                    t.at("degree").get<int>());
      }
      if (t.contains("interactions")) {
        cfg.transform.pairwise_interactions = t.at("interactions").get<bool>();
      }
    }
    if (j.contains("link")) cfg.link = parse_link(j.at("link").get<std::string>());

    if (j.contains("grid")) {
      const json& g = j.at("grid");
      if (g.contains("kind")) {
        std::string kind = g.at("kind").get<std::string>();
        if (kind != "auto") cfg.grid.kind = analysis_detail::parse_grid_kind(kind);
      }
      if (g.contains("count")) cfg.grid.count = g.at("count").get<int>();
      if (g.contains("bounds")) {
        auto b = g.at("bounds").get<std::vector<double>>();
        if (b.size() != 2) throw ConfigError("grid bounds must be [lo, hi]");
        cfg.grid.lower_prob = b[0];
        cfg.grid.upper_prob = b[1];
      }
      if (g.contains("range")) {
        auto r = g.at("range").get<std::vector<double>>();
        if (r.size() != 2) throw ConfigError("grid range must be [min, max]");
        cfg.grid.range = {r[0], r[1]};
      }
      if (g.contains("values")) {
        cfg.grid.values = g.at("values").get<std::vector<double>>();
        if (!g.contains("kind")) cfg.grid.kind = GridKind::user;
      }
    }

    if (j.contains("pairs")) {
      cfg.pairs.clear();
      for (const auto& p : j.at("pairs")) {
        auto v = p.get<std::vector<int>>();
        if (v.size() != 2) throw ConfigError("each pair must be [k, k']");
        cfg.pairs.emplace_back(v[0], v[1]);
      }
    }
    if (j.contains("h")) {
      if (j.at("h").is_array()) {
        cfg.widths = j.at("h").get<std::vector<double>>();
      } else {
        cfg.widths = {j.at("h").get<double>()};
      }
    }

    if (j.contains("bootstrap")) {
      const json& b = j.at("bootstrap");
      if (b.contains("scheme")) {
        cfg.bootstrap.scheme = analysis_detail::parse_scheme(b.at("scheme").get<std::string>());
      }
      if (b.contains("replicates")) cfg.bootstrap.replicates = b.at("replicates").get<int>();
      if (b.contains("ci_level")) cfg.bootstrap.ci_level = b.at("ci_level").get<double>();
      if (b.contains("ci")) cfg.bootstrap.ci_kind = analysis_detail::parse_ci(b.at("ci").get<std::string>());
      if (b.contains("replicate_formula")) {
        cfg.bootstrap.formula =
            analysis_detail::parse_formula(b.at("replicate_formula").get<std::string>());
      }
      if (b.contains("normalize_by_weighted_counts")) {
        cfg.bootstrap.normalize_by_weighted_counts =
            b.at("normalize_by_weighted_counts").get<bool>();
      }
    }
    if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("monotonize")) cfg.monotonize = j.at("monotonize").get<bool>();
    if (j.contains("output_dir")) cfg.output_dir = j.at("output_dir").get<std::string>();
    if (j.contains("threads")) cfg.threads = j.at("threads").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  return cfg;
}

inline AnalysisConfig load_analysis_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return parse_analysis_config(j);
}

struct LoadedData {
  Dataset data;
  std::vector<std::pair<std::string, int>> treatment_mapping;  // label -> arm
};

/// Reads a CSV with a header row, extracts the declared columns, and maps
/// treatment labels onto 0..K-1 by sorted distinct value (numeric order when
/// every label parses as a number, lexicographic otherwise).
inline LoadedData load_csv(const std::string& path, const ColumnRoles& roles,
                           const std::string& outcome_unit = "") {
  CsvTable table = read_csv_file(path);
  if (table.rows.empty()) throw DataError("EmptyFile: '" + path + "' has no data rows");

  std::size_t y_col = table.column(roles.outcome);
  std::size_t w_col = table.column(roles.treatment);
  std::vector<std::size_t> x_cols;
  for (const auto& name : roles.covariates) x_cols.push_back(table.column(name));

  const std::size_t n = table.rows.size();
  Eigen::VectorXd y(static_cast<Eigen::Index>(n));
  Eigen::MatrixXd x(static_cast<Eigen::Index>(n),
                    static_cast<Eigen::Index>(x_cols.size()));
  std::vector<std::string> labels(n);
  for (std::size_t r = 0; r < n; ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size()) {
      throw DataError("ParseError: row " + std::to_string(r + 1) + " has " +
                      std::to_string(row.size()) + " fields, header has " +
                      std::to_string(table.header.size()));
    }
    y[static_cast<Eigen::Index>(r)] = parse_numeric(row[y_col], r + 1, roles.outcome);
    for (std::size_t c = 0; c < x_cols.size(); ++c) {
      x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) =
          parse_numeric(row[x_cols[c]], r + 1, roles.covariates[c]);
    }
    labels[r] = row[w_col];
  }

  std::vector<std::string> distinct = labels;
  std::sort(distinct.begin(), distinct.end());
  distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
  bool all_numeric = true;
  std::vector<double> numeric(distinct.size());
  for (std::size_t i = 0; i < distinct.size(); ++i) {
    try {
      std::size_t used = 0;
      numeric[i] = std::stod(distinct[i], &used);
      if (used != distinct[i].size()) all_numeric = false;
    } catch (const std::exception&) {
      all_numeric = false;
    }
  }
  if (all_numeric) {
    std::vector<std::size_t> order(distinct.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return numeric[a] < numeric[b]; });
    std::vector<std::string> reordered(distinct.size());
    for (std::size_t i = 0; i < order.size(); ++i) reordered[i] = distinct[order[i]];
    distinct = std::move(reordered);
  }

  LoadedData out;
  std::vector<int> w(n);
  for (std::size_t i = 0; i < distinct.size(); ++i) {
    out.treatment_mapping.emplace_back(distinct[i], static_cast<int>(i));
  }
  for (std::size_t r = 0; r < n; ++r) {
    auto it = std::lower_bound(distinct.begin(), distinct.end(), labels[r],
                               [&](const std::string& a, const std::string& b) {
                                 if (all_numeric) {
                                   return std::stod(a) < std::stod(b);
                                 }
                                 return a < b;
                               });
    w[r] = static_cast<int>(it - distinct.begin());
  }
  out.data = validate_dataset(std::move(y), std::move(w), std::move(x),
                              static_cast<int>(distinct.size()), outcome_unit);
  return out;
}

/// One named effect curve with inference for both estimators.
struct EffectResult {
  std::string name;
  EffectKind kind = EffectKind::dte;
  double h = 0.0;
  int k = 1;
  int k_other = 0;
  bool monotonized = false;
  InferenceResult simple;
  InferenceResult adjusted;
};

struct AnalysisOutput {
  AnalysisConfig config;
  std::vector<EffectResult> results;
  nlohmann::json diagnostics;
};

/// End-to-end pipeline: load -> design -> grid -> fit -> curves -> bootstrap.
/// Emits inference for the simple and the regression-adjusted estimator so
/// SE-ratio reporting never needs a second run.
inline AnalysisOutput run_analysis(const AnalysisConfig& config) {
  config.validate();
  LoadedData loaded = load_csv(config.data_path, config.columns, config.outcome_unit);
  const Dataset& data = loaded.data;

  TransformSpec transform = config.transform;
  DesignMatrix design = build_design_matrix(data, transform, config.columns.covariates);
  ThresholdGrid grid = make_threshold_grid(data, config.grid);

  SolverOptions solver;
  solver.threads = config.threads;
  DrFit fit = fit_all(data, design, grid, config.link, solver);

  int converged = 0, degenerate = 0, ridge = 0, failed = 0;
  for (const auto& arm : fit.diagnostics) {
    for (const auto& cell : arm) {
      if (cell.degenerate) ++degenerate;
      else if (cell.converged) ++converged;
      else ++failed;
      if (cell.ridge_used) ++ridge;
    }
  }
  Eigen::MatrixXd balance = balance_residual(fit, data, design);

  BootstrapConfig boot = config.bootstrap;
  boot.seed = *config.seed;
  boot.threads = config.threads;

  AnalysisOutput out;
  out.config = config;

  nlohmann::json diag;
  diag["n"] = data.n();
  diag["arms"] = data.arms();
  nlohmann::json arm_counts = nlohmann::json::array();
  for (auto c : data.arm_counts) arm_counts.push_back(c);
  diag["arm_counts"] = arm_counts;
  nlohmann::json mapping = nlohmann::json::object();
  for (const auto& [label, arm] : loaded.treatment_mapping) mapping[label] = arm;
  diag["treatment_mapping"] = mapping;
  diag["link"] = link_name(config.link);
  diag["grid_size"] = grid.size();
  diag["grid_kind"] = grid.kind == GridKind::discrete_support ? "discrete-support"
                      : grid.kind == GridKind::quantile       ? "quantile"
                                                              : "user";
  diag["fit"] = {{"cells", converged + degenerate + failed},
                 {"converged", converged},
                 {"degenerate", degenerate},
                 {"not_converged", failed},
                 {"ridge_used", ridge},
                 {"max_abs_balance_residual", balance.cwiseAbs().maxCoeff()}};
  nlohmann::json warn = nlohmann::json::array();
  for (const auto& w : design.warnings) warn.push_back(w);
  for (const auto& w : grid.warnings) warn.push_back(w);

  auto pair_name = [](int k, int k2) {
    return std::to_string(k) + "_vs_" + std::to_string(k2);
  };

  nlohmann::json ates = nlohmann::json::object();
  for (auto [k, k2] : config.pairs) {
    if (k < 0 || k >= data.arms() || k2 < 0 || k2 >= data.arms()) {
      throw ConfigError("pair (" + std::to_string(k) + ", " + std::to_string(k2) +
                        ") references a missing arm; the data has " +
                        std::to_string(data.arms()) + " arms");
    }
    ates[pair_name(k, k2)] = ate(data, k, k2);
    ReplicateEngine engine(fit, data, design, k, k2);

    auto emit = [&](EffectKind kind, double h, bool monotonize,
                    const std::string& name) {
      EffectResult res;
      res.name = name;
      res.kind = kind;
      res.h = h;
      res.k = k;
      res.k_other = k2;
      res.monotonized = monotonize;
      res.simple = bootstrap_effect(engine, kind, h, Adjustment::simple, boot,
                                    monotonize);
      res.adjusted = bootstrap_effect(engine, kind, h,
                                      Adjustment::regression_adjusted, boot,
                                      monotonize);
      for (const auto& w : res.adjusted.warnings) warn.push_back(w);
      out.results.push_back(std::move(res));
    };

    std::string base = "dte_" + pair_name(k, k2);
    emit(EffectKind::dte, 0.0, config.monotonize, base);
    if (config.monotonize) emit(EffectKind::dte, 0.0, false, base + "_raw");
    for (double h : config.widths) {
      std::string pname =
          "pte_" + pair_name(k, k2) + "_h" + analysis_detail::short_number(h);
      emit(EffectKind::pte, h, config.monotonize, pname);
      if (config.monotonize) emit(EffectKind::pte, h, false, pname + "_raw");
    }
  }
  diag["ate"] = ates;
  diag["warnings"] = warn;
  out.diagnostics = diag;
  return out;
}

inline nlohmann::json config_echo(const AnalysisConfig& config) {
  nlohmann::json j;
  j["data"] = config.data_path;
  j["columns"] = {{"outcome", config.columns.outcome},
                  {"treatment", config.columns.treatment},
                  {"covariates", config.columns.covariates}};
  j["link"] = link_name(config.link);
  j["monotonize"] = config.monotonize;
  j["seed"] = config.seed.has_value() ? nlohmann::json(*config.seed)
                                      : nlohmann::json(nullptr);
  j["bootstrap"] = {
      {"scheme", config.bootstrap.scheme == WeightScheme::multinomial
                     ? "multinomial" : "bayesian"},
      {"replicates", config.bootstrap.replicates},
      {"ci_level", config.bootstrap.ci_level},
      {"ci", config.bootstrap.ci_kind == CiKind::normal_se ? "normal" : "percentile"},
      {"replicate_formula",
       config.bootstrap.formula == ReplicateFormula::augmented ? "augmented"
                                                               : "plugin"}};
  nlohmann::json pairs = nlohmann::json::array();
  for (auto [k, k2] : config.pairs) pairs.push_back({k, k2});
  j["pairs"] = pairs;
  j["h"] = config.widths;
  j["output_dir"] = config.output_dir;
  return j;
}

/// Writes <name>.csv, <name>.json and <name>.svg for every result.
inline std::vector<std::string> emit_outputs(const AnalysisOutput& output,
                                             const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("IoError: cannot create output directory '" + dir + "'");

  std::vector<std::string> written;
  for (const EffectResult& res : output.results) {
    const std::string kind_name = res.kind == EffectKind::dte ? "dte" : "pte";
    const std::string h_field =
        res.kind == EffectKind::pte ? analysis_detail::short_number(res.h) : "";

    // CSV: both estimators, full precision
    std::vector<std::vector<std::string>> rows;
    auto add_rows = [&](const InferenceResult& inf, const std::string& est) {
      for (std::size_t j = 0; j < inf.point.values.size(); ++j) {
        rows.push_back({format_double(inf.point.grid.values[j]),
                        format_double(inf.point.values[j]),
                        format_double(inf.se[j]), format_double(inf.ci_lo[j]),
                        format_double(inf.ci_hi[j]), est, kind_name, h_field});
      }
    };
    add_rows(res.simple, "simple");
    add_rows(res.adjusted, "adjusted");
    std::string csv_path = (fs::path(dir) / (res.name + ".csv")).string();
    write_csv_file(csv_path,
                   {"y", "estimate", "se", "ci_lo", "ci_hi", "estimator", "kind", "h"},
                   rows);
    written.push_back(csv_path);

    // JSON: estimates plus config echo and diagnostics
    nlohmann::json j;
    j["name"] = res.name;
    j["kind"] = kind_name;
    if (res.kind == EffectKind::pte) j["h"] = res.h;
    j["pair"] = {res.k, res.k_other};
    j["monotonized"] = res.monotonized;
    j["thresholds"] = res.simple.point.grid.values;
    auto estimator_json = [&](const InferenceResult& inf) {
      nlohmann::json e;
      e["estimate"] = inf.point.values;
      e["se"] = inf.se;
      e["ci_lo"] = inf.ci_lo;
      e["ci_hi"] = inf.ci_hi;
      return e;
    };
    j["simple"] = estimator_json(res.simple);
    j["adjusted"] = estimator_json(res.adjusted);
    j["config"] = config_echo(output.config);
    j["diagnostics"] = output.diagnostics;
    std::string json_path = (fs::path(dir) / (res.name + ".json")).string();
    {
      std::ofstream jout(json_path);
      if (!jout) throw DataError("IoError: cannot open '" + json_path + "'");
      jout << j.dump(2) << '\n';
    }
    written.push_back(json_path);

    // SVG: simple in grey, adjusted in blue, shaded pointwise bands
    std::vector<CurveBand> bands(2);
    bands[0].label = "simple";
    bands[0].color = "#777777";
    bands[0].x = res.simple.point.grid.values;
    bands[0].estimate = res.simple.point.values;
    bands[0].lo = res.simple.ci_lo;
    bands[0].hi = res.simple.ci_hi;
    bands[1].label = "adjusted (" + link_name(output.config.link) + ")";
    bands[1].color = "#1f6fb4";
    bands[1].x = res.adjusted.point.grid.values;
    bands[1].estimate = res.adjusted.point.values;
    bands[1].lo = res.adjusted.ci_lo;
    bands[1].hi = res.adjusted.ci_hi;
    std::string svg_path = (fs::path(dir) / (res.name + ".svg")).string();
    std::string unit = output.config.outcome_unit.empty()
                           ? std::string("outcome threshold")
                           : "outcome threshold (" + output.config.outcome_unit + ")";
    write_svg_plot(svg_path, res.name, unit, bands);
    written.push_back(svg_path);
  }
  return written;
}

}  // namespace dtreg

#endif  // DTREG_ANALYSIS_HPP
