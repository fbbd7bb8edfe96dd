// Command-line front end: analyze user data, run Monte Carlo studies,
// compute oracle truths, and run the built-in invariant suite.

#include <CLI11.hpp>

#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>

#include "dtreg/dte.hpp"

namespace {

int env_threads() {
  const char* env = std::getenv("DTE_THREADS");
  if (env == nullptr) return 0;
  try {
    return std::max(0, std::stoi(env));
  } catch (const std::exception&) {
    return 0;
  }
}

dtreg::DgpId parse_dgp(int id) {
  if (id < 1 || id > 4) throw dtreg::ConfigError("--dgp must be 1, 2, 3 or 4");
  return static_cast<dtreg::DgpId>(id);
}

struct CommonFlags {
  std::optional<std::string> link;
  std::optional<std::string> scheme;
  std::optional<std::string> formula;
  std::optional<std::string> ci;
  int threads = 0;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--link", link, "Link function: logit or linear");
    cmd->add_option("--bootstrap", scheme, "Weight scheme: multinomial or bayesian");
    cmd->add_option("--replicate-formula", formula,
                    "Replicate formula: augmented or plugin");
    cmd->add_option("--ci", ci, "Interval kind: normal or percentile");
    cmd->add_option("--threads", threads,
                    "Worker threads (0 = hardware; env DTE_THREADS)");
  }

  int resolved_threads() const { return threads > 0 ? threads : env_threads(); }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{
      "Distributional and probability treatment effects in randomized "
      "experiments, with distributional-regression adjustment and "
      "exchangeable-bootstrap inference"};
  app.require_subcommand(1);

  // analyze
  auto* analyze = app.add_subcommand("analyze", "Run an analysis from a JSON config");
  std::string config_path;
  std::optional<std::uint64_t> seed_flag;
  std::optional<std::string> output_dir;
  CommonFlags analyze_flags;
  analyze->add_option("--config", config_path, "JSON config file")->required();
  analyze->add_option("--seed", seed_flag, "Bootstrap seed (required here or in config)");
  analyze->add_option("--output-dir", output_dir, "Overrides the config output directory");
  analyze_flags.add_to(analyze);

  // simulate
  auto* simulate = app.add_subcommand("simulate", "Monte Carlo replication study");
  int sim_dgp = 1;
  double sim_pi1 = 0.5;
  Eigen::Index sim_n = 500;
  int sim_reps = 1000;
  int sim_b = 200;
  bool full_profile = false;
  bool noise_covariates = false;
  std::uint64_t sim_seed = 0;
  std::string sim_out;
  CommonFlags sim_flags;
  simulate->add_option("--dgp", sim_dgp, "Data-generating process 1..4")->required();
  simulate->add_option("--pi1", sim_pi1, "Treatment probability");
  simulate->add_option("--n", sim_n, "Sample size per replication")->required();
  simulate->add_option("--reps", sim_reps, "Number of replications");
  simulate->add_option("--boot-reps", sim_b, "Bootstrap replicates per replication");
  simulate->add_flag("--full-profile", full_profile,
                     "Reported-scale profile: 10000 replications, B = 1000");
  simulate->add_flag("--noise-covariates", noise_covariates,
                     "Replace recorded covariates with independent noise");
  simulate->add_option("--seed", sim_seed, "Master seed")->required();
  simulate->add_option("--out", sim_out, "Output CSV path");
  sim_flags.add_to(simulate);

  // oracle
  auto* oracle_cmd = app.add_subcommand("oracle", "Large-sample truth run");
  int oracle_dgp = 1;
  double oracle_pi1 = 0.5;
  Eigen::Index oracle_size = 1000000;
  std::uint64_t oracle_seed = 1;
  std::string oracle_out;
  oracle_cmd->add_option("--dgp", oracle_dgp, "Data-generating process 1..4")->required();
  oracle_cmd->add_option("--pi1", oracle_pi1, "Treatment probability");
  oracle_cmd->add_option("--size", oracle_size, "Oracle sample size");
  oracle_cmd->add_option("--seed", oracle_seed, "Oracle seed");
  oracle_cmd->add_option("--out", oracle_out, "Output CSV path");

  // selftest
  auto* selftest = app.add_subcommand("selftest", "Run the built-in invariant suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    app.exit(e);
    return 2;
  }

  try {
    if (*analyze) {
      dtreg::AnalysisConfig config = dtreg::load_analysis_config(config_path);
      if (seed_flag.has_value()) config.seed = *seed_flag;
      if (output_dir.has_value()) config.output_dir = *output_dir;
      if (analyze_flags.link) config.link = dtreg::parse_link(*analyze_flags.link);
      if (analyze_flags.scheme) {
        config.bootstrap.scheme = dtreg::analysis_detail::parse_scheme(*analyze_flags.scheme);
      }
      if (analyze_flags.formula) {
        config.bootstrap.formula = dtreg::analysis_detail::parse_formula(*analyze_flags.formula);
      }
      if (analyze_flags.ci) {
        config.bootstrap.ci_kind = dtreg::analysis_detail::parse_ci(*analyze_flags.ci);
      }
      if (analyze_flags.resolved_threads() > 0) {
        config.threads = analyze_flags.resolved_threads();
      }
      dtreg::AnalysisOutput output = dtreg::run_analysis(config);
      auto files = dtreg::emit_outputs(output, config.output_dir);
      for (const auto& f : files) std::cout << "wrote " << f << '\n';
      std::cout << "fit: " << output.diagnostics["fit"].dump() << '\n';
      return 0;
    }

    if (*simulate) {
      dtreg::DgpSpec spec;
      spec.id = parse_dgp(sim_dgp);
      spec.pi1 = sim_pi1;
      spec.n = sim_n;
      spec.seed = sim_seed;
      spec.noise_covariates = noise_covariates;

      dtreg::StudyConfig study;
      study.replications = full_profile ? 10000 : sim_reps;
      study.bootstrap.replicates = full_profile ? 1000 : sim_b;
      study.bootstrap.seed = sim_seed;
      study.threads = sim_flags.resolved_threads();
      if (sim_flags.scheme) {
        study.bootstrap.scheme = dtreg::analysis_detail::parse_scheme(*sim_flags.scheme);
      }
      if (sim_flags.formula) {
        study.bootstrap.formula = dtreg::analysis_detail::parse_formula(*sim_flags.formula);
      }
      if (sim_flags.ci) {
        study.bootstrap.ci_kind = dtreg::analysis_detail::parse_ci(*sim_flags.ci);
      }
      if (sim_flags.link) {
        // restrict the adjusted estimator to the requested link
        dtreg::Link link = dtreg::parse_link(*sim_flags.link);
        study.estimators = {dtreg::EstimatorId::simple,
                            link == dtreg::Link::logit
                                ? dtreg::EstimatorId::logit_adjusted
                                : dtreg::EstimatorId::ols_adjusted};
      }

      std::cerr << "oracle truth (10^6 draws)..." << std::endl;
      dtreg::OracleTruth oracle(spec);
      std::cerr << "running " << study.replications << " replications..." << std::endl;
      dtreg::StudyResult result = dtreg::run_study(spec, study, oracle);

      std::string out = sim_out.empty()
                            ? "study_dgp" + std::to_string(sim_dgp) + "_pi" +
                                  dtreg::analysis_detail::short_number(sim_pi1) +
                                  "_n" + std::to_string(sim_n) + ".csv"
                            : sim_out;
      dtreg::write_study_csv(result, out);
      std::cout << "wrote " << out << " (" << result.completed << " replications";
      if (result.failed > 0) std::cout << ", " << result.failed << " failed";
      std::cout << ", " << result.runtime_seconds << " s)\n";
      return 0;
    }

    if (*oracle_cmd) {
      dtreg::DgpSpec spec;
      spec.id = parse_dgp(oracle_dgp);
      spec.pi1 = oracle_pi1;
      spec.n = 1;
      spec.seed = oracle_seed;
      dtreg::OracleTruth oracle(spec, oracle_size);
      std::vector<double> thresholds = oracle.default_thresholds();
      std::vector<std::vector<std::string>> rows;
      for (double y : thresholds) {
        rows.push_back({std::to_string(oracle_dgp), dtreg::format_double(oracle_pi1),
                        dtreg::format_double(y), dtreg::format_double(oracle.cdf(0, y)),
                        dtreg::format_double(oracle.cdf(1, y)),
                        dtreg::format_double(oracle.dte_at(y))});
      }
      std::string out = oracle_out.empty()
                            ? "oracle_dgp" + std::to_string(oracle_dgp) + ".csv"
                            : oracle_out;
      dtreg::write_csv_file(out, {"dgp", "pi1", "y", "f0", "f1", "dte"}, rows);
      std::cout << "wrote " << out << '\n';
      return 0;
    }

    if (*selftest) {
      int failures = dtreg::run_selftest(std::cout);
      return failures == 0 ? 0 : 4;
    }
  } catch (const dtreg::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 4;
  }
  return 0;
}
