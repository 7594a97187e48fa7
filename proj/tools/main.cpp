#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "commands.hpp"

namespace {

using msegpd::cli::Config;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> workers;
  std::optional<std::string> out;
};

void add_common(CLI::App* sub, Common& c) {
  sub->add_option("--config", c.config, "Config file (INI sections [data] [model] [fit] [bootstrap] [idf] [simulate])");
  sub->add_option("--seed", c.seed, "Random seed for this command");
  sub->add_option("--workers", c.workers, "Worker threads for replicate loops");
  sub->add_option("--out", c.out, "Output path for this command");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multiscale compound Poisson-EGPD rainfall model: fit, bootstrap, IDF, QQ, simulation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", msegpd::cli::kToolVersion);

  Common common;
  std::optional<std::string> input, fit_path, boot_path, durations, periods, rates;
  std::optional<std::size_t> p, q, replicates, months, recovery;
  std::optional<double> block_days, level;
  bool bands = false;

  auto* fit = app.add_subcommand("fit", "Fit the multiscale model to a series");
  add_common(fit, common);
  fit->add_option("--input", input, "Input series (overrides data.input)");
  fit->add_option("--p", p, "Degree of log sigma_d in ln d");
  fit->add_option("--q", q, "Degree of log lambda_d in ln d");

  auto* boot = app.add_subcommand("bootstrap", "Block bootstrap replicates of the fit");
  add_common(boot, common);
  boot->add_option("--input", input, "Input series (overrides data.input)");
  boot->add_option("-B,--replicates", replicates, "Number of bootstrap replicates");
  boot->add_option("--block-days", block_days, "Block length in days");

  auto* idf = app.add_subcommand("idf", "Intensity-duration-frequency table from a fit file");
  add_common(idf, common);
  idf->add_option("--fit", fit_path, "Fit file (overrides idf.fit)");
  idf->add_option("--bootstrap", boot_path, "Bootstrap replicate file for bands");
  idf->add_flag("--bands", bands, "Add bootstrap bands");
  idf->add_option("--level", level, "Band level");
  idf->add_option("--durations", durations, "Comma separated durations in base steps, or 'standard'");
  idf->add_option("--periods", periods, "Comma separated return periods in months");
  idf->add_option("--rates", rates, "Wet windows per month: observed (from the fit file) or model");

  auto* sim = app.add_subcommand("simulate", "Synthetic base-scale series from the compound model");
  add_common(sim, common);
  sim->add_option("--months", months, "Months to simulate");
  sim->add_option("--recovery", recovery, "Also run a recovery study with this many replicates");

  auto* qq = app.add_subcommand("qq", "Quantile-quantile pairs of fitted model against data");
  add_common(qq, common);
  qq->add_option("--input", input, "Input series (overrides data.input)");
  qq->add_option("--fit", fit_path, "Fit file (overrides idf.fit)");
  qq->add_option("--durations", durations, "Comma separated durations in base steps");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : msegpd::cli::kUsageError;
  }

  using namespace msegpd::cli;
  return guarded([&]() -> int {
    Config c = common.config.empty() ? Config{} : load_config(common.config);
    if (common.workers) c.workers = *common.workers;
    if (input) c.data.input = *input;
    if (fit_path) c.idf.fit = *fit_path;
    if (boot_path) c.idf.bootstrap = *boot_path;
    if (bands) c.idf.bands = true;
    if (level) c.idf.level = *level;
    if (p) c.model.p = *p;
    if (q) c.model.q = *q;

    if (*fit) {
      if (common.seed) c.fit.seed = *common.seed;
      if (common.out) c.fit.output = *common.out;
      return cmd_fit(c);
    }
    if (*boot) {
      if (common.seed) c.bootstrap.seed = *common.seed;
      if (common.out) c.bootstrap.output = *common.out;
      if (replicates) c.bootstrap.replicates = *replicates;
      if (block_days) c.bootstrap.block_days = *block_days;
      return cmd_bootstrap(c);
    }
    if (*idf) {
      if (common.out) c.idf.output = *common.out;
      if (durations) c.idf.durations = detail::parse_durations(*durations, "--durations");
      if (rates) c.idf.rates = *rates;
      if (periods) c.idf.periods = detail::parse_list<double>(*periods, "--periods");
      return cmd_idf(c);
    }
    if (*sim) {
      if (common.seed) c.simulate.seed = *common.seed;
      if (common.out) c.simulate.output = *common.out;
      if (months) c.simulate.months = *months;
      if (recovery) c.simulate.recovery_replicates = *recovery;
      return cmd_simulate(c);
    }
    if (common.out) c.idf.qq_output = *common.out;
    if (durations) c.idf.qq_durations = detail::parse_durations(*durations, "--durations");
    return cmd_qq(c);
  });
}
