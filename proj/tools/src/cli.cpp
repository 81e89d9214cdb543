#include "erlangmix_cli/cli.hpp"

#include <iostream>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "erlangmix/errors.hpp"
#include "erlangmix_cli/commands.hpp"
#include "erlangmix_cli/config.hpp"

#ifndef ERLANGMIX_VERSION
#define ERLANGMIX_VERSION "0.0.0"
#endif

namespace erlangmix::cli {

namespace {

// Flags shared by simulate and fit. Unset optionals leave the preset/config
// value alone.
struct RunFlags {
  std::string config;
  std::string preset;
  std::optional<std::uint64_t> seed;
  std::optional<int> iterations;
  std::optional<double> burn_in;
  std::optional<int> thin;
  std::optional<double> grid_max;
  std::optional<std::size_t> grid_points;
  std::optional<int> chains;
  std::optional<std::string> out;
  std::optional<std::string> data;
  std::optional<double> censoring;
  std::vector<double> times;
  std::optional<double> level;
  std::optional<std::string> control_label;
  std::optional<std::string> treatment_label;
};

void add_run_flags(CLI::App* app, RunFlags& f, bool fit) {
  app->add_option("--config", f.config, "JSON configuration file");
  app->add_option("--preset", f.preset, "example1, example2, example3, liver or lung");
  app->add_option("--seed", f.seed, "Master seed");
  app->add_option("--grid-max", f.grid_max, "Upper end of the evaluation grid");
  app->add_option("--grid-points", f.grid_points, "Number of grid points");
  app->add_option("--out", f.out, "Output directory");
  app->add_option("--censoring", f.censoring, "Target censoring fraction for every generator");
  if (!fit) return;
  app->add_option("--iterations", f.iterations, "MCMC iterations");
  app->add_option("--burn-in", f.burn_in, "Burn-in fraction of the iterations");
  app->add_option("--thin", f.thin, "Thinning interval");
  app->add_option("--chains", f.chains, "Independent chains run concurrently");
  app->add_option("--data", f.data, "CSV file with time,status[,group]");
  app->add_option("--times", f.times, "Contrast time points (ddp)")->delimiter(',');
  app->add_option("--level", f.level, "Credible level of the bands");
  app->add_option("--control-label", f.control_label, "CSV label of the control group");
  app->add_option("--treatment-label", f.treatment_label, "CSV label of the treatment group");
}

RunConfig resolve(const RunFlags& f) {
  RunConfig c;
  if (!f.preset.empty()) c = run_preset(f.preset);
  if (!f.config.empty()) c = run_config_from_json(read_json_file(f.config), c);
  if (f.seed) c.seed = *f.seed;
  if (f.iterations) c.schedule.iterations = *f.iterations;
  if (f.burn_in) c.schedule.burn_in_fraction = *f.burn_in;
  if (f.thin) c.schedule.thin = *f.thin;
  if (f.grid_max) c.grid.max = *f.grid_max;
  if (f.grid_points) c.grid.points = *f.grid_points;
  if (f.chains) c.chains = *f.chains;
  if (f.out) c.output = *f.out;
  if (f.data) c.data_csv = *f.data;
  if (f.censoring) {
    for (auto& g : c.generators) g.censoring_target = *f.censoring;
  }
  if (!f.times.empty()) c.contrast_times = f.times;
  if (f.level) c.level = *f.level;
  if (f.control_label) c.csv.control_label = *f.control_label;
  if (f.treatment_label) c.csv.treatment_label = *f.treatment_label;
  return c;
}

int exit_code_for(const std::exception_ptr& e, std::ostream& err) {
  try {
    std::rethrow_exception(e);
  } catch (const ConfigError& x) {
    err << "configuration error: " << x.what() << '\n';
    return 2;
  } catch (const std::domain_error& x) {
    err << "configuration error: " << x.what() << '\n';
    return 2;
  } catch (const DataError& x) {
    err << "data error: " << x.what() << '\n';
    return 3;
  } catch (const NumericError& x) {
    err << "numeric failure: " << x.what() << '\n';
    return 4;
  } catch (const std::exception& x) {
    err << "error: " << x.what() << '\n';
    return 4;
  }
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Erlang mixture survival models with Dirichlet process priors"};
  app.require_subcommand(1);
  app.set_version_flag("--version", ERLANGMIX_VERSION);

  RunFlags sim_flags;
  auto* sim = app.add_subcommand("simulate", "Generate a synthetic dataset and its true curves");
  add_run_flags(sim, sim_flags, false);

  RunFlags fit_flags;
  auto* fit = app.add_subcommand("fit", "Run the MCMC and write traces, summaries and diagnostics");
  add_run_flags(fit, fit_flags, true);

  std::string prior_config;
  std::string prior_preset_name;
  std::optional<std::uint64_t> prior_seed;
  std::optional<std::size_t> prior_count;
  std::optional<double> prior_grid_max;
  std::optional<std::size_t> prior_grid_points;
  std::optional<std::string> prior_out;
  auto* prior = app.add_subcommand("prior-sim", "Draw prior realizations of the mixture weights");
  prior->add_option("--config", prior_config, "JSON configuration file");
  prior->add_option("--preset", prior_preset_name, "fig1 or fig2");
  prior->add_option("--seed", prior_seed, "Seed");
  prior->add_option("--count", prior_count, "Realizations per setting");
  prior->add_option("--grid-max", prior_grid_max, "Upper end of the density grid");
  prior->add_option("--grid-points", prior_grid_points, "Number of grid points");
  prior->add_option("--out", prior_out, "Output directory");

  SummarizeOptions sum_opts;
  std::optional<std::string> sum_out;
  std::optional<double> sum_grid_max;
  auto* summarize = app.add_subcommand("summarize", "Re-summarize stored weight draws on a new grid");
  summarize->add_option("--in", sum_opts.input, "Directory of a finished fit")->required();
  summarize->add_option("--out", sum_out, "Output directory (default <in>/resummary)");
  summarize->add_option("--grid-max", sum_grid_max, "Upper end of the grid (default: the fit's)");
  summarize->add_option("--grid-points", sum_opts.grid.points, "Number of grid points");
  summarize->add_option("--level", sum_opts.level, "Credible level of the bands");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*sim) {
      cmd_simulate(resolve(sim_flags));
    } else if (*fit) {
      cmd_fit(resolve(fit_flags));
    } else if (*prior) {
      PriorSimConfig c;
      if (!prior_preset_name.empty()) c = prior_preset(prior_preset_name);
      if (!prior_config.empty()) c = prior_config_from_json(read_json_file(prior_config), c);
      if (prior_seed) c.seed = *prior_seed;
      if (prior_count) c.count = *prior_count;
      if (prior_grid_max) c.grid.max = *prior_grid_max;
      if (prior_grid_points) c.grid.points = *prior_grid_points;
      if (prior_out) c.output = *prior_out;
      cmd_prior_sim(c);
    } else if (*summarize) {
      sum_opts.output = sum_out ? std::filesystem::path(*sum_out) : sum_opts.input / "resummary";
      sum_opts.grid.max = sum_grid_max;
      cmd_summarize(sum_opts);
    }
  } catch (...) {
    return exit_code_for(std::current_exception(), std::cerr);
  }
  return 0;
}

}  // namespace erlangmix::cli
