#include "lenscat/harness.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Lens data and sojourn times of compactly supported time-dependent metrics"};
  app.set_version_flag("--version", lenscat::kVersion);
  app.require_subcommand(1);

  lenscat::ExperimentConfig cfg;
  std::string config_file;
  bool dump_config = false;
  double smax = 0.0, lmax = 0.0;
  std::string format;

  for (const char* name : {"scatter", "sojourn", "compare", "check", "pullback"}) {
    CLI::App* sub = app.add_subcommand(name);
    sub->add_option("--config", config_file, "experiment config JSON; flags override it");
    sub->add_flag("--dump-config", dump_config, "print the effective config and exit");
    sub->add_option("--metric", cfg.metric, "metric spec file");
    sub->add_option("--metric2", cfg.metric2, "second metric spec file");
    sub->add_option("--diffeo", cfg.diffeo, "diffeomorphism spec file");
    sub->add_option("--f", cfg.f, "convex function spec file (default |z|^2)");
    sub->add_option("--rays", cfg.rays, "number of samples");
    sub->add_option("--seed", cfg.seed, "RNG seed");
    sub->add_option("--tol", cfg.tol, "equivalence tolerance");
    sub->add_option("--smax", smax, "arc length for the sojourn limit (default 100 R)");
    sub->add_option("--lmax", lmax, "trapping cap on interior length (default 50 R)");
    sub->add_option("--workers", cfg.workers, "worker threads (default LENSCAT_WORKERS or all cores)");
    sub->add_option("--out", cfg.out, "output file");
    sub->add_option("--format", format, "csv or json")->check(CLI::IsMember({"csv", "json"}));
    sub->add_flag("--strict", cfg.strict, "exit 4 when any ray is trapped");
    sub->add_option("--grid-step", cfg.grid_step, "pullback tabulation step in units of R");
    sub->add_option("--time-samples", cfg.time_samples, "pullback tabulation time nodes");
    sub->add_option("--probes", cfg.probes, "pullback reload probe points");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(lenscat::ExitCode::ConfigError);
  }

  CLI::App* sub = app.get_subcommands().front();
  if (!config_file.empty()) {
    try {
      lenscat::ExperimentConfig base = lenscat::ExperimentConfig::from_json(lenscat::detail::read_json_file(config_file));
      auto given = [&](const char* flag) { return sub->count(flag) > 0; };
      if (given("--metric")) base.metric = cfg.metric;
      if (given("--metric2")) base.metric2 = cfg.metric2;
      if (given("--diffeo")) base.diffeo = cfg.diffeo;
      if (given("--f")) base.f = cfg.f;
      if (given("--rays")) base.rays = cfg.rays;
      if (given("--seed")) base.seed = cfg.seed;
      if (given("--tol")) base.tol = cfg.tol;
      if (given("--workers")) base.workers = cfg.workers;
      if (given("--out")) base.out = cfg.out;
      if (given("--strict")) base.strict = cfg.strict;
      if (given("--grid-step")) base.grid_step = cfg.grid_step;
      if (given("--time-samples")) base.time_samples = cfg.time_samples;
      if (given("--probes")) base.probes = cfg.probes;
      cfg = base;
    } catch (const lenscat::Error& e) {
      std::cerr << nlohmann::json{{"error", "config"}, {"message", e.what()}}.dump() << '\n';
      return static_cast<int>(lenscat::ExitCode::ConfigError);
    }
  }
  cfg.command = sub->get_name();
  if (sub->count("--smax")) cfg.smax = smax;
  if (sub->count("--lmax")) cfg.lmax = lmax;
  if (sub->count("--format")) cfg.format = format;

  if (dump_config) {
    std::cout << cfg.to_json().dump(2) << '\n';
    return 0;
  }
  return lenscat::run(cfg);
}
