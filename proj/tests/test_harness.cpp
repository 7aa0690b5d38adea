#include "common.hpp"

#include <gtest/gtest.h>

#include <cstdlib>

using namespace lenscat;
using namespace testing_util;

namespace {

struct Outcome {
  int code;
  std::string log, err;
};

Outcome run_cfg(const ExperimentConfig& cfg) {
  std::ostringstream log, err;
  const int code = run(cfg, log, err);
  return {code, log.str(), err.str()};
}

ExperimentConfig make(const std::string& command, const std::string& metric) {
  ExperimentConfig c;
  c.command = command;
  c.metric = metric.empty() ? "" : config(metric);
  c.workers = 2;
  return c;
}

std::vector<std::string> lines(const std::string& text) {
  std::vector<std::string> out;
  std::istringstream in(text);
  for (std::string line; std::getline(in, line);) out.push_back(line);
  return out;
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::istringstream in(s);
  for (std::string cell; std::getline(in, cell, ',');) out.push_back(cell);
  return out;
}

int cli(const std::string& args, const std::string& out_file, const std::string& env = "") {
  const std::string cmd = env + " " + std::string(LENSCAT_CLI) + " " + args + " > " + out_file + " 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST(ExperimentConfig, JsonRoundTrip) {
  ExperimentConfig c = make("compare", "bump.json");
  c.diffeo = config("shear.json");
  c.rays = 17;
  c.seed = 123456789012345ULL;
  c.tol = 3e-6;
  c.smax = 450.0;
  c.format = "csv";
  c.strict = true;
  c.out = "x.csv";
  c.grid_step = 0.02;
  EXPECT_EQ(ExperimentConfig::from_json(c.to_json()), c);
  EXPECT_EQ(ExperimentConfig::from_json(nlohmann::json::parse(c.to_json().dump())), c);
  const ExperimentConfig d;
  EXPECT_EQ(ExperimentConfig::from_json(d.to_json()), d);
  EXPECT_EQ(ExperimentConfig::from_json(nlohmann::json::object()), d);
  EXPECT_THROW(ExperimentConfig::from_json({{"rays", "many"}}), ConfigError);
}

TEST(ExperimentConfig, HashIgnoresWorkersAndOutput) {
  ExperimentConfig a = make("scatter", "bump.json");
  ExperimentConfig b = a;
  b.workers = 8;
  b.out = "elsewhere.csv";
  EXPECT_EQ(a.hash(), b.hash());
  b.seed = 1;
  EXPECT_NE(a.hash(), b.hash());
  b = a;
  b.smax = 300.0;
  EXPECT_NE(a.hash(), b.hash());
}

TEST(ExperimentConfig, Validation) {
  EXPECT_NO_THROW(make("scatter", "flat.json").validate());
  ExperimentConfig c = make("scatter", "flat.json");
  c.command = "render";
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(make("scatter", "").validate(), ConfigError);
  c = make("scatter", "flat.json");
  c.rays = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = make("scatter", "flat.json");
  c.tol = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = make("scatter", "flat.json");
  c.smax = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = make("scatter", "flat.json");
  c.format = "xml";
  EXPECT_THROW(c.validate(), ConfigError);
  c = make("compare", "flat.json");
  EXPECT_THROW(c.validate(), ConfigError);
  c.metric2 = config("flat.json");
  c.diffeo = config("shear.json");
  EXPECT_THROW(c.validate(), ConfigError);
  c = make("pullback", "flat.json");
  c.diffeo = config("shear.json");
  EXPECT_THROW(c.validate(), ConfigError);
}

TEST(ExperimentConfig, EffectiveFormat) {
  EXPECT_EQ(make("scatter", "flat.json").effective_format(), "csv");
  EXPECT_EQ(make("sojourn", "flat.json").effective_format(), "csv");
  EXPECT_EQ(make("compare", "flat.json").effective_format(), "json");
  EXPECT_EQ(make("check", "flat.json").effective_format(), "json");
}

TEST(Workers, EnvironmentDefault) {
  ::setenv("LENSCAT_WORKERS", "3", 1);
  EXPECT_EQ(default_workers(), 3);
  ExperimentConfig c;
  EXPECT_EQ(c.effective_workers(), 3);
  c.workers = 5;
  EXPECT_EQ(c.effective_workers(), 5);
  ::setenv("LENSCAT_WORKERS", "zero", 1);
  EXPECT_GE(default_workers(), 1);
  ::unsetenv("LENSCAT_WORKERS");
  EXPECT_GE(default_workers(), 1);
}

TEST(RunScatter, FlatSweep) {
  TempDir dir("scatter");
  ExperimentConfig c = make("scatter", "flat.json");
  c.rays = 100;
  c.out = dir.file("lens.csv");
  const Outcome r = run_cfg(c);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(slurp(c.out));
  ASSERT_EQ(rows.size(), 102u);
  std::ostringstream header;
  write_lens_csv_header(header, 2);
  const std::string columns = lines(header.str())[0];
  EXPECT_EQ(rows[0], "# lenscat 0.1.0 config=" + detail::hex64(c.hash()) + " columns=" + columns);
  EXPECT_EQ(rows[1], columns);
  const auto names = split(columns);
  const auto col = std::find(names.begin(), names.end(), "sojourn") - names.begin();
  const auto len = std::find(names.begin(), names.end(), "length") - names.begin();
  ASSERT_LT(col, static_cast<long>(names.size()));
  ASSERT_LT(len, static_cast<long>(names.size()));
  double longest = 0.0;
  for (std::size_t i = 2; i < rows.size(); ++i) {
    const auto cells = split(rows[i]);
    ASSERT_EQ(cells.size(), names.size());
    EXPECT_LE(std::abs(std::stod(cells[col])), 1e-10) << rows[i];
    longest = std::max(longest, std::stod(cells[len]));
  }
  const auto summary = nlohmann::json::parse(r.log);
  EXPECT_EQ(summary["rays"], 100);
  EXPECT_EQ(summary["trapped"], 0);
  EXPECT_EQ(summary["max_length"].get<double>(), longest);
  EXPECT_LE(longest, 2.0 * kR + 1e-9);
}

TEST(RunScatter, IdenticalAcrossRunsAndWorkers) {
  TempDir dir("determinism");
  std::vector<std::string> files;
  for (int workers : {1, 4, 8, 4}) {
    ExperimentConfig c = make("scatter", "bump.json");
    c.rays = 60;
    c.seed = 7;
    c.workers = workers;
    c.out = dir.file("s" + std::to_string(files.size()) + ".csv");
    ASSERT_EQ(run_cfg(c).code, 0);
    files.push_back(slurp(c.out));
  }
  EXPECT_EQ(lines(files[0]).size(), 62u);
  for (const std::string& f : files) EXPECT_EQ(f, files[0]);
}

TEST(RunScatter, JsonFormat) {
  ExperimentConfig c = make("scatter", "flat.json");
  c.rays = 5;
  c.format = "json";
  const Outcome r = run_cfg(c);
  ASSERT_EQ(r.code, 0);
  const auto j = nlohmann::json::parse(r.log);
  EXPECT_EQ(j["version"], kVersion);
  EXPECT_EQ(j["rays"].size(), 5u);
}

TEST(RunScatter, TrappedStrictExitsFour) {
  ExperimentConfig c = make("scatter", "trapping.json");
  c.rays = 20;
  Outcome r = run_cfg(c);
  EXPECT_EQ(r.code, 0);
  c.strict = true;
  r = run_cfg(c);
  ASSERT_EQ(r.code, 4);
  const auto j = nlohmann::json::parse(r.err);
  EXPECT_EQ(j["error"], "trapped");
  ASSERT_FALSE(j["offending"].empty());
  EXPECT_TRUE(j["offending"][0].contains("entry"));
}

TEST(RunSojourn, FlatColumns) {
  ExperimentConfig c = make("sojourn", "flat.json");
  c.rays = 3;
  const Outcome r = run_cfg(c);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines(r.log);
  ASSERT_EQ(rows.size(), 5u);
  EXPECT_EQ(rows[1], "t,z_in_1,z_in_2,v_in_1,v_in_2,length,sojourn_closed,sojourn_limit,residual,extrapolated");
  for (std::size_t i = 2; i < rows.size(); ++i) {
    const auto cells = split(rows[i]);
    EXPECT_LE(std::abs(std::stod(cells[6])), 1e-10);
    EXPECT_LE(std::abs(std::stod(cells[9])), 1e-6);
  }
  c.smax = 5.0 * kR;
  EXPECT_EQ(run_cfg(c).code, 2);
}

TEST(RunCompare, IdenticalInputs) {
  ExperimentConfig c = make("compare", "flat.json");
  c.metric2 = config("flat.json");
  c.rays = 30;
  const Outcome r = run_cfg(c);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.log);
  EXPECT_TRUE(j["equivalent"].get<bool>());
  for (const auto& [key, value] : j["max_discrepancy"].items()) EXPECT_EQ(value.get<double>(), 0.0) << key;
}

TEST(RunCompare, FlatAgainstBumpIsInequivalent) {
  ExperimentConfig c = make("compare", "flat.json");
  c.metric2 = config("bump.json");
  c.rays = 30;
  const Outcome r = run_cfg(c);
  EXPECT_EQ(r.code, 1);
  EXPECT_FALSE(nlohmann::json::parse(r.log)["equivalent"].get<bool>());
}

TEST(RunCompare, BumpAgainstShearPullback) {
  ExperimentConfig c = make("compare", "bump.json");
  c.diffeo = config("shear.json");
  c.rays = 20;
  const Outcome r = run_cfg(c);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(nlohmann::json::parse(r.log)["equivalent"].get<bool>());
}

TEST(RunCompare, CsvListsBothMetrics) {
  TempDir dir("compare");
  ExperimentConfig c = make("compare", "flat.json");
  c.metric2 = config("flat.json");
  c.rays = 4;
  c.format = "csv";
  c.out = dir.file("cmp.csv");
  ASSERT_EQ(run_cfg(c).code, 0);
  const auto rows = lines(slurp(c.out));
  ASSERT_EQ(rows.size(), 10u);
  EXPECT_EQ(rows[1].substr(0, 7), "metric,");
  EXPECT_EQ(rows[2].substr(0, 2), "1,");
  EXPECT_EQ(rows[3].substr(0, 2), "2,");
  EXPECT_EQ(rows[2].substr(2), rows[3].substr(2));
}

TEST(RunCheck, FlatPasses) {
  ExperimentConfig c = make("check", "flat.json");
  c.rays = 20;
  const Outcome r = run_cfg(c);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.log);
  EXPECT_TRUE(j["pass"].get<bool>());
  EXPECT_NEAR(j["admissibility"]["min_hessian_eig"].get<double>(), 2.0, 1e-9);
  EXPECT_TRUE(j["non_trapping"]["certificate"].get<bool>());
}

TEST(RunCheck, LinearFunctionFailsConvexity) {
  ExperimentConfig c = make("check", "bump.json");
  c.f = config("linear.json");
  c.rays = 10;
  const Outcome r = run_cfg(c);
  EXPECT_EQ(r.code, 1);
  const auto j = nlohmann::json::parse(r.log);
  EXPECT_FALSE(j["admissibility"]["admissible"].get<bool>());
  EXPECT_FALSE(j["pass"].get<bool>());
}

TEST(RunCheck, BumpReportsGridMinimum) {
  ExperimentConfig c = make("check", "bump.json");
  c.rays = 10;
  const Outcome r = run_cfg(c);
  ASSERT_TRUE(r.code == 0 || r.code == 1) << r.err;
  const auto j = nlohmann::json::parse(r.log);
  const AdmissibilityReport direct =
      admissibility_report(load_metric(config("bump.json")), quadratic_function(2), GridSpec{});
  EXPECT_EQ(j["admissibility"]["min_hessian_eig"].get<double>(), direct.min_hessian_eig);
  EXPECT_EQ(j["pass"].get<bool>(), r.code == 0);
}

TEST(RunPullback, FlatByIdentity) {
  TempDir dir("pullflat");
  ExperimentConfig c = make("pullback", "flat.json");
  c.diffeo = dir.write("id.json", R"({"dim": 2, "R": 3.0, "T": 1.0, "family": "identity"})");
  c.out = dir.file("flat_tab.json");
  c.grid_step = 0.05;
  c.time_samples = 11;
  const Outcome r = run_cfg(c);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_LE(nlohmann::json::parse(r.log)["max_probe_error"].get<double>(), 1e-12);
  const MetricField tab = load_metric(c.out);
  validate_metric(tab);
  Rng rng(3);
  for (int k = 0; k < 50; ++k) {
    const Vec z = kR * std::sqrt(rng.uniform()) * rng.unit_vector(2);
    EXPECT_LE((tab.metric(rng.uniform(-kT, kT), z) - identity(2)).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(RunPullback, BumpByShearReloadsWithinInterpolationError) {
  TempDir dir("pullbump");
  ExperimentConfig c = make("pullback", "bump.json");
  c.diffeo = config("shear.json");
  c.out = dir.file("pb.json");
  c.workers = 1;
  const Outcome r = run_cfg(c);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto j = nlohmann::json::parse(r.log);
  EXPECT_EQ(j["probes"], 100);
  EXPECT_EQ(j["z_grid"][2], 201);
  EXPECT_LE(j["max_probe_error"].get<double>(), 1e-6);

  // The written file is itself a valid metric for the other commands.
  ExperimentConfig s = make("scatter", "");
  s.metric = c.out;
  s.rays = 5;
  EXPECT_EQ(run_cfg(s).code, 0);
}

TEST(ExitCodes, ConfigErrors) {
  ExperimentConfig c = make("scatter", "flat.json");
  c.command = "render";
  Outcome r = run_cfg(c);
  EXPECT_EQ(r.code, 2);
  EXPECT_EQ(nlohmann::json::parse(r.err)["error"], "config");
  EXPECT_EQ(run_cfg(make("scatter", "")).code, 2);
  EXPECT_EQ(run_cfg(make("scatter", "does_not_exist.json")).code, 2);
  TempDir dir("badjson");
  c = make("scatter", "");
  c.metric = dir.write("bad.json", "{ not json");
  EXPECT_EQ(run_cfg(c).code, 2);
  c.metric = dir.write("unknown.json", R"({"dim": 2, "R": 3.0, "T": 1.0, "family": "wormhole"})");
  EXPECT_EQ(run_cfg(c).code, 2);
}

TEST(ExitCodes, MetricValidation) {
  TempDir dir("invalid");
  ExperimentConfig c = make("scatter", "");
  c.metric = dir.write("neg.json", R"({"dim": 2, "R": 3.0, "T": 1.0, "family": "rank_one_bump",
    "params": {"amplitude": -2.0, "center": [0.0, 0.0], "width": 1.0, "direction": [1.0, 0.0]}})");
  const Outcome r = run_cfg(c);
  EXPECT_EQ(r.code, 3);
  EXPECT_EQ(nlohmann::json::parse(r.err)["error"], "metric");
}

TEST(ExitCodes, SupportViolation) {
  TempDir dir("support");
  ExperimentConfig c = make("pullback", "bump.json");
  c.diffeo = config("shear_outside.json");
  c.out = dir.file("never.json");
  Outcome r = run_cfg(c);
  EXPECT_EQ(r.code, 5);
  EXPECT_EQ(nlohmann::json::parse(r.err)["error"], "support");
  EXPECT_FALSE(std::filesystem::exists(c.out));

  c = make("compare", "bump.json");
  c.diffeo = config("shear_outside.json");
  c.rays = 5;
  EXPECT_EQ(run_cfg(c).code, 5);
}

TEST(Cli, ExitCodesAndOutputs) {
  TempDir dir("cli");
  const std::string out = dir.file("stdout.txt");
  const std::string csv = dir.file("lens.csv");
  EXPECT_EQ(cli("scatter --metric " + config("flat.json") + " --rays 10 --workers 2 --out " + csv, out), 0);
  EXPECT_EQ(lines(slurp(csv)).size(), 12u);
  EXPECT_EQ(nlohmann::json::parse(slurp(out))["rays"], 10);

  EXPECT_EQ(cli("", out), 2);
  EXPECT_EQ(cli("render --metric " + config("flat.json"), out), 2);
  EXPECT_EQ(cli("scatter", out), 2);
  EXPECT_EQ(cli("scatter --metric " + config("flat.json") + " --format xml", out), 2);
  EXPECT_EQ(cli("scatter --metric " + config("flat.json") + " --rays abc", out), 2);
  EXPECT_EQ(cli("compare --metric " + config("flat.json") + " --metric2 " + config("bump.json") + " --rays 10", out), 1);
  EXPECT_EQ(cli("scatter --metric " + config("trapping.json") + " --rays 10 --strict", out), 4);
  EXPECT_EQ(cli("compare --metric " + config("bump.json") + " --diffeo " + config("shear_outside.json"), out), 5);
  EXPECT_EQ(cli("--version", out), 0);
  EXPECT_NE(slurp(out).find(kVersion), std::string::npos);
}

TEST(Cli, ConfigFileAndOverrides) {
  TempDir dir("clicfg");
  const std::string out = dir.file("stdout.txt");
  ASSERT_EQ(cli("sojourn --metric " + config("bump.json") + " --rays 7 --seed 11 --smax 600 --format json --dump-config",
                out),
            0);
  const ExperimentConfig dumped = ExperimentConfig::from_json(nlohmann::json::parse(slurp(out)));
  EXPECT_EQ(dumped.command, "sojourn");
  EXPECT_EQ(dumped.rays, 7);
  EXPECT_EQ(dumped.seed, 11u);
  EXPECT_EQ(dumped.smax, 600.0);
  EXPECT_EQ(dumped.format, "json");

  const std::string cfg_file = dir.write("cfg.json", slurp(out));
  ASSERT_EQ(cli("sojourn --config " + cfg_file + " --dump-config", out), 0);
  EXPECT_EQ(ExperimentConfig::from_json(nlohmann::json::parse(slurp(out))), dumped);
  ASSERT_EQ(cli("sojourn --config " + cfg_file + " --rays 3 --dump-config", out), 0);
  ExperimentConfig expected = dumped;
  expected.rays = 3;
  EXPECT_EQ(ExperimentConfig::from_json(nlohmann::json::parse(slurp(out))), expected);

  EXPECT_EQ(cli("scatter --config " + dir.write("broken.json", "[1,"), out), 2);
}

TEST(Cli, WorkersFromEnvironmentDoNotChangeOutput) {
  TempDir dir("cliworkers");
  const std::string out = dir.file("stdout.txt");
  const std::string base = "scatter --metric " + config("bump.json") + " --rays 40 --seed 5 --out ";
  ASSERT_EQ(cli(base + dir.file("a.csv"), out), 0);
  ASSERT_EQ(cli(base + dir.file("b.csv"), out, "LENSCAT_WORKERS=1"), 0);
  ASSERT_EQ(cli(base + dir.file("c.csv"), out, "LENSCAT_WORKERS=6"), 0);
  EXPECT_EQ(slurp(dir.file("a.csv")), slurp(dir.file("b.csv")));
  EXPECT_EQ(slurp(dir.file("a.csv")), slurp(dir.file("c.csv")));
}
