#pragma once

// Experiment driver behind the lenscat CLI. Each command reads metric and
// diffeomorphism spec files, runs a sample sweep on a bounded worker pool and
// writes CSV or JSON artifacts. Exit status follows ExitCode.

#include "lenscat/cuspmap.hpp"
#include "lenscat/geometry.hpp"
#include "lenscat/parallel.hpp"
#include "lenscat/pullback.hpp"
#include "lenscat/sampling.hpp"
#include "lenscat/scattering.hpp"
#include "lenscat/spec_io.hpp"
#include "lenscat/tabulated.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace lenscat {

inline constexpr const char* kVersion = "0.1.0";

enum class ExitCode : int {
  Ok = 0,
  Inequivalent = 1,  // also: a certificate failed
  ConfigError = 2,
  MetricInvalid = 3,
  Trapped = 4,
  SupportViolation = 5,
};

struct ExperimentConfig {
  std::string command;
  std::string metric;
  std::string metric2;
  std::string diffeo;
  std::string f;
  int rays = 100;
  std::uint64_t seed = 0;
  double tol = 1e-5;
  std::optional<double> smax;  // default 100 R
  std::optional<double> lmax;  // default 50 R
  int workers = 0;             // 0: LENSCAT_WORKERS or hardware concurrency
  std::string out;
  std::optional<std::string> format;
  bool strict = false;
  // Tabulation used by the pullback command.
  double grid_step = 0.01;  // spatial step in units of R
  int time_samples = 161;
  int probes = 100;

  bool operator==(const ExperimentConfig&) const = default;

  int effective_workers() const { return workers > 0 ? workers : default_workers(); }

  std::string effective_format() const {
    if (format) return *format;
    return command == "scatter" || command == "sojourn" ? "csv" : "json";
  }

  void validate() const {
    static const char* commands[] = {"scatter", "sojourn", "compare", "check", "pullback"};
    if (std::find(std::begin(commands), std::end(commands), command) == std::end(commands))
      throw ConfigError("unknown command '" + command + "'");
    if (metric.empty()) throw ConfigError("--metric is required");
    if (rays < 1) throw ConfigError("--rays must be >= 1");
    if (probes < 1 || time_samples < 2) throw ConfigError("sampling counts must be positive");
    if (!(tol > 0.0)) throw ConfigError("--tol must be positive");
    if (smax && !(*smax > 0.0)) throw ConfigError("--smax must be positive");
    if (lmax && !(*lmax > 0.0)) throw ConfigError("--lmax must be positive");
    if (!(grid_step > 0.0)) throw ConfigError("grid step must be positive");
    if (workers < 0) throw ConfigError("--workers must be >= 0");
    if (format && *format != "csv" && *format != "json") throw ConfigError("--format must be csv or json");
    if (command == "compare" && metric2.empty() == diffeo.empty())
      throw ConfigError("compare needs exactly one of --metric2 and --diffeo");
    if (command == "pullback" && (diffeo.empty() || out.empty()))
      throw ConfigError("pullback needs --diffeo and --out");
  }

  nlohmann::json to_json() const {
    auto opt = [](const auto& o) { return o ? nlohmann::json(*o) : nlohmann::json(nullptr); };
    return {{"command", command}, {"metric", metric},     {"metric2", metric2},
            {"diffeo", diffeo},   {"f", f},               {"rays", rays},
            {"seed", seed},       {"tol", tol},           {"smax", opt(smax)},
            {"lmax", opt(lmax)},  {"workers", workers},   {"out", out},
            {"format", opt(format)}, {"strict", strict},  {"grid_step", grid_step},
            {"time_samples", time_samples}, {"probes", probes}};
  }

  static ExperimentConfig from_json(const nlohmann::json& j) {
    try {
      ExperimentConfig c;
      c.command = j.value("command", c.command);
      c.metric = j.value("metric", c.metric);
      c.metric2 = j.value("metric2", c.metric2);
      c.diffeo = j.value("diffeo", c.diffeo);
      c.f = j.value("f", c.f);
      c.rays = j.value("rays", c.rays);
      c.seed = j.value("seed", c.seed);
      c.tol = j.value("tol", c.tol);
      if (j.contains("smax") && !j["smax"].is_null()) c.smax = j["smax"].get<double>();
      if (j.contains("lmax") && !j["lmax"].is_null()) c.lmax = j["lmax"].get<double>();
      c.workers = j.value("workers", c.workers);
      c.out = j.value("out", c.out);
      if (j.contains("format") && !j["format"].is_null()) c.format = j["format"].get<std::string>();
      c.strict = j.value("strict", c.strict);
      c.grid_step = j.value("grid_step", c.grid_step);
      c.time_samples = j.value("time_samples", c.time_samples);
      c.probes = j.value("probes", c.probes);
      return c;
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError(std::string("experiment config: ") + e.what());
    }
  }

  // FNV-1a of the canonical JSON form, ignoring fields that cannot change
  // the numbers (worker count, output path).
  std::uint64_t hash() const {
    nlohmann::json j = to_json();
    j.erase("workers");
    j.erase("out");
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : j.dump()) {
      h ^= c;
      h *= 1099511628211ULL;
    }
    return h;
  }
};

namespace detail {

inline std::string hex64(std::uint64_t h) {
  std::ostringstream os;
  os << std::hex << std::setw(16) << std::setfill('0') << h;
  return os.str();
}

// "# lenscat <version> config=<hash> columns=<schema>"
inline void write_csv_preamble(std::ostream& os, const ExperimentConfig& cfg, const std::string& columns) {
  os << "# lenscat " << kVersion << " config=" << hex64(cfg.hash()) << " columns=" << columns << '\n'
     << columns << '\n';
}

inline std::string header_of(void (*writer)(std::ostream&, int), int n) {
  std::ostringstream os;
  writer(os, n);
  std::string s = os.str();
  if (!s.empty() && s.back() == '\n') s.pop_back();
  return s;
}

class Sink {
 public:
  Sink(const std::string& path, std::ostream& fallback) : os_(&fallback) {
    if (!path.empty()) {
      file_.open(path, std::ios::binary);
      if (!file_) throw ConfigError("cannot open output " + path);
      os_ = &file_;
    }
  }
  std::ostream& stream() { return *os_; }

 private:
  std::ofstream file_;
  std::ostream* os_;
};

inline std::string num(double x) {
  std::ostringstream os;
  os.precision(17);
  os << x;
  return os.str();
}

inline ScatterOptions scatter_options(const ExperimentConfig& cfg, const MetricField& g) {
  ScatterOptions o;
  o.integrator.record_samples = false;
  o.integrator.max_length = cfg.lmax.value_or(50.0 * g.support_radius());
  return o;
}

inline MetricField load_validated(const std::string& path) {
  MetricField g = load_metric(path);
  validate_metric(g);
  return g;
}

}  // namespace detail

// Scatter sweep over seeded random inward entries. Trapped rays are left out
// of the CSV and listed in the summary.
inline ExitCode run_scatter(const ExperimentConfig& cfg, std::ostream& log, std::ostream& err) {
  const MetricField g = detail::load_validated(cfg.metric);
  const int n = g.dim();
  const auto entries = random_inward_entries(n, g.support_radius(), g.time_radius(), cfg.rays, cfg.seed);
  const ScatterOptions opt = detail::scatter_options(cfg, g);
  struct Outcome {
    std::optional<ScatterResult> result;
    double trapped_length = 0.0;
  };
  const auto outcomes = parallel_map(entries.size(), cfg.effective_workers(), [&](std::size_t i) {
    try {
      return Outcome{scatter(g, entries[i], opt), 0.0};
    } catch (const TrappedRay& e) {
      return Outcome{std::nullopt, e.length()};
    }
  });

  nlohmann::json trapped = nlohmann::json::array();
  double max_length = 0.0;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].result) {
      max_length = std::max(max_length, outcomes[i].result->length);
    } else {
      trapped.push_back({{"index", i}, {"entry", ray_json(entries[i])}, {"length", outcomes[i].trapped_length}});
    }
  }

  {
    detail::Sink sink(cfg.out, log);
    std::ostream& os = sink.stream();
    if (cfg.effective_format() == "csv") {
      detail::write_csv_preamble(os, cfg, detail::header_of(write_lens_csv_header, n));
      for (const auto& o : outcomes)
        if (o.result) write_lens_csv_row(os, *o.result);
    } else {
      nlohmann::json rows = nlohmann::json::array();
      for (const auto& o : outcomes)
        if (o.result)
          rows.push_back({{"entry", ray_json(o.result->entry)},
                          {"exit", ray_json(o.result->exit)},
                          {"length", o.result->length},
                          {"sojourn", o.result->sojourn}});
      os << nlohmann::json{{"version", kVersion}, {"config", detail::hex64(cfg.hash())}, {"rays", rows}}.dump(1)
         << '\n';
    }
  }
  const nlohmann::json summary{{"command", "scatter"},
                               {"rays", entries.size()},
                               {"max_length", max_length},
                               {"trapped", trapped.size()}};
  if (!cfg.out.empty()) log << summary.dump() << '\n';
  if (cfg.strict && !trapped.empty()) {
    err << nlohmann::json{{"error", "trapped"}, {"offending", trapped}}.dump() << '\n';
    return ExitCode::Trapped;
  }
  return ExitCode::Ok;
}

// Closed-form sojourn time next to the limit definition at s_max.
inline ExitCode run_sojourn(const ExperimentConfig& cfg, std::ostream& log, std::ostream& err) {
  const MetricField g = detail::load_validated(cfg.metric);
  const int n = g.dim();
  const double R = g.support_radius();
  const double s_max = cfg.smax.value_or(100.0 * R);
  if (s_max < 10.0 * R) throw ConfigError("--smax must be at least 10 R");
  const auto entries = random_inward_entries(n, R, g.time_radius(), cfg.rays, cfg.seed);
  const ScatterOptions opt = detail::scatter_options(cfg, g);
  struct Outcome {
    bool trapped = false;
    double length = 0.0, closed = 0.0;
    SojournLimit limit;
  };
  const auto outcomes = parallel_map(entries.size(), cfg.effective_workers(), [&](std::size_t i) {
    try {
      const ScatterResult r = scatter(g, entries[i], opt);
      if (!(s_max > r.length)) throw ConfigError("--smax must exceed every interior length");
      return Outcome{false, r.length, r.sojourn, sojourn_limit(g, entries[i], s_max, opt)};
    } catch (const TrappedRay& e) {
      return Outcome{true, e.length(), 0.0, {}};
    }
  });

  std::size_t trapped = 0;
  double worst_gap = 0.0;
  nlohmann::json offending = nlohmann::json::array();
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    if (outcomes[i].trapped) {
      ++trapped;
      offending.push_back({{"index", i}, {"entry", ray_json(entries[i])}, {"length", outcomes[i].length}});
    } else {
      worst_gap = std::max(worst_gap, std::abs(outcomes[i].limit.extrapolated - outcomes[i].closed));
    }
  }
  {
    detail::Sink sink(cfg.out, log);
    std::ostream& os = sink.stream();
    if (cfg.effective_format() == "csv") {
      std::string cols = "t";
      for (const char* name : {"z_in", "v_in"})
        for (int i = 1; i <= n; ++i) cols += std::string(",") + name + "_" + std::to_string(i);
      cols += ",length,sojourn_closed,sojourn_limit,residual,extrapolated";
      detail::write_csv_preamble(os, cfg, cols);
      for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].trapped) continue;
        const auto& o = outcomes[i];
        os << detail::num(entries[i].t);
        for (const Vec* v : {&entries[i].z, &entries[i].v})
          for (Eigen::Index k = 0; k < v->size(); ++k) os << ',' << detail::num((*v)[k]);
        os << ',' << detail::num(o.length) << ',' << detail::num(o.closed) << ',' << detail::num(o.limit.value)
           << ',' << detail::num(o.limit.residual) << ',' << detail::num(o.limit.extrapolated) << '\n';
      }
    } else {
      nlohmann::json rows = nlohmann::json::array();
      for (std::size_t i = 0; i < outcomes.size(); ++i) {
        if (outcomes[i].trapped) continue;
        const auto& o = outcomes[i];
        rows.push_back({{"entry", ray_json(entries[i])},
                        {"length", o.length},
                        {"sojourn_closed", o.closed},
                        {"sojourn_limit", o.limit.value},
                        {"residual", o.limit.residual},
                        {"extrapolated", o.limit.extrapolated}});
      }
      os << nlohmann::json{{"version", kVersion}, {"config", detail::hex64(cfg.hash())}, {"s_max", s_max},
                           {"rays", rows}}.dump(1)
         << '\n';
    }
  }
  const nlohmann::json summary{{"command", "sojourn"}, {"rays", entries.size()}, {"s_max", s_max},
                               {"trapped", trapped},   {"max_extrapolation_gap", worst_gap}};
  if (!cfg.out.empty()) log << summary.dump() << '\n';
  if (cfg.strict && trapped > 0) {
    err << nlohmann::json{{"error", "trapped"}, {"offending", offending}}.dump() << '\n';
    return ExitCode::Trapped;
  }
  return ExitCode::Ok;
}

// lens_equivalent on seeded random cusp samples. The second metric is either
// read from --metric2 or built as the pullback of the first by --diffeo.
inline ExitCode run_compare(const ExperimentConfig& cfg, std::ostream& log, std::ostream&) {
  const MetricField g1 = detail::load_validated(cfg.metric);
  const MetricField g2 = cfg.metric2.empty() ? pullback(g1, load_diffeo(cfg.diffeo))
                                             : detail::load_validated(cfg.metric2);
  validate_metric(g2);
  const int n = g1.dim();
  const auto samples = random_cusp_points(n, g1.time_radius(), 0.95 * g1.support_radius(), cfg.rays, cfg.seed);
  const LensReport rep =
      lens_equivalent(g1, g2, samples, cfg.tol, cfg.effective_workers(), detail::scatter_options(cfg, g1));
  nlohmann::json report = rep.to_json();
  report["command"] = "compare";
  report["config"] = detail::hex64(cfg.hash());
  if (cfg.effective_format() == "csv") {
    detail::Sink sink(cfg.out, log);
    std::ostream& os = sink.stream();
    // Per-sample view: the incoming datum and both outgoing images.
    std::ostringstream cols;
    write_graph_csv_header(cols, n);
    std::string c = cols.str();
    c.pop_back();
    detail::write_csv_preamble(os, cfg, "metric," + c);
    for (const CuspBoundaryPoint& p : samples) {
      for (const MetricField* g : {&g1, &g2}) {
        try {
          const SojournGraphPoint gp = classical_scattering_map(*g, p, detail::scatter_options(cfg, *g));
          os << (g == &g1 ? 1 : 2) << ',';
          write_graph_csv_row(os, gp);
        } catch (const TrappedRay&) {
        }
      }
    }
    if (!cfg.out.empty()) log << report.dump() << '\n';
  } else {
    if (!cfg.out.empty()) {
      detail::Sink sink(cfg.out, log);
      sink.stream() << report.dump(1) << '\n';
    }
    log << report.dump() << '\n';
  }
  return rep.equivalent ? ExitCode::Ok : ExitCode::Inequivalent;
}

// Convexity certificate for f (default |z|^2) merged with a non-trapping
// sweep over seeded random entries.
inline ExitCode run_check(const ExperimentConfig& cfg, std::ostream& log, std::ostream&) {
  const MetricField g = detail::load_validated(cfg.metric);
  const int n = g.dim();
  const ScalarField f = cfg.f.empty() ? quadratic_function(n) : load_function(cfg.f, n);
  const AdmissibilityReport adm = admissibility_report(g, f, GridSpec{});
  const auto entries = random_inward_entries(n, g.support_radius(), g.time_radius(), cfg.rays, cfg.seed);
  const ScatterOptions opt = detail::scatter_options(cfg, g);
  const NonTrappingReport nt = check_non_trapping(g, entries, *opt.integrator.max_length, cfg.effective_workers(), opt);
  const bool pass = adm.admissible && nt.certificate;
  const nlohmann::json report{{"command", "check"},
                              {"config", detail::hex64(cfg.hash())},
                              {"function", f.descriptor()},
                              {"admissibility", adm.to_json()},
                              {"non_trapping", nt.to_json()},
                              {"pass", pass}};
  if (!cfg.out.empty()) {
    detail::Sink sink(cfg.out, log);
    sink.stream() << report.dump(1) << '\n';
  }
  log << report.dump() << '\n';
  return pass ? ExitCode::Ok : ExitCode::Inequivalent;
}

// Grid used to materialise psi^* g: z on [-R, R] with step grid_step * R in
// every coordinate, t on [-T, T] with time_samples nodes. Outside this box
// the field is Euclidean, which matches the zero padding of the spline.
inline std::pair<GridAxis, GridAxis> pullback_grid(const ExperimentConfig& cfg, double R, double T) {
  const int zc = static_cast<int>(std::lround(2.0 / cfg.grid_step)) + 1;
  return {GridAxis{-T, T, cfg.time_samples}, GridAxis{-R, R, zc}};
}

inline ExitCode run_pullback(const ExperimentConfig& cfg, std::ostream& log, std::ostream&) {
  const MetricField g = detail::load_validated(cfg.metric);
  const MetricField pg = pullback(g, load_diffeo(cfg.diffeo));
  validate_metric(pg);
  const int n = g.dim();
  const double R = g.support_radius(), T = g.time_radius();
  const auto [t_axis, z_axis] = pullback_grid(cfg, R, T);
  write_tabulated(tabulate(pg, t_axis, z_axis), cfg.out);

  const MetricField reloaded = load_metric(cfg.out);
  Rng rng(cfg.seed);
  double worst = 0.0;
  for (int k = 0; k < cfg.probes; ++k) {
    const double t = rng.uniform(-T, T);
    const Vec z = R * std::pow(rng.uniform(), 1.0 / n) * rng.unit_vector(n);
    worst = std::max(worst, (reloaded.metric(t, z) - pg.metric(t, z)).cwiseAbs().maxCoeff());
  }
  log << nlohmann::json{{"command", "pullback"},
                        {"config", detail::hex64(cfg.hash())},
                        {"out", cfg.out},
                        {"t_grid", {t_axis.lo, t_axis.hi, t_axis.count}},
                        {"z_grid", {z_axis.lo, z_axis.hi, z_axis.count}},
                        {"probes", cfg.probes},
                        {"max_probe_error", worst}}
             .dump()
      << '\n';
  return ExitCode::Ok;
}

// Dispatches on cfg.command and maps failures to exit codes. Diagnostics go
// to err as one JSON object.
inline int run(const ExperimentConfig& cfg, std::ostream& log = std::cout, std::ostream& err = std::cerr) {
  auto fail = [&](ExitCode code, const std::string& kind, const std::string& what) {
    err << nlohmann::json{{"error", kind}, {"message", what}}.dump() << '\n';
    return static_cast<int>(code);
  };
  try {
    cfg.validate();
    ExitCode code = ExitCode::Ok;
    if (cfg.command == "scatter") code = run_scatter(cfg, log, err);
    else if (cfg.command == "sojourn") code = run_sojourn(cfg, log, err);
    else if (cfg.command == "compare") code = run_compare(cfg, log, err);
    else if (cfg.command == "check") code = run_check(cfg, log, err);
    else code = run_pullback(cfg, log, err);
    return static_cast<int>(code);
  } catch (const ConfigError& e) {
    return fail(ExitCode::ConfigError, "config", e.what());
  } catch (const SupportViolation& e) {
    return fail(cfg.diffeo.empty() ? ExitCode::MetricInvalid : ExitCode::SupportViolation, "support", e.what());
  } catch (const NonPositiveDefinite& e) {
    return fail(ExitCode::MetricInvalid, "metric", e.what());
  } catch (const TrappedRay& e) {
    return fail(ExitCode::Trapped, "trapped", e.what());
  } catch (const Error& e) {
    return fail(ExitCode::MetricInvalid, "numerics", e.what());
  } catch (const std::invalid_argument& e) {
    return fail(ExitCode::ConfigError, "config", e.what());
  }
}

}  // namespace lenscat
