#pragma once

// JSON spec files for metrics, diffeomorphisms and scalar functions:
//   {"dim": 2, "R": 3.0, "T": 1.0, "family": "conformal_bump",
//    "params": {"amplitude": 0.1, "center": [0, 0], "width": 1.0, "time_width": 0.5}}
// Tabulated metrics keep their samples in a raw little-endian float64
// sidecar named by params.data_file, relative to the spec file.

#include "lenscat/diffeo.hpp"
#include "lenscat/errors.hpp"
#include "lenscat/geometry.hpp"
#include "lenscat/metric.hpp"
#include "lenscat/pullback.hpp"
#include "lenscat/tabulated.hpp"

#include <json.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace lenscat {

namespace fs = std::filesystem;

namespace detail {

inline Vec vec_from_json(const nlohmann::json& j, int n, const char* what) {
  if (!j.is_array() || static_cast<int>(j.size()) != n)
    throw ConfigError(std::string(what) + " must be an array of length " + std::to_string(n));
  Vec v(n);
  for (int i = 0; i < n; ++i) v[i] = j.at(i).get<double>();
  return v;
}

inline nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

// A nested spec is either an inline object or a path relative to base_dir.
inline nlohmann::json resolve_nested(const nlohmann::json& j, const fs::path& base_dir, fs::path& nested_dir) {
  if (j.is_string()) {
    const fs::path p = base_dir / j.get<std::string>();
    nested_dir = p.parent_path();
    return read_json_file(p);
  }
  nested_dir = base_dir;
  return j;
}

inline BumpParams bump_from_json(const nlohmann::json& p, int n) {
  BumpParams b;
  b.amplitude = p.value("amplitude", 0.1);
  b.center = p.contains("center") ? vec_from_json(p["center"], n, "center") : Vec(Vec::Zero(n));
  b.width = p.value("width", 1.0);
  if (p.contains("time_width") && !p["time_width"].is_null()) b.time_width = p["time_width"].get<double>();
  return b;
}

inline GeneratorParams generator_from_json(const nlohmann::json& p, int n) {
  GeneratorParams g;
  g.amplitude = p.value("amplitude", 0.2);
  g.center = p.contains("center") ? vec_from_json(p["center"], n, "center") : Vec(Vec::Zero(n));
  g.radius = p.value("radius", 1.0);
  if (p.contains("width") && !p["width"].is_null()) g.width = p["width"].get<double>();
  if (p.contains("time_width") && !p["time_width"].is_null()) g.time_width = p["time_width"].get<double>();
  g.steps = p.value("steps", 16);
  if (p.contains("direction")) g.direction = vec_from_json(p["direction"], n, "direction");
  if (p.contains("plane")) {
    g.plane_i = p["plane"].at(0).get<int>();
    g.plane_j = p["plane"].at(1).get<int>();
  }
  return g;
}

}  // namespace detail

inline DiffeoField diffeo_from_json(const nlohmann::json& j, const fs::path& base_dir = ".");

inline MetricTable read_table(const nlohmann::json& p, int n, double R, double T, const fs::path& base_dir) {
  MetricTable tab;
  tab.dim = n;
  tab.R = R;
  tab.T = T;
  auto axis = [](const nlohmann::json& a) {
    if (!a.is_array() || a.size() != 3) throw ConfigError("grid axis must be [lo, hi, count]");
    return GridAxis{a[0].get<double>(), a[1].get<double>(), a[2].get<int>()};
  };
  tab.t_axis = axis(p.at("t_grid"));
  tab.z_axis = axis(p.at("z_grid"));
  const std::size_t count = tab.points();
  const int comps = tab.component_count();
  if (p.contains("components")) {
    for (const auto& c : p["components"]) tab.components.push_back(c.get<std::vector<double>>());
  } else {
    const fs::path data = base_dir / p.at("data_file").get<std::string>();
    std::ifstream in(data, std::ios::binary);
    if (!in) throw ConfigError("cannot open tabulated data " + data.string());
    tab.components.assign(comps, std::vector<double>(count));
    for (auto& c : tab.components) {
      in.read(reinterpret_cast<char*>(c.data()), static_cast<std::streamsize>(count * sizeof(double)));
      if (!in) throw ConfigError("tabulated data file too short: " + data.string());
    }
  }
  return tab;
}

inline MetricField metric_from_json(const nlohmann::json& j, const fs::path& base_dir = ".") {
  try {
    const int n = j.at("dim").get<int>();
    const double R = j.at("R").get<double>();
    const double T = j.at("T").get<double>();
    const std::string family = j.at("family").get<std::string>();
    const nlohmann::json p = j.value("params", nlohmann::json::object());
    if (family == "flat") return flat_metric(n, R, T);
    if (family == "conformal_bump") return conformal_bump(n, R, T, detail::bump_from_json(p, n));
    if (family == "rank_one_bump")
      return rank_one_bump(n, R, T, detail::bump_from_json(p, n), detail::vec_from_json(p.at("direction"), n, "direction"));
    if (family == "pullback") {
      fs::path mdir, ddir;
      const MetricField base = metric_from_json(detail::resolve_nested(p.at("metric"), base_dir, mdir), mdir);
      const DiffeoField psi = diffeo_from_json(detail::resolve_nested(p.at("diffeo"), base_dir, ddir), ddir);
      return pullback(base, psi);
    }
    if (family == "tabulated") {
      const std::string source = p.contains("data_file") ? p["data_file"].get<std::string>() : "inline";
      return tabulated_metric(read_table(p, n, R, T, base_dir), source);
    }
    throw ConfigError("unknown metric family '" + family + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("metric spec: ") + e.what());
  }
}

inline DiffeoField diffeo_from_json(const nlohmann::json& j, const fs::path& base_dir) {
  try {
    const int n = j.at("dim").get<int>();
    const double R = j.at("R").get<double>();
    const double T = j.at("T").get<double>();
    const std::string family = j.at("family").get<std::string>();
    const nlohmann::json p = j.value("params", nlohmann::json::object());
    if (family == "identity") return identity_diffeo(n, R, T);
    if (family == "shear") return shear_diffeo(n, R, T, detail::generator_from_json(p, n));
    if (family == "swirl") return swirl_diffeo(n, R, T, detail::generator_from_json(p, n));
    if (family == "compose") {
      fs::path a, b;
      return compose(diffeo_from_json(detail::resolve_nested(p.at("outer"), base_dir, a), a),
                     diffeo_from_json(detail::resolve_nested(p.at("inner"), base_dir, b), b));
    }
    throw ConfigError("unknown diffeomorphism family '" + family + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("diffeomorphism spec: ") + e.what());
  }
}

// {"family": "quadratic", "params": {"center": [...]}} or
// {"family": "linear", "params": {"coefficients": [...], "offset": 0}}.
inline ScalarField function_from_json(const nlohmann::json& j, int n) {
  try {
    const std::string family = j.at("family").get<std::string>();
    const nlohmann::json p = j.value("params", nlohmann::json::object());
    if (j.contains("dim") && j["dim"].get<int>() != n) throw ConfigError("function dimension does not match metric");
    if (family == "quadratic")
      return quadratic_function(p.contains("center") ? detail::vec_from_json(p["center"], n, "center") : Vec(Vec::Zero(n)));
    if (family == "linear")
      return linear_function(detail::vec_from_json(p.at("coefficients"), n, "coefficients"), p.value("offset", 0.0));
    throw ConfigError("unknown function family '" + family + "'");
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("function spec: ") + e.what());
  }
}

inline MetricField load_metric(const fs::path& path) {
  return metric_from_json(detail::read_json_file(path), path.parent_path());
}

inline DiffeoField load_diffeo(const fs::path& path) {
  return diffeo_from_json(detail::read_json_file(path), path.parent_path());
}

inline ScalarField load_function(const fs::path& path, int n) {
  return function_from_json(detail::read_json_file(path), n);
}

// Writes the spec to `path` and the samples to `path` with extension .bin.
inline void write_tabulated(const MetricTable& tab, const fs::path& path) {
  fs::path data = path;
  data.replace_extension(".bin");
  {
    std::ofstream out(data, std::ios::binary);
    if (!out) throw ConfigError("cannot write " + data.string());
    for (const auto& c : tab.components)
      out.write(reinterpret_cast<const char*>(c.data()), static_cast<std::streamsize>(c.size() * sizeof(double)));
  }
  const nlohmann::json spec{{"dim", tab.dim},
                            {"R", tab.R},
                            {"T", tab.T},
                            {"family", "tabulated"},
                            {"params",
                             {{"t_grid", {tab.t_axis.lo, tab.t_axis.hi, tab.t_axis.count}},
                              {"z_grid", {tab.z_axis.lo, tab.z_axis.hi, tab.z_axis.count}},
                              {"data_file", data.filename().string()}}}};
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write " + path.string());
  out << spec.dump(2) << '\n';
}

}  // namespace lenscat
