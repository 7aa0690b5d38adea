#pragma once

#include "lenscat/lenscat.hpp"
#include "oracles.hpp"

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace testing_util {

using lenscat::Vec;
using lenscat::Mat;
using lenscat::make_vec;

inline constexpr double kR = 3.0;
inline constexpr double kT = 1.0;

inline std::string config(const std::string& name) { return std::string(LENSCAT_CONFIG_DIR) + "/" + name; }

inline lenscat::MetricField bump(double amplitude, Vec center, double width = 1.0, int n = 2) {
  lenscat::BumpParams p;
  p.amplitude = amplitude;
  p.center = std::move(center);
  p.width = width;
  return lenscat::conformal_bump(n, kR, kT, p);
}

inline lenscat::MetricField bump(double amplitude = 0.1) { return bump(amplitude, Vec::Zero(2)); }

inline oracle::ConformalBump bump_oracle(double amplitude, const Vec& center, double width = 1.0) {
  oracle::ConformalBump b;
  b.A = amplitude;
  b.w = width;
  b.R = kR;
  b.T = kT;
  b.c = center;
  return b;
}

inline lenscat::DiffeoField shear(double amplitude = 0.2, Vec center = make_vec({0.2, -0.1}),
                                  Vec direction = make_vec({1.0, 0.5}), double radius = 2.7, double width = 1.0) {
  lenscat::GeneratorParams g;
  g.amplitude = amplitude;
  g.center = std::move(center);
  g.direction = std::move(direction);
  g.radius = radius;
  g.width = width;
  return lenscat::shear_diffeo(static_cast<int>(g.center.size()), kR, kT, g);
}

inline lenscat::DiffeoField swirl(double amplitude = 0.4, Vec center = make_vec({0.3, 0.0}), double radius = 1.5) {
  lenscat::GeneratorParams g;
  g.amplitude = amplitude;
  g.center = std::move(center);
  g.radius = radius;
  return lenscat::swirl_diffeo(static_cast<int>(g.center.size()), kR, kT, g);
}

inline oracle::V to_dyn(const Vec& v) { return oracle::V(v); }

// Scratch directory removed at scope exit.
struct TempDir {
  std::filesystem::path path;
  explicit TempDir(const std::string& tag) {
    path = std::filesystem::temp_directory_path() /
           ("lenscat_" + tag + "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    std::filesystem::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path, ec);
  }
  std::string file(const std::string& name) const { return (path / name).string(); }
  std::string write(const std::string& name, const std::string& text) const {
    std::ofstream(path / name) << text;
    return file(name);
  }
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace testing_util
