#pragma once

// Metrics sampled on a regular (t, z_1, ..., z_n) grid and interpolated by
// tensor-product cubic B-splines. The tabulated quantity is g - I, which
// vanishes near the edges of the grid, so coefficients beyond the grid are
// taken to be zero, and the field is the identity outside [-T, T] x B_R. Spatial derivatives use 4th-order central differences.

#include "lenscat/errors.hpp"
#include "lenscat/metric.hpp"

#include <cmath>
#include <cstddef>
#include <memory>
#include <string>
#include <utility>
#include <vector>

namespace lenscat {

struct GridAxis {
  double lo = 0.0, hi = 1.0;
  int count = 2;

  double step() const { return (hi - lo) / (count - 1); }
  double node(int i) const { return lo + step() * i; }
};

struct MetricTable {
  int dim = 2;
  double R = 1.0, T = 1.0;
  GridAxis t_axis;
  GridAxis z_axis;  // shared by every spatial coordinate
  // One flat array per upper-triangular component (i <= j) of g - I, laid
  // out with t slowest and z_n fastest.
  std::vector<std::vector<double>> components;

  std::size_t points() const {
    std::size_t p = static_cast<std::size_t>(t_axis.count);
    for (int k = 0; k < dim; ++k) p *= static_cast<std::size_t>(z_axis.count);
    return p;
  }
  int component_count() const { return dim * (dim + 1) / 2; }
};

// Samples field on the grid. Intended for materialising fields such as
// pullbacks; cost is one metric evaluation per node.
inline MetricTable tabulate(const MetricField& field, GridAxis t_axis, GridAxis z_axis) {
  MetricTable tab{field.dim(), field.support_radius(), field.time_radius(), t_axis, z_axis, {}};
  const int n = field.dim();
  tab.components.assign(tab.component_count(), std::vector<double>(tab.points()));
  std::vector<int> idx(n + 1, 0);
  Vec z(n);
  for (std::size_t p = 0; p < tab.points(); ++p) {
    std::size_t rem = p;
    for (int a = n; a >= 1; --a) {
      idx[a] = static_cast<int>(rem % z_axis.count);
      rem /= z_axis.count;
    }
    idx[0] = static_cast<int>(rem);
    for (int a = 0; a < n; ++a) z[a] = z_axis.node(idx[a + 1]);
    const Mat g = field.metric(t_axis.node(idx[0]), z);
    int c = 0;
    for (int i = 0; i < n; ++i)
      for (int j = i; j < n; ++j) tab.components[c++][p] = g(i, j) - (i == j ? 1.0 : 0.0);
  }
  return tab;
}

namespace detail {

// In-place solve of (c[i-1] + 4 c[i] + c[i+1]) / 6 = f[i] along one axis
// with zero coefficients outside, for every line of the array.
inline void prefilter_axis(std::vector<double>& data, const std::vector<int>& shape, int axis) {
  const int len = shape[axis];
  std::size_t stride = 1;
  for (int a = static_cast<int>(shape.size()) - 1; a > axis; --a) stride *= shape[a];
  std::size_t outer = 1;
  for (int a = 0; a < axis; ++a) outer *= shape[a];

  // Thomas algorithm factors for the constant tridiagonal system.
  std::vector<double> cprime(len);
  cprime[0] = 1.0 / 4.0;
  for (int i = 1; i < len; ++i) cprime[i] = 1.0 / (4.0 - cprime[i - 1]);
  std::vector<double> d(len);
  for (std::size_t o = 0; o < outer; ++o) {
    for (std::size_t s = 0; s < stride; ++s) {
      const std::size_t base = o * stride * len + s;
      d[0] = 6.0 * data[base] / 4.0;
      for (int i = 1; i < len; ++i)
        d[i] = (6.0 * data[base + i * stride] - d[i - 1]) * cprime[i];
      data[base + (len - 1) * stride] = d[len - 1];
      for (int i = len - 2; i >= 0; --i)
        data[base + i * stride] = d[i] - cprime[i] * data[base + (i + 1) * stride];
    }
  }
}

inline void bspline_weights(double frac, double w[4]) {
  const double f2 = frac * frac, f3 = f2 * frac;
  const double g = 1.0 - frac;
  w[0] = g * g * g / 6.0;
  w[1] = (3.0 * f3 - 6.0 * f2 + 4.0) / 6.0;
  w[2] = (-3.0 * f3 + 3.0 * f2 + 3.0 * frac + 1.0) / 6.0;
  w[3] = f3 / 6.0;
}

class TabulatedModel final : public MetricModel {
 public:
  TabulatedModel(MetricTable table, std::string source)
      : tab_(std::move(table)), source_(std::move(source)) {
    shape_.assign(tab_.dim + 1, tab_.z_axis.count);
    shape_[0] = tab_.t_axis.count;
    coeffs_ = tab_.components;
    for (auto& comp : coeffs_)
      for (int a = 0; a <= tab_.dim; ++a) prefilter_axis(comp, shape_, a);
    fd_step_ = 1e-4 * tab_.R;
  }

  Mat value(double t, const Vec& z) const override {
    const int n = tab_.dim;
    if (std::abs(t) >= tab_.T * (1.0 - 1e-12) || z.norm() >= tab_.R * (1.0 - 1e-12)) return identity(n);
    // per-axis base index and weights
    int base[kMaxDim + 1];
    double w[kMaxDim + 1][4];
    if (!locate(0, t, tab_.t_axis, base[0], w[0])) return identity(n);
    for (int a = 0; a < n; ++a)
      if (!locate(a + 1, z[a], tab_.z_axis, base[a + 1], w[a + 1])) return identity(n);

    Mat g = identity(n);
    const int dims = n + 1;
    int total = 1;
    for (int a = 0; a < dims; ++a) total *= 4;
    for (int c = 0, ci = 0; ci < n; ++ci) {
      for (int cj = ci; cj < n; ++cj, ++c) {
        const std::vector<double>& coef = coeffs_[c];
        double acc = 0.0;
        for (int m = 0; m < total; ++m) {
          int rem = m;
          double weight = 1.0;
          std::size_t offset = 0;
          bool inside = true;
          for (int a = dims - 1; a >= 0; --a) {
            const int k = rem % 4;
            rem /= 4;
            const int node = base[a] + k;
            if (node < 0 || node >= shape_[a]) {
              inside = false;
              break;
            }
            weight *= w[a][k];
          }
          if (!inside || weight == 0.0) continue;
          rem = m;
          std::size_t stride = 1;
          for (int a = dims - 1; a >= 0; --a) {
            const int k = rem % 4;
            rem /= 4;
            offset += static_cast<std::size_t>(base[a] + k) * stride;
            stride *= static_cast<std::size_t>(shape_[a]);
          }
          acc += weight * coef[offset];
        }
        g(ci, cj) += acc;
        if (ci != cj) g(cj, ci) += acc;
      }
    }
    return g;
  }

  MetricJet jet(double t, const Vec& z) const override {
    const int n = tab_.dim;
    MetricJet j{value(t, z), Tensor3(n)};
    const double h = fd_step_;
    for (int k = 0; k < n; ++k) {
      Vec zp = z;
      auto at = [&](double off) {
        zp[k] = z[k] + off;
        return value(t, zp);
      };
      j.dg[k] = (at(-2 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2 * h)) / (12.0 * h);
    }
    return j;
  }

  nlohmann::json descriptor() const override {
    return {{"family", "tabulated"}, {"params", {{"source", source_}}}};
  }

  const MetricTable& table() const { return tab_; }

 private:
  bool locate(int, double x, const GridAxis& ax, int& base, double w[4]) const {
    const double u = (x - ax.lo) / ax.step();
    if (u < -2.0 || u > ax.count + 1.0) return false;
    const double fl = std::floor(u);
    base = static_cast<int>(fl) - 1;
    bspline_weights(u - fl, w);
    return true;
  }

  MetricTable tab_;
  std::string source_;
  std::vector<int> shape_;
  std::vector<std::vector<double>> coeffs_;
  double fd_step_;
};

}  // namespace detail

inline MetricField tabulated_metric(MetricTable table, std::string source = "inline") {
  if (table.t_axis.count < 2 || table.z_axis.count < 4) throw ConfigError("tabulated grid too small");
  if (static_cast<int>(table.components.size()) != table.component_count())
    throw ConfigError("tabulated metric has wrong number of components");
  for (const auto& c : table.components)
    if (c.size() != table.points()) throw ConfigError("tabulated component has wrong length");
  const int n = table.dim;
  const double R = table.R, T = table.T;
  // The model is Euclidean outside [-T, T] x B_R regardless of the data, so
  // nonzero samples there are rejected rather than silently dropped.
  std::vector<int> idx(n + 1, 0);
  for (std::size_t p = 0; p < table.points(); ++p) {
    std::size_t rem = p;
    double r2 = 0.0;
    for (int a = n; a >= 1; --a) {
      const double z = table.z_axis.node(static_cast<int>(rem % table.z_axis.count));
      r2 += z * z;
      rem /= table.z_axis.count;
    }
    const double t = table.t_axis.node(static_cast<int>(rem));
    if (std::abs(t) < T && std::sqrt(r2) < R) continue;
    for (const auto& c : table.components)
      if (std::abs(c[p]) > 1e-12)
        throw SupportViolation("tabulated metric is not Euclidean outside the support ball");
  }
  return {n, R, T, std::make_shared<detail::TabulatedModel>(std::move(table), std::move(source))};
}

}  // namespace lenscat
