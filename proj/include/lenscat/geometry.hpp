#pragma once

// Convexity and curvature diagnostics for a metric field: covariant Hessians
// of candidate convex functions, sectional curvature, and the admissibility
// report that gathers them over a sampling grid.

#include "lenscat/diffeo.hpp"
#include "lenscat/errors.hpp"
#include "lenscat/metric.hpp"
#include "lenscat/profile.hpp"
#include "lenscat/pullback.hpp"

#include <json.hpp>

#include <algorithm>
#include <functional>
#include <limits>
#include <string>
#include <utility>
#include <vector>

namespace lenscat {

class ScalarField {
 public:
  using Fn = std::function<ScalarJet(double, const Vec&)>;

  ScalarField(Fn fn, nlohmann::json descriptor) : fn_(std::move(fn)), desc_(std::move(descriptor)) {}

  ScalarJet jet(double t, const Vec& z) const { return fn_(t, z); }
  double operator()(double t, const Vec& z) const { return fn_(t, z).value; }
  const nlohmann::json& descriptor() const { return desc_; }

 private:
  Fn fn_;
  nlohmann::json desc_;
};

// |z - c|^2
inline ScalarField quadratic_function(Vec center) {
  nlohmann::json d{{"family", "quadratic"}, {"params", {{"center", detail::vec_to_json(center)}}}};
  return {[c = std::move(center)](double, const Vec& z) {
            const int n = static_cast<int>(z.size());
            const Vec d = z - (c.size() == n ? c : Vec(Vec::Zero(n)));
            return ScalarJet{d.squaredNorm(), 2.0 * d, 2.0 * Mat::Identity(n, n)};
          },
          d};
}

inline ScalarField quadratic_function(int n) { return quadratic_function(Vec::Zero(n)); }

// a . z + b
inline ScalarField linear_function(Vec a, double b = 0.0) {
  nlohmann::json d{{"family", "linear"}, {"params", {{"coefficients", detail::vec_to_json(a)}, {"offset", b}}}};
  return {[a = std::move(a), b](double, const Vec& z) {
            const int n = static_cast<int>(z.size());
            return ScalarJet{a.dot(z) + b, a, Mat::Zero(n, n)};
          },
          d};
}

// f o psi_1, with exact chain-rule derivatives.
inline ScalarField compose(const ScalarField& f, const DiffeoField& psi) {
  nlohmann::json d{{"family", "compose"}, {"params", {{"function", f.descriptor()}, {"diffeo", psi.descriptor()}}}};
  return {[f, psi](double t, const Vec& z) {
            const DiffeoJet p = psi.jet(t, z);
            const ScalarJet fj = f.jet(t, p.value);
            ScalarJet r;
            r.value = fj.value;
            r.grad = p.jacobian.transpose() * fj.grad;
            r.hess = p.jacobian.transpose() * fj.hess * p.jacobian;
            for (int a = 0; a < static_cast<int>(z.size()); ++a) r.hess += fj.grad[a] * p.hessian[a];
            return r;
          },
          d};
}

// Covariant Hessian d_i d_j f - Gamma^k_ij d_k f of f with respect to g(t).
inline Mat covariant_hessian(const MetricField& field, const ScalarField& f, double t, const Vec& z) {
  const Tensor3 gamma = christoffel(field, t, z);
  const ScalarJet fj = f.jet(t, z);
  Mat h = fj.hess;
  for (int k = 0; k < field.dim(); ++k) h -= fj.grad[k] * gamma[k];
  return 0.5 * (h + h.transpose());
}

// Smallest eigenvalue of the covariant Hessian measured against g(t), i.e.
// of g^{-1/2} Hess f g^{-1/2}. Coincides with the plain matrix eigenvalue
// wherever g = I and is invariant under pullback.
inline double hessian_min_eig(const MetricField& field, const ScalarField& f, double t, const Vec& z) {
  const Mat h = covariant_hessian(field, f, t, z);
  const Mat g = field.metric(t, z);
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(h, 0.5 * (g + g.transpose()));
  return es.eigenvalues().minCoeff();
}

namespace detail {

// Gamma(U, V)^m = Gamma^m_{ik} U^i V^k
inline Vec contract(const Tensor3& gamma, const Vec& u, const Vec& v) {
  Vec r(gamma.dim);
  for (int m = 0; m < gamma.dim; ++m) r[m] = u.dot(gamma[m] * v);
  return r;
}

}  // namespace detail

// Sectional curvature of the plane spanned by X and Y at (t, z).
// Derivatives of the Christoffel symbols are 4th-order central differences
// along X and Y.
inline double sectional_curvature(const MetricField& field, double t, const Vec& z, const Vec& X, const Vec& Y) {
  const Mat g = field.metric(t, z);
  const double xx = X.dot(g * X), yy = Y.dot(g * Y), xy = X.dot(g * Y);
  const double denom = xx * yy - xy * xy;
  if (!(denom >= 1e-14 * std::max(1.0, xx * yy))) throw DegeneratePlane("X and Y do not span a plane");

  const double h = 1e-4 * field.support_radius();
  auto directional = [&](const Vec& dir, const Vec& a, const Vec& b) {
    const Vec e = dir / dir.norm();
    auto at = [&](double s) { return detail::contract(christoffel(field, t, Vec(z + s * e)), a, b); };
    return Vec(((at(-2 * h) - 8.0 * at(-h) + 8.0 * at(h) - at(2 * h)) / (12.0 * h)) * dir.norm());
  };
  const Tensor3 gamma = christoffel(field, t, z);
  const Vec gyy = detail::contract(gamma, Y, Y);
  const Vec gyx = detail::contract(gamma, Y, X);
  // R(X, Y)Y = D_X Gamma(Y, Y) - D_Y Gamma(Y, X) + Gamma(X, Gamma(Y, Y)) - Gamma(Y, Gamma(Y, X))
  const Vec w = directional(X, Y, Y) - directional(Y, Y, X) + detail::contract(gamma, X, gyy) -
                detail::contract(gamma, Y, gyx);
  return X.dot(g * w) / denom;
}

// Product grid over [-T, T] x B_R(0): `spatial` nodes per axis on [-R, R]
// (points with |z| >= R dropped) and `times` nodes on [-T, T].
struct GridSpec {
  int spatial = 21;
  int times = 21;
};

inline std::vector<std::pair<double, Vec>> interior_grid(int n, double R, double T, const GridSpec& grid) {
  std::vector<std::pair<double, Vec>> out;
  std::vector<int> idx(n, 0);
  auto node = [](int i, int count, double half) {
    return count == 1 ? 0.0 : -half + 2.0 * half * i / (count - 1);
  };
  for (int it = 0; it < grid.times; ++it) {
    const double t = node(it, grid.times, T);
    std::fill(idx.begin(), idx.end(), 0);
    while (true) {
      Vec z(n);
      for (int a = 0; a < n; ++a) z[a] = node(idx[a], grid.spatial, R);
      if (z.norm() < R) out.emplace_back(t, z);
      int a = n - 1;
      while (a >= 0 && ++idx[a] == grid.spatial) idx[a--] = 0;
      if (a < 0) break;
    }
  }
  return out;
}

inline constexpr double kMinMetricEigenvalue = 1e-6;

struct AdmissibilityReport {
  int dim = 0;
  std::size_t samples = 0;
  double min_hessian_eig = std::numeric_limits<double>::infinity();
  Vec argmin_z;
  double argmin_t = 0.0;
  double min_metric_eig = std::numeric_limits<double>::infinity();
  double shell_deviation = 0.0;
  double min_sectional = std::numeric_limits<double>::infinity();
  double max_sectional = -std::numeric_limits<double>::infinity();
  std::size_t sectional_negative = 0, sectional_positive = 0, sectional_zero = 0;
  double margin = 0.0;
  bool positive_definite = false;
  bool flat_outside = false;
  bool admissible = false;
  bool rigidity_dimension = false;  // n >= 3

  nlohmann::json to_json() const {
    return {{"dim", dim},
            {"samples", samples},
            {"min_hessian_eig", min_hessian_eig},
            {"argmin", {{"t", argmin_t}, {"z", detail::vec_to_json(argmin_z)}}},
            {"min_metric_eig", min_metric_eig},
            {"shell_deviation", shell_deviation},
            {"sectional", {{"min", min_sectional},
                           {"max", max_sectional},
                           {"negative", sectional_negative},
                           {"positive", sectional_positive},
                           {"zero", sectional_zero}}},
            {"margin", margin},
            {"positive_definite", positive_definite},
            {"flat_outside", flat_outside},
            {"admissible", admissible},
            {"rigidity_dimension", rigidity_dimension}};
  }
};

// Gathers the convexity certificate and related diagnostics. Sectional
// curvature is sampled on coordinate planes at every `curvature_stride`-th
// grid point. Never throws for a bad metric; failures land in the report.
inline AdmissibilityReport admissibility_report(const MetricField& field, const ScalarField& f,
                                                const GridSpec& grid, double margin = 0.0,
                                                int curvature_stride = 7) {
  const int n = field.dim();
  AdmissibilityReport rep;
  rep.dim = n;
  rep.margin = margin;
  rep.rigidity_dimension = n >= 3;
  rep.shell_deviation = support_deviation(field);
  rep.flat_outside = rep.shell_deviation <= kSupportTolerance;
  const auto pts = interior_grid(n, field.support_radius(), field.time_radius(), grid);
  rep.samples = pts.size();
  bool pd = true;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& [t, z] = pts[i];
    const Mat g = field.metric(t, z);
    Eigen::SelfAdjointEigenSolver<Mat> es(0.5 * (g + g.transpose()), Eigen::EigenvaluesOnly);
    const double me = es.eigenvalues().minCoeff();
    rep.min_metric_eig = std::min(rep.min_metric_eig, me);
    if (me < kMinMetricEigenvalue) {
      pd = false;
      continue;
    }
    const double he = hessian_min_eig(field, f, t, z);
    if (he < rep.min_hessian_eig) {
      rep.min_hessian_eig = he;
      rep.argmin_t = t;
      rep.argmin_z = z;
    }
    if (curvature_stride > 0 && i % curvature_stride == 0) {
      for (int a = 0; a < n; ++a)
        for (int b = a + 1; b < n; ++b) {
          const double k = sectional_curvature(field, t, z, unit(n, a), unit(n, b));
          rep.min_sectional = std::min(rep.min_sectional, k);
          rep.max_sectional = std::max(rep.max_sectional, k);
          if (k < -1e-10) ++rep.sectional_negative;
          else if (k > 1e-10) ++rep.sectional_positive;
          else ++rep.sectional_zero;
        }
    }
  }
  rep.positive_definite = pd;
  rep.admissible = pd && rep.flat_outside && rep.min_hessian_eig > margin;
  return rep;
}

// Throws NonPositiveDefinite or SupportViolation when the field breaks the
// metric-class invariants on the validation grid.
inline void validate_metric(const MetricField& field, const GridSpec& grid = {11, 5}) {
  const int n = field.dim();
  for (const auto& [t, z] : interior_grid(n, field.support_radius(), field.time_radius(), grid)) {
    const Mat g = field.metric(t, z);
    if ((g - g.transpose()).cwiseAbs().maxCoeff() > 1e-12) throw NonPositiveDefinite("metric is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(g, Eigen::EigenvaluesOnly);
    if (!(es.eigenvalues().minCoeff() >= kMinMetricEigenvalue))
      throw NonPositiveDefinite("metric eigenvalue below 1e-6 on the validation grid");
  }
  const double dev = support_deviation(field);
  if (dev > kSupportTolerance) throw SupportViolation("metric is not Euclidean outside its support");
}

}  // namespace lenscat
