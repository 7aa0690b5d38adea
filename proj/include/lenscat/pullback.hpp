#pragma once

#include "lenscat/diffeo.hpp"
#include "lenscat/metric.hpp"
#include "lenscat/sampling.hpp"

#include <cmath>
#include <memory>
#include <utility>

namespace lenscat {

namespace detail {

// (psi^* g)(t, z) = J^T g(t, psi_1(t, z)) J with J = D psi_1.
class PullbackModel final : public MetricModel {
 public:
  PullbackModel(MetricField base, DiffeoField psi) : base_(std::move(base)), psi_(std::move(psi)) {}

  Mat value(double t, const Vec& z) const override {
    const DiffeoJet p = psi_.first_jet(t, z);
    return p.jacobian.transpose() * base_.metric(t, p.value) * p.jacobian;
  }

  MetricJet jet(double t, const Vec& z) const override {
    const int n = base_.dim();
    const DiffeoJet p = psi_.jet(t, z);
    const MetricJet b = base_.jet(t, p.value);
    const Mat& J = p.jacobian;
    MetricJet out{J.transpose() * b.g * J, Tensor3(n)};
    const Mat gJ = b.g * J;
    for (int k = 0; k < n; ++k) {
      // d_k(J^T G J) = Hk^T G J + (Hk^T G J)^T + J^T (sum_c dG_c J_ck) J,
      // with Hk(a, i) = d^2 psi_a / dz_i dz_k.
      Mat hk(n, n);
      for (int a = 0; a < n; ++a) hk.row(a) = p.hessian[a].col(k).transpose();
      Mat chain = Mat::Zero(n, n);
      for (int c = 0; c < n; ++c) chain += J(c, k) * b.dg[c];
      const Mat first = hk.transpose() * gJ;
      out.dg[k] = first + first.transpose() + J.transpose() * chain * J;
    }
    return out;
  }

  nlohmann::json descriptor() const override {
    return {{"family", "pullback"},
            {"params", {{"metric", base_.descriptor()}, {"diffeo", psi_.descriptor()}}}};
  }

 private:
  MetricField base_;
  DiffeoField psi_;
};

}  // namespace detail

// Largest |g - I| over a deterministic sample of the region where the field
// must be Euclidean: the spatial shell R <= |z| <= 2R at all times, and the
// flat time slices |t| >= T inside B_2R. Evaluates the family directly,
// bypassing MetricField's support short-circuit.
inline double support_deviation(const MetricField& field, int directions = 200) {
  const int n = field.dim();
  const double R = field.support_radius(), T = field.time_radius();
  const auto dirs = fibonacci_sphere(n, directions);
  double worst = 0.0;
  const double radii[] = {1.0, 1.02, 1.05, 1.1, 1.25, 1.5, 2.0};
  const double times[] = {-1.5, -1.0, -0.6, -0.25, 0.0, 0.3, 0.7, 1.0, 1.5};
  for (double tf : times) {
    for (double rf : radii)
      for (const Vec& d : dirs)
        worst = std::max(worst, (field.raw_metric(tf * T, rf * R * d) - identity(n)).cwiseAbs().maxCoeff());
  }
  for (double tf : {-2.0, -1.0, 1.0, 2.0})
    for (double rf : {0.0, 0.3, 0.6, 0.9})
      for (int i = 0; i < static_cast<int>(dirs.size()); i += 4)
        worst = std::max(worst, (field.raw_metric(tf * T, rf * R * dirs[i]) - identity(n)).cwiseAbs().maxCoeff());
  return worst;
}

inline constexpr double kSupportTolerance = 1e-12;

// psi^* g2. Throws SupportViolation when the result is not Euclidean
// outside [-T, T] x B_R(0) of g2.
inline MetricField pullback(const MetricField& g2, const DiffeoField& psi) {
  if (g2.dim() != psi.dim()) throw ConfigError("metric and diffeomorphism dimensions differ");
  MetricField out(g2.dim(), g2.support_radius(), g2.time_radius(),
                  std::make_shared<detail::PullbackModel>(g2, psi));
  const double dev = support_deviation(out);
  if (dev > kSupportTolerance)
    throw SupportViolation("pullback is not Euclidean outside the support ball (max deviation " +
                           std::to_string(dev) + ")");
  return out;
}

}  // namespace lenscat
