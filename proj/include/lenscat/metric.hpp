#pragma once

// Time-dependent Riemannian metrics on R^n that coincide with the Euclidean
// metric outside [-T, T] x B_R(0).

#include "lenscat/errors.hpp"
#include "lenscat/linalg.hpp"
#include "lenscat/profile.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <utility>

namespace lenscat {

// g_{ij} and its first spatial derivatives; dg[k](i, j) = d g_{ij} / d z_k.
struct MetricJet {
  Mat g;
  Tensor3 dg;
};

// Implementation interface for a metric family. Implementations are
// immutable after construction and must be safe to call concurrently.
class MetricModel {
 public:
  virtual ~MetricModel() = default;
  virtual Mat value(double t, const Vec& z) const = 0;
  virtual MetricJet jet(double t, const Vec& z) const = 0;
  virtual nlohmann::json descriptor() const = 0;
};

class MetricField {
 public:
  MetricField(int dim, double R, double T, std::shared_ptr<const MetricModel> model)
      : dim_(dim), R_(R), T_(T), model_(std::move(model)) {
    if (dim < 2 || dim > kMaxDim)
      throw ConfigError("metric dimension must lie in [2, " + std::to_string(kMaxDim) + "]");
    if (!(R > 0.0) || !(T > 0.0)) throw ConfigError("support radii R and T must be positive");
  }

  int dim() const { return dim_; }
  double support_radius() const { return R_; }
  double time_radius() const { return T_; }

  // True when the whole time slice is Euclidean.
  bool flat_slice(double t) const { return std::abs(t) >= T_; }

  Mat metric(double t, const Vec& z) const {
    if (flat_slice(t) || z.norm() >= R_) return identity(dim_);
    return model_->value(t, z);
  }

  MetricJet jet(double t, const Vec& z) const {
    if (flat_slice(t) || z.norm() >= R_) return {identity(dim_), Tensor3(dim_)};
    return model_->jet(t, z);
  }

  // Family evaluation without the support short-circuit; used to verify
  // that a constructed field really is Euclidean outside its support.
  Mat raw_metric(double t, const Vec& z) const { return model_->value(t, z); }

  // {"dim", "R", "T", "family", "params"}
  nlohmann::json descriptor() const {
    nlohmann::json d = model_->descriptor();
    d["dim"] = dim_;
    d["R"] = R_;
    d["T"] = T_;
    return d;
  }

  const std::shared_ptr<const MetricModel>& model() const { return model_; }

 private:
  int dim_;
  double R_, T_;
  std::shared_ptr<const MetricModel> model_;
};

// Parameters of the Gaussian-bump families:
// s(t, z) = envelope(t) * exp(-|z - c|^2 / w^2) * m(|z|^2 / R^2).
struct BumpParams {
  double amplitude = 0.1;
  Vec center;
  double width = 1.0;
  std::optional<double> time_width;
};

namespace detail {

inline nlohmann::json vec_to_json(const Vec& v) {
  nlohmann::json a = nlohmann::json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

inline nlohmann::json bump_params_json(const BumpParams& p) {
  nlohmann::json j{{"amplitude", p.amplitude}, {"center", vec_to_json(p.center)}, {"width", p.width}};
  if (p.time_width) j["time_width"] = *p.time_width;
  return j;
}

// Bump profile times amplitude, with spatial derivatives.
inline ScalarJet bump_profile(const BumpParams& p, double R, double T, double t, const Vec& z) {
  const int n = static_cast<int>(z.size());
  const double env = time_envelope(t, T, p.time_width);
  if (env == 0.0) return ScalarJet::constant(n, 0.0);
  const ScalarJet cut = ball_cutoff(z, Vec::Zero(n), R);
  if (cut.value == 0.0) return ScalarJet::constant(n, 0.0);
  return (p.amplitude * env) * (gaussian(z, p.center, p.width) * cut);
}

class FlatModel final : public MetricModel {
 public:
  explicit FlatModel(int n) : n_(n) {}
  Mat value(double, const Vec&) const override { return identity(n_); }
  MetricJet jet(double, const Vec&) const override { return {identity(n_), Tensor3(n_)}; }
  nlohmann::json descriptor() const override {
    return {{"family", "flat"}, {"params", nlohmann::json::object()}};
  }

 private:
  int n_;
};

// g = exp(2 phi) I with phi = amplitude * bump.
class ConformalBumpModel final : public MetricModel {
 public:
  ConformalBumpModel(int n, double R, double T, BumpParams p) : n_(n), R_(R), T_(T), p_(std::move(p)) {}

  Mat value(double t, const Vec& z) const override {
    const double phi = bump_profile(p_, R_, T_, t, z).value;
    return std::exp(2.0 * phi) * identity(n_);
  }

  MetricJet jet(double t, const Vec& z) const override {
    const ScalarJet phi = bump_profile(p_, R_, T_, t, z);
    const double e = std::exp(2.0 * phi.value);
    MetricJet j{e * identity(n_), Tensor3(n_)};
    for (int k = 0; k < n_; ++k) j.dg[k] = (2.0 * e * phi.grad[k]) * identity(n_);
    return j;
  }

  // Conformal exponent phi with derivatives; exposed for closed-form checks.
  ScalarJet phi(double t, const Vec& z) const { return bump_profile(p_, R_, T_, t, z); }

  nlohmann::json descriptor() const override {
    return {{"family", "conformal_bump"}, {"params", bump_params_json(p_)}};
  }

 private:
  int n_;
  double R_, T_;
  BumpParams p_;
};

// g = I + amplitude * bump * v v^T.
class RankOneBumpModel final : public MetricModel {
 public:
  RankOneBumpModel(int n, double R, double T, BumpParams p, Vec direction)
      : n_(n), R_(R), T_(T), p_(std::move(p)), v_(std::move(direction)) {}

  Mat value(double t, const Vec& z) const override {
    const double s = bump_profile(p_, R_, T_, t, z).value;
    return identity(n_) + s * (v_ * v_.transpose());
  }

  MetricJet jet(double t, const Vec& z) const override {
    const ScalarJet s = bump_profile(p_, R_, T_, t, z);
    const Mat vv = v_ * v_.transpose();
    MetricJet j{identity(n_) + s.value * vv, Tensor3(n_)};
    for (int k = 0; k < n_; ++k) j.dg[k] = s.grad[k] * vv;
    return j;
  }

  nlohmann::json descriptor() const override {
    nlohmann::json params = bump_params_json(p_);
    params["direction"] = vec_to_json(v_);
    return {{"family", "rank_one_bump"}, {"params", params}};
  }

 private:
  int n_;
  double R_, T_;
  BumpParams p_;
  Vec v_;
};

inline void check_bump(int n, const BumpParams& p) {
  if (p.center.size() != n) throw ConfigError("bump center has wrong dimension");
  if (!(p.width > 0.0)) throw ConfigError("bump width must be positive");
  if (p.time_width && !(*p.time_width > 0.0)) throw ConfigError("time_width must be positive");
}

}  // namespace detail

inline MetricField flat_metric(int n, double R, double T) {
  return {n, R, T, std::make_shared<detail::FlatModel>(n)};
}

inline MetricField conformal_bump(int n, double R, double T, BumpParams p) {
  if (p.center.size() == 0) p.center = Vec::Zero(n);
  detail::check_bump(n, p);
  return {n, R, T, std::make_shared<detail::ConformalBumpModel>(n, R, T, std::move(p))};
}

inline MetricField rank_one_bump(int n, double R, double T, BumpParams p, Vec direction) {
  if (p.center.size() == 0) p.center = Vec::Zero(n);
  detail::check_bump(n, p);
  if (direction.size() != n) throw ConfigError("rank-one direction has wrong dimension");
  return {n, R, T,
          std::make_shared<detail::RankOneBumpModel>(n, R, T, std::move(p), std::move(direction))};
}

struct MetricEval {
  Mat g;
  Mat g_inv;
};

// g(t, z) and its inverse; throws NonPositiveDefinite when g is not SPD.
inline MetricEval eval_metric(const MetricField& field, double t, const Vec& z) {
  Mat g = field.metric(t, z);
  g = 0.5 * (g + g.transpose());
  Eigen::LLT<Mat> llt(g);
  if (llt.info() != Eigen::Success)
    throw NonPositiveDefinite("metric is not positive definite at the evaluation point");
  Mat g_inv = llt.solve(identity(field.dim()));
  return {std::move(g), 0.5 * (g_inv + g_inv.transpose())};
}

// Christoffel symbols of the second kind from g and dg:
// Gamma^k_{ij} = 1/2 g^{kl} (d_i g_{lj} + d_j g_{li} - d_l g_{ij}).
inline Tensor3 christoffel_from_jet(const MetricJet& jet) {
  const int n = static_cast<int>(jet.g.rows());
  Tensor3 gamma(n);
  if (jet.dg.max_abs() == 0.0) return gamma;
  const Mat g_inv = jet.g.llt().solve(identity(n));
  // first kind: lowered[l](i, j) = 1/2 (d_i g_lj + d_j g_li - d_l g_ij)
  Tensor3 lowered(n);
  for (int l = 0; l < n; ++l)
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j)
        lowered[l](i, j) = 0.5 * (jet.dg[i](l, j) + jet.dg[j](l, i) - jet.dg[l](i, j));
  for (int k = 0; k < n; ++k)
    for (int l = 0; l < n; ++l) gamma[k] += g_inv(k, l) * lowered[l];
  return gamma;
}

inline Tensor3 christoffel(const MetricField& field, double t, const Vec& z) {
  return christoffel_from_jet(field.jet(t, z));
}

}  // namespace lenscat
