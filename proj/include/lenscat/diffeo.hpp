#pragma once

// Time-slice preserving diffeomorphisms psi(t, z) = (t, psi_1(t, z)) that are
// the identity outside a compact set. Builtins are time-1 maps of a fixed-step
// RK4 discretisation of a compactly supported vector field; the discrete map
// is itself a smooth diffeomorphism, and its Jacobian and second derivatives
// are propagated exactly through the stages.

#include "lenscat/errors.hpp"
#include "lenscat/linalg.hpp"
#include "lenscat/profile.hpp"

#include <json.hpp>

#include <memory>
#include <optional>
#include <string>
#include <utility>

namespace lenscat {

// psi_1, its spatial Jacobian J(a, j) = d psi_a / d z_j and second
// derivatives H[a](j, k) = d^2 psi_a / d z_j d z_k.
struct DiffeoJet {
  Vec value;
  Mat jacobian;
  Tensor3 hessian;

  static DiffeoJet identity_at(const Vec& z) {
    const int n = static_cast<int>(z.size());
    return {z, Mat::Identity(n, n), Tensor3(n)};
  }
};

inline DiffeoJet& axpy(DiffeoJet& y, double a, const DiffeoJet& x) {
  y.value += a * x.value;
  y.jacobian += a * x.jacobian;
  for (int k = 0; k < y.hessian.dim; ++k) y.hessian[k] += a * x.hessian[k];
  return y;
}

class DiffeoModel {
 public:
  virtual ~DiffeoModel() = default;
  virtual DiffeoJet jet(double t, const Vec& z) const = 0;
  // Value and Jacobian only; the hessian field is left zero.
  virtual DiffeoJet first_jet(double t, const Vec& z) const { return jet(t, z); }
  virtual nlohmann::json descriptor() const = 0;
};

class DiffeoField {
 public:
  DiffeoField(int dim, double R, double T, std::shared_ptr<const DiffeoModel> model)
      : dim_(dim), R_(R), T_(T), model_(std::move(model)) {
    if (dim < 2 || dim > kMaxDim) throw ConfigError("diffeomorphism dimension out of range");
    if (!(R > 0.0) || !(T > 0.0)) throw ConfigError("diffeomorphism support radii must be positive");
  }

  int dim() const { return dim_; }
  double support_radius() const { return R_; }
  double time_radius() const { return T_; }

  DiffeoJet jet(double t, const Vec& z) const { return model_->jet(t, z); }
  DiffeoJet first_jet(double t, const Vec& z) const { return model_->first_jet(t, z); }
  Vec psi1(double t, const Vec& z) const { return first_jet(t, z).value; }
  Mat jacobian(double t, const Vec& z) const { return first_jet(t, z).jacobian; }

  // Solves psi_1(t, x) = y by Newton iteration started at x = y.
  Vec inverse(double t, const Vec& y, double tol = 1e-14, int max_iter = 50) const {
    Vec x = y;
    for (int it = 0; it < max_iter; ++it) {
      const DiffeoJet j = first_jet(t, x);
      const Vec r = j.value - y;
      if (r.norm() <= tol * std::max(1.0, y.norm())) return x;
      x -= j.jacobian.partialPivLu().solve(r);
    }
    throw Error("diffeomorphism inverse did not converge");
  }

  nlohmann::json descriptor() const {
    nlohmann::json d = model_->descriptor();
    d["dim"] = dim_;
    d["R"] = R_;
    d["T"] = T_;
    return d;
  }

 private:
  int dim_;
  double R_, T_;
  std::shared_ptr<const DiffeoModel> model_;
};

namespace detail {

// Compactly supported generator X(t, z) = amplitude * envelope(t) * b(z) * w(z)
// where b is a ball cutoff of radius rho around c, optionally multiplied by
// exp(-|z - c|^2 / width^2), and w is either a constant direction (shear) or a
// rotation of z - c in a coordinate plane (swirl).
struct GeneratorParams {
  double amplitude = 0.2;
  Vec center;
  double radius = 1.0;
  std::optional<double> width;
  std::optional<double> time_width;
  Vec direction;           // shear only
  int plane_i = 0, plane_j = 1;  // swirl only
  int steps = 16;
};

class FlowDiffeoModel final : public DiffeoModel {
 public:
  enum class Kind { Shear, Swirl };

  FlowDiffeoModel(Kind kind, int n, double T, GeneratorParams p)
      : kind_(kind), n_(n), T_(T), p_(std::move(p)) {}

  DiffeoJet jet(double t, const Vec& z) const override { return evaluate<true>(t, z); }
  DiffeoJet first_jet(double t, const Vec& z) const override { return evaluate<false>(t, z); }

  template <bool H>
  DiffeoJet evaluate(double t, const Vec& z) const {
    const double env = p_.amplitude * time_envelope(t, T_, p_.time_width);
    if (env == 0.0 || (z - p_.center).norm() >= p_.radius) return DiffeoJet::identity_at(z);
    switch (n_) {
      case 2: return integrate<2, H>(env, z);
      case 3: return integrate<3, H>(env, z);
      default: return integrate<4, H>(env, z);
    }
  }

  template <int N, bool H>
  DiffeoJet integrate(double env, const Vec& z) const {
    const double h = 1.0 / p_.steps;
    RawJet y{};
    for (int i = 0; i < N; ++i) {
      y.v[i] = z[i];
      y.J[i][i] = 1.0;
    }
    RawJet k1, k2, k3, k4, tmp;
    for (int s = 0; s < p_.steps; ++s) {
      field<N, H>(env, y, k1);
      combine<N, H>(tmp, y, 0.5 * h, k1);
      field<N, H>(env, tmp, k2);
      combine<N, H>(tmp, y, 0.5 * h, k2);
      field<N, H>(env, tmp, k3);
      combine<N, H>(tmp, y, h, k3);
      field<N, H>(env, tmp, k4);
      combine<N, H>(y, y, h / 6.0, k1);
      combine<N, H>(y, y, h / 3.0, k2);
      combine<N, H>(y, y, h / 3.0, k3);
      combine<N, H>(y, y, h / 6.0, k4);
    }
    DiffeoJet out{Vec(N), Mat(N, N), Tensor3(N)};
    for (int a = 0; a < N; ++a) {
      out.value[a] = y.v[a];
      for (int j = 0; j < N; ++j) {
        out.jacobian(a, j) = y.J[a][j];
        for (int k = 0; k < N; ++k) out.hessian[a](j, k) = y.H[a][j][k];
      }
    }
    return out;
  }

  nlohmann::json descriptor() const override {
    auto to_json = [](const Vec& v) {
      nlohmann::json a = nlohmann::json::array();
      for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
      return a;
    };
    nlohmann::json params{{"amplitude", p_.amplitude},
                          {"center", to_json(p_.center)},
                          {"radius", p_.radius},
                          {"steps", p_.steps}};
    if (p_.width) params["width"] = *p_.width;
    if (p_.time_width) params["time_width"] = *p_.time_width;
    if (kind_ == Kind::Shear) {
      params["direction"] = to_json(p_.direction);
      return {{"family", "shear"}, {"params", params}};
    }
    params["plane"] = {p_.plane_i, p_.plane_j};
    return {{"family", "swirl"}, {"params", params}};
  }

 private:
  struct RawJet {
    double v[kMaxDim] = {};
    double J[kMaxDim][kMaxDim] = {};
    double H[kMaxDim][kMaxDim][kMaxDim] = {};
  };

  // out = y + a * x; out may alias y.
  template <int N, bool H>
  static void combine(RawJet& out, const RawJet& y, double a, const RawJet& x) {
    for (int i = 0; i < N; ++i) {
      out.v[i] = y.v[i] + a * x.v[i];
      for (int j = 0; j < N; ++j) {
        out.J[i][j] = y.J[i][j] + a * x.J[i][j];
        if constexpr (H)
          for (int k = 0; k < N; ++k) out.H[i][j][k] = y.H[i][j][k] + a * x.H[i][j][k];
      }
    }
  }

  // Pushes a jet through the generator: value X(y), first derivative DX J,
  // second derivative DX H + J^T D^2X_a J.
  template <int N, bool H>
  void field(double env, const RawJet& y, RawJet& out) const {
    constexpr int n = N;
    double d[kMaxDim], w[kMaxDim], gb[kMaxDim], hb[kMaxDim][kMaxDim];
    double omega[kMaxDim][kMaxDim] = {};
    double r2 = 0.0;
    for (int i = 0; i < n; ++i) {
      d[i] = y.v[i] - p_.center[i];
      r2 += d[i] * d[i];
    }
    const double inv_r2 = 1.0 / (p_.radius * p_.radius);
    const MollifierValue mq = mollifier_q(r2 * inv_r2);
    if (mq.m == 0.0) {
      out = RawJet{};
      return;
    }
    // b = e * m with e the optional Gaussian; e' = e1 e d, e'' = e (e2 d d^T + e1 I)
    double e = 1.0, e1 = 0.0, e2 = 0.0;
    if (p_.width) {
      const double inv_w2 = 1.0 / (*p_.width * *p_.width);
      e = std::exp(-r2 * inv_w2);
      e1 = -2.0 * inv_w2;
      e2 = 4.0 * inv_w2 * inv_w2;
    }
    const double c1 = 2.0 * inv_r2 * mq.dm;
    const double c2 = 4.0 * inv_r2 * inv_r2 * mq.d2m;
    // grad b = (m e1 + c1) e d, hess b = e (m e2 + 2 c1 e1 + c2) d d^T + e (m e1 + c1) I
    const double g1 = e * (mq.m * e1 + c1);
    const double g2 = e * (mq.m * e2 + 2.0 * c1 * e1 + c2);
    for (int i = 0; i < n; ++i) {
      gb[i] = g1 * d[i];
      for (int j = 0; j < n; ++j) hb[i][j] = g2 * d[i] * d[j] + (i == j ? g1 : 0.0);
    }
    if (kind_ == Kind::Shear) {
      for (int i = 0; i < n; ++i) w[i] = p_.direction[i];
    } else {
      omega[p_.plane_i][p_.plane_j] = -1.0;
      omega[p_.plane_j][p_.plane_i] = 1.0;
      for (int i = 0; i < n; ++i) w[i] = 0.0;
      w[p_.plane_i] = -d[p_.plane_j];
      w[p_.plane_j] = d[p_.plane_i];
    }
    const double b = e * mq.m;
    double dx[kMaxDim][kMaxDim];
    for (int a = 0; a < n; ++a) {
      out.v[a] = env * b * w[a];
      for (int c = 0; c < n; ++c) dx[a][c] = env * (w[a] * gb[c] + b * omega[a][c]);
    }
    for (int a = 0; a < n; ++a)
      for (int j = 0; j < n; ++j) {
        double acc = 0.0;
        for (int c = 0; c < n; ++c) acc += dx[a][c] * y.J[c][j];
        out.J[a][j] = acc;
      }
    if constexpr (!H) return;
    for (int a = 0; a < n; ++a) {
      // D^2 X_a(p, q) = env (d_pq b w_a + d_p b Omega_aq + d_q b Omega_ap)
      double d2[kMaxDim][kMaxDim];
      for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q)
          d2[p][q] = env * (w[a] * hb[p][q] + gb[p] * omega[a][q] + gb[q] * omega[a][p]);
      double d2j[kMaxDim][kMaxDim];  // D^2X_a J
      for (int p = 0; p < n; ++p)
        for (int k = 0; k < n; ++k) {
          double acc = 0.0;
          for (int q = 0; q < n; ++q) acc += d2[p][q] * y.J[q][k];
          d2j[p][k] = acc;
        }
      for (int j = 0; j < n; ++j)
        for (int k = j; k < n; ++k) {
          double acc = 0.0;
          for (int p = 0; p < n; ++p) acc += y.J[p][j] * d2j[p][k];
          for (int c = 0; c < n; ++c) acc += dx[a][c] * y.H[c][j][k];
          out.H[a][j][k] = acc;
          out.H[a][k][j] = acc;
        }
    }
  }

  Kind kind_;
  int n_;
  double T_;
  GeneratorParams p_;
};

class IdentityDiffeoModel final : public DiffeoModel {
 public:
  DiffeoJet jet(double, const Vec& z) const override { return DiffeoJet::identity_at(z); }
  nlohmann::json descriptor() const override {
    return {{"family", "identity"}, {"params", nlohmann::json::object()}};
  }
};

// (outer o inner)(z) = outer(inner(z)).
class ComposedDiffeoModel final : public DiffeoModel {
 public:
  ComposedDiffeoModel(DiffeoField outer, DiffeoField inner)
      : outer_(std::move(outer)), inner_(std::move(inner)) {}

  DiffeoJet jet(double t, const Vec& z) const override {
    const DiffeoJet in = inner_.jet(t, z);
    const DiffeoJet out = outer_.jet(t, in.value);
    const int n = static_cast<int>(z.size());
    DiffeoJet r{out.value, out.jacobian * in.jacobian, Tensor3(n)};
    for (int a = 0; a < n; ++a) {
      Mat ha = in.jacobian.transpose() * out.hessian[a] * in.jacobian;
      for (int b = 0; b < n; ++b) ha += out.jacobian(a, b) * in.hessian[b];
      r.hessian[a] = ha;
    }
    return r;
  }

  DiffeoJet first_jet(double t, const Vec& z) const override {
    const DiffeoJet in = inner_.first_jet(t, z);
    const DiffeoJet out = outer_.first_jet(t, in.value);
    return {out.value, out.jacobian * in.jacobian, Tensor3(static_cast<int>(z.size()))};
  }

  nlohmann::json descriptor() const override {
    return {{"family", "compose"},
            {"params", {{"outer", outer_.descriptor()}, {"inner", inner_.descriptor()}}}};
  }

 private:
  DiffeoField outer_, inner_;
};

inline void check_generator(int n, const GeneratorParams& p) {
  if (p.center.size() != n) throw ConfigError("diffeomorphism center has wrong dimension");
  if (!(p.radius > 0.0)) throw ConfigError("diffeomorphism radius must be positive");
  if (p.width && !(*p.width > 0.0)) throw ConfigError("diffeomorphism width must be positive");
  if (p.steps < 1) throw ConfigError("diffeomorphism steps must be >= 1");
}

}  // namespace detail

using detail::GeneratorParams;

inline DiffeoField identity_diffeo(int n, double R, double T) {
  return {n, R, T, std::make_shared<detail::IdentityDiffeoModel>()};
}

// Time-1 map of X = amplitude * envelope(t) * b(z) * direction.
inline DiffeoField shear_diffeo(int n, double R, double T, GeneratorParams p) {
  if (p.center.size() == 0) p.center = Vec::Zero(n);
  detail::check_generator(n, p);
  if (p.direction.size() != n) throw ConfigError("shear direction has wrong dimension");
  return {n, R, T,
          std::make_shared<detail::FlowDiffeoModel>(detail::FlowDiffeoModel::Kind::Shear, n, T,
                                                    std::move(p))};
}

// Time-1 map of a rotation field in coordinate plane (plane_i, plane_j).
inline DiffeoField swirl_diffeo(int n, double R, double T, GeneratorParams p) {
  if (p.center.size() == 0) p.center = Vec::Zero(n);
  detail::check_generator(n, p);
  if (p.plane_i == p.plane_j || p.plane_i < 0 || p.plane_j < 0 || p.plane_i >= n || p.plane_j >= n)
    throw ConfigError("swirl plane indices invalid");
  return {n, R, T,
          std::make_shared<detail::FlowDiffeoModel>(detail::FlowDiffeoModel::Kind::Swirl, n, T,
                                                    std::move(p))};
}

// psi o chi
inline DiffeoField compose(const DiffeoField& psi, const DiffeoField& chi) {
  if (psi.dim() != chi.dim()) throw ConfigError("cannot compose diffeomorphisms of different dimension");
  return {psi.dim(), std::max(psi.support_radius(), chi.support_radius()),
          std::max(psi.time_radius(), chi.time_radius()),
          std::make_shared<detail::ComposedDiffeoModel>(psi, chi)};
}

}  // namespace lenscat
