#pragma once

// Frozen-time geodesic flow on T^*R^n in Hamiltonian form, parametrised by
// g(t)-arc length, integrated with an embedded Dormand-Prince 8(5,3) pair.
//
// The raw Hamilton field of h = g^{ij} zeta_i zeta_j is
//   dz_k = 2 g^{lk} zeta_l,   dzeta_k = -d_k g^{ij} zeta_i zeta_j,
// which moves at g-speed 2|zeta|_g; it is divided by 2|zeta|_g here.

#include "lenscat/errors.hpp"
#include "lenscat/linalg.hpp"
#include "lenscat/metric.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

namespace lenscat {

// (t; z; zeta) with t frozen along the flow.
struct CotangentState {
  double t = 0.0;
  Vec z;
  Vec zeta;
};

struct PhaseRate {
  Vec dz;
  Vec dzeta;
};

// g^{ij}(t, z) zeta_i zeta_j
inline double energy(const MetricField& field, double t, const Vec& z, const Vec& zeta) {
  return zeta.dot(field.metric(t, z).llt().solve(zeta));
}

inline double energy(const MetricField& field, const CotangentState& s) { return energy(field, s.t, s.z, s.zeta); }

inline PhaseRate hamilton_rhs(const MetricField& field, double t, const Vec& z, const Vec& zeta) {
  if (zeta.norm() < 1e-14) throw ZeroMomentum("zero covector has no geodesic direction");
  const MetricJet j = field.jet(t, z);
  const Vec u = j.g.llt().solve(zeta);  // g^{-1} zeta
  const double speed = std::sqrt(zeta.dot(u));
  PhaseRate r{u / speed, Vec(z.size())};
  // -d_k g^{ij} zeta_i zeta_j = u^T (d_k g) u
  for (int k = 0; k < field.dim(); ++k) r.dzeta[k] = u.dot(j.dg[k] * u) / (2.0 * speed);
  return r;
}

inline PhaseRate hamilton_rhs(const MetricField& field, const CotangentState& s) {
  return hamilton_rhs(field, s.t, s.z, s.zeta);
}

// Stop conditions for integrate_ray.
struct ArcLengthBudget {
  double length;
};
struct ExitBall {
  double radius;
};
// Crossing of the hyperplane normal . z = offset.
struct PlaneCrossing {
  Vec normal;
  double offset = 0.0;
};
using StopCondition = std::variant<ArcLengthBudget, ExitBall, PlaneCrossing>;

struct IntegratorOptions {
  double abs_tol = 1e-10;
  double rel_tol = 1e-10;
  // Arc-length cap for event stops; defaults to 50 R.
  std::optional<double> max_length;
  // Step cap inside B_R; defaults to 0.1 R. Outside the ball a step may
  // also reach as far as the sphere, where the field is Euclidean.
  std::optional<double> max_step;
  bool renormalize_momentum = false;
  bool record_samples = true;
  double event_tol = 1e-12;
  long max_steps = 5'000'000;
};

struct TrajectorySample {
  double s = 0.0;
  Vec z;
  Vec zeta;
  double energy = 0.0;
};

struct Trajectory {
  double t = 0.0;
  std::vector<TrajectorySample> samples;
  double length = 0.0;
  bool exited = false;            // the stop condition was met
  bool degenerate_entry = false;  // started on the exit sphere pointing outward/tangentially
  double max_energy_drift = 0.0;  // max |h(s) - h(0)| / h(0)
  long accepted_steps = 0;
  long rejected_steps = 0;
  CotangentState final_state;
};

namespace detail {

using Phase = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, 2 * kMaxDim, 1>;

inline Phase pack(const Vec& z, const Vec& zeta) {
  Phase y(z.size() * 2);
  y << z, zeta;
  return y;
}

// Dormand-Prince 8(5,3) coefficients (Hairer, Norsett and Wanner).
namespace dop853 {
inline constexpr double kC[12] = {0.0, 0.05260015195876773, 0.0789002279381516, 0.1183503419072274, 0.2816496580927726, 0.3333333333333333, 0.25, 0.3076923076923077, 0.6512820512820513, 0.6, 0.8571428571428571, 1.0};
inline constexpr double kA[12][12] = {
    {0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {0.05260015195876773, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {0.0197250569845379, 0.0591751709536137, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {0.02958758547680685, 0.0, 0.08876275643042054, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {0.2413651341592667, 0.0, -0.8845494793282861, 0.924834003261792, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {0.037037037037037035, 0.0, 0.0, 0.17082860872947386, 0.12546768756682242, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {0.037109375, 0.0, 0.0, 0.17025221101954405, 0.06021653898045596, -0.017578125, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0},
    {0.03709200011850479, 0.0, 0.0, 0.17038392571223998, 0.10726203044637328, -0.015319437748624402, 0.008273789163814023, 0.0, 0.0, 0.0, 0.0, 0.0},
    {0.6241109587160757, 0.0, 0.0, -3.3608926294469414, -0.868219346841726, 27.59209969944671, 20.154067550477894, -43.48988418106996, 0.0, 0.0, 0.0, 0.0},
    {0.47766253643826434, 0.0, 0.0, -2.4881146199716677, -0.590290826836843, 21.230051448181193, 15.279233632882423, -33.28821096898486, -0.020331201708508627, 0.0, 0.0, 0.0},
    {-0.9371424300859873, 0.0, 0.0, 5.186372428844064, 1.0914373489967295, -8.149787010746927, -18.52006565999696, 22.739487099350505, 2.4936055526796523, -3.0467644718982196, 0.0, 0.0},
    {2.273310147516538, 0.0, 0.0, -10.53449546673725, -2.0008720582248625, -17.9589318631188, 27.94888452941996, -2.8589982771350235, -8.87285693353063, 12.360567175794303, 0.6433927460157636, 0.0},
};
inline constexpr double kB[12] = {0.054293734116568765, 0.0, 0.0, 0.0, 0.0, 4.450312892752409, 1.8915178993145003, -5.801203960010585, 0.3111643669578199, -0.1521609496625161, 0.20136540080403034, 0.04471061572777259};
inline constexpr double kE3[13] = {-0.18980075407240762, 0.0, 0.0, 0.0, 0.0, 4.450312892752409, 1.8915178993145003, -5.801203960010585, -0.4226823213237919, -0.1521609496625161, 0.20136540080403034, 0.02265179219836082, 0.0};
inline constexpr double kE5[13] = {0.01312004499419488, 0.0, 0.0, 0.0, 0.0, -1.2251564463762044, -0.4957589496572502, 1.6643771824549864, -0.35032884874997366, 0.3341791187130175, 0.08192320648511571, -0.022355307863886294, 0.0};
}  // namespace dop853

class Dop853 {
 public:
  static constexpr int kStages = 12;

  Dop853(const MetricField& field, double t) : field_(field), t_(t), n_(field.dim()) {}

  Phase rhs(const Phase& y) const {
    const PhaseRate r = hamilton_rhs(field_, t_, y.head(n_), y.tail(n_));
    return pack(r.dz, r.dzeta);
  }

  // One trial step from (y, f0 = rhs(y)); returns y1, f1 = rhs(y1) and the
  // fifth- and third-order error estimates.
  void step(const Phase& y, const Phase& f0, double h, Phase& y1, Phase& f1, Phase& err5, Phase& err3) const {
    using namespace dop853;
    std::array<Phase, kStages> k;
    k[0] = f0;
    for (int i = 1; i < kStages; ++i) {
      Phase acc = kA[i][0] * k[0];
      for (int j = 1; j < i; ++j)
        if (kA[i][j] != 0.0) acc += kA[i][j] * k[j];
      k[i] = rhs(y + h * acc);
    }
    Phase incr = kB[0] * k[0];
    for (int i = 1; i < kStages; ++i)
      if (kB[i] != 0.0) incr += kB[i] * k[i];
    y1 = y + h * incr;
    f1 = rhs(y1);
    err5 = kE5[kStages] * f1;
    err3 = kE3[kStages] * f1;
    for (int i = 0; i < kStages; ++i) {
      err5 += kE5[i] * k[i];
      err3 += kE3[i] * k[i];
    }
    err5 *= h;
    err3 *= h;
  }

 private:
  const MetricField& field_;
  double t_;
  int n_;
};

// Max over components of the fifth-order embedded estimate scaled by
// atol + rtol |y|. The third-order estimate only guards against a
// degenerate fifth-order one.
inline double error_norm(const Phase& err5, const Phase& err3, const Phase& y0, const Phase& y1, double atol,
                         double rtol) {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < err5.size(); ++i) {
    const double sc = atol + rtol * std::max(std::abs(y0[i]), std::abs(y1[i]));
    worst = std::max({worst, std::abs(err5[i]) / sc, 1e-2 * std::abs(err3[i]) / sc});
  }
  return worst;
}

// Cubic Hermite interpolant of the step, used only to bracket events.
inline Phase hermite(const Phase& y0, const Phase& f0, const Phase& y1, const Phase& f1, double h, double th) {
  const double t2 = th * th, t3 = t2 * th;
  return (2 * t3 - 3 * t2 + 1) * y0 + (t3 - 2 * t2 + th) * h * f0 + (-2 * t3 + 3 * t2) * y1 +
         (t3 - t2) * h * f1;
}

// Event function and its derivative along the flow, oriented so that the
// event fires when the value goes from negative to non-negative.
struct EventFn {
  enum class Kind { None, Ball, Plane } kind = Kind::None;
  double radius = 0.0;
  Vec normal;
  double offset = 0.0;
  double sign = 1.0;
  int n = 0;

  double value(const Phase& y) const {
    if (kind == Kind::Ball) return y.head(n).squaredNorm() - radius * radius;
    if (kind == Kind::Plane) return sign * (normal.dot(y.head(n)) - offset);
    return -1.0;
  }
  double rate(const Phase& y, const Phase& f) const {
    if (kind == Kind::Ball) return 2.0 * y.head(n).dot(f.head(n));
    if (kind == Kind::Plane) return sign * normal.dot(f.head(n));
    return 0.0;
  }
};

}  // namespace detail

// Integrates the unit-speed flow from `start` until `stop` is satisfied.
// Exit and plane events are located on the event surface to event_tol
// (relative to the field's R) by Newton refinement on the step length.
inline Trajectory integrate_ray(const MetricField& field, const CotangentState& start, const StopCondition& stop,
                                const IntegratorOptions& opt = {}) {
  using detail::Phase;
  const int n = field.dim();
  const double R = field.support_radius();
  const double max_length = opt.max_length.value_or(50.0 * R);
  const double max_step = opt.max_step.value_or(0.1 * R);
  if (!(max_step > 0.0)) throw std::invalid_argument("max_step must be positive");
  if (start.zeta.norm() < 1e-14) throw ZeroMomentum("zero covector has no geodesic direction");

  detail::Dop853 rk(field, start.t);
  Phase y = detail::pack(start.z, start.zeta);
  Phase f = rk.rhs(y);
  const double h0_energy = energy(field, start);

  Trajectory traj;
  traj.t = start.t;
  auto record = [&](double s, const Phase& yy, double e) {
    traj.max_energy_drift = std::max(traj.max_energy_drift, std::abs(e - h0_energy) / h0_energy);
    if (opt.record_samples) traj.samples.push_back({s, yy.head(n), yy.tail(n), e});
  };
  auto finish = [&](double s, const Phase& yy, bool exited) {
    traj.length = s;
    traj.exited = exited;
    traj.final_state = {start.t, yy.head(n), yy.tail(n)};
    return traj;
  };

  detail::EventFn ev;
  ev.n = n;
  double budget = std::numeric_limits<double>::infinity();
  double h = 0.02 * R;
  if (const auto* b = std::get_if<ArcLengthBudget>(&stop)) {
    budget = b->length;
    if (!(budget >= 0.0)) throw std::invalid_argument("arc-length budget must be non-negative");
  } else if (const auto* e = std::get_if<ExitBall>(&stop)) {
    ev.kind = detail::EventFn::Kind::Ball;
    ev.radius = e->radius;
  } else {
    const auto& p = std::get<PlaneCrossing>(stop);
    ev.kind = detail::EventFn::Kind::Plane;
    ev.normal = p.normal;
    ev.offset = p.offset;
  }

  record(0.0, y, h0_energy);
  double e0 = ev.value(y);
  const double scale = ev.kind == detail::EventFn::Kind::Ball ? ev.radius * ev.radius : std::max(1.0, R);
  if (ev.kind == detail::EventFn::Kind::Plane) {
    // Fire on leaving the starting side; a start on the plane uses the
    // direction of motion.
    const double side = ev.normal.dot(start.z) - ev.offset;
    const double dir = ev.normal.dot(f.head(n));
    ev.sign = (std::abs(side) > opt.event_tol * scale) ? (side > 0 ? -1.0 : 1.0) : (dir >= 0 ? 1.0 : -1.0);
    e0 = ev.value(y);
  }
  if (ev.kind != detail::EventFn::Kind::None && std::abs(e0) <= opt.event_tol * scale) {
    const double rate = ev.rate(y, f);
    if (ev.kind == detail::EventFn::Kind::Ball && rate >= 0.0) {
      traj.degenerate_entry = true;
      return finish(0.0, y, true);
    }
    // Starting on the surface moving inward: shorten the first step to a
    // fraction of the chord so a short chord cannot be stepped over.
    // For the ball, |rate| = 2 |z . v| is the flat chord length.
    if (ev.kind == detail::EventFn::Kind::Ball) h = std::min(h, 0.25 * std::abs(rate) + 1e-12 * R);
    e0 = -std::abs(e0) - std::numeric_limits<double>::min();
  } else if (ev.kind != detail::EventFn::Kind::None && e0 >= 0.0) {
    return finish(0.0, y, true);
  }

  double s = 0.0;
  const double h_min = 1e-14 * std::max(1.0, R);
  Phase y1, f1, err5, err3;
  for (long iter = 0; iter < opt.max_steps; ++iter) {
    if (budget < std::numeric_limits<double>::infinity()) {
      if (s >= budget) return finish(s, y, true);
      h = std::min(h, budget - s);
    } else if (s > max_length) {
      throw TrappedRay("ray did not reach its stop within arc length " + std::to_string(max_length), s);
    }
    h = std::min(h, std::max(max_step, y.head(n).norm() - R));

    rk.step(y, f, h, y1, f1, err5, err3);
    const double en = detail::error_norm(err5, err3, y, y1, opt.abs_tol, opt.rel_tol);
    if (!std::isfinite(en)) throw StepFailure("non-finite state during integration");
    if (en > 1.0) {
      ++traj.rejected_steps;
      h *= std::max(0.2, 0.9 * std::pow(en, -1.0 / 6.0));
      if (h < h_min) throw StepFailure("step size underflow");
      continue;
    }
    ++traj.accepted_steps;

    if (ev.kind != detail::EventFn::Kind::None) {
      // First sign change along the interpolant, checked on sub-intervals.
      constexpr int kSub = 8;
      double lo = 0.0, hi = -1.0;
      double prev = e0;
      for (int k = 1; k <= kSub; ++k) {
        const double th = static_cast<double>(k) / kSub;
        const double v = k == kSub ? ev.value(y1) : ev.value(detail::hermite(y, f, y1, f1, h, th));
        if (prev < 0.0 && v >= 0.0) {
          hi = th;
          break;
        }
        prev = v;
        lo = th;
      }
      if (hi > 0.0) {
        for (int it = 0; it < 60 && hi - lo > 1e-14; ++it) {
          const double mid = 0.5 * (lo + hi);
          if (ev.value(detail::hermite(y, f, y1, f1, h, mid)) >= 0.0) hi = mid;
          else lo = mid;
        }
        // Newton on the true step length.
        double hs = std::max(hi * h, 1e-300);
        Phase ys, fs, es5, es3;
        for (int it = 0; it < 30; ++it) {
          rk.step(y, f, hs, ys, fs, es5, es3);
          const double val = ev.value(ys);
          const double rate = ev.rate(ys, fs);
          if (rate == 0.0) break;
          const double dh = -val / rate;
          hs = std::clamp(hs + dh, 0.0, h);
          if (std::abs(dh) <= 1e-3 * opt.event_tol * std::max(1.0, R) || std::abs(val) <= 1e-3 * opt.event_tol * scale)
            break;
        }
        rk.step(y, f, hs, ys, fs, es5, es3);
        if (opt.renormalize_momentum) {
          const double e = energy(field, start.t, ys.head(n), ys.tail(n));
          ys.tail(n) *= std::sqrt(h0_energy / e);
        }
        s += hs;
        record(s, ys, energy(field, start.t, ys.head(n), ys.tail(n)));
        if (s > max_length)
          throw TrappedRay("ray did not reach its stop within arc length " + std::to_string(max_length), s);
        return finish(s, ys, true);
      }
      e0 = ev.value(y1);
    }

    s += h;
    y = y1;
    f = f1;
    double e = energy(field, start.t, y.head(n), y.tail(n));
    if (opt.renormalize_momentum) {
      y.tail(n) *= std::sqrt(h0_energy / e);
      f = rk.rhs(y);
      e = h0_energy;
    }
    record(s, y, e);
    h *= std::min(10.0, std::max(0.2, 0.9 * std::pow(std::max(en, 1e-16), -1.0 / 6.0)));
  }
  throw StepFailure("maximum number of integration steps exceeded");
}

// Trajectory as CSV: s, z_1..z_n, zeta_1..zeta_n, energy.
inline void write_trajectory_csv(std::ostream& os, const Trajectory& traj) {
  if (traj.samples.empty()) return;
  const int n = static_cast<int>(traj.samples.front().z.size());
  os << "s";
  for (int i = 1; i <= n; ++i) os << ",z_" << i;
  for (int i = 1; i <= n; ++i) os << ",zeta_" << i;
  os << ",energy\n";
  const auto old = os.precision(17);
  for (const auto& smp : traj.samples) {
    os << smp.s;
    for (int i = 0; i < n; ++i) os << ',' << smp.z[i];
    for (int i = 0; i < n; ++i) os << ',' << smp.zeta[i];
    os << ',' << smp.energy << '\n';
  }
  os.precision(old);
}

}  // namespace lenscat
