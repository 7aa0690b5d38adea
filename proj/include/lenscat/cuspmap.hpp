#pragma once

// The classical scattering map on 1-cusp data at infinity, the dictionaries
// between cusp data and boundary rays, and the lens-equivalence comparator.
//
// Convention (used at both ends, never twisted in stored data): for a free
// line {z0 + s v} in the time slice t,
//   y = v,  xi1c = -2 t,  eta1c = -(z0 - (z0 . v) v).

#include "lenscat/boundary.hpp"
#include "lenscat/errors.hpp"
#include "lenscat/metric.hpp"
#include "lenscat/parallel.hpp"
#include "lenscat/scattering.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <vector>

namespace lenscat {

inline CuspBoundaryPoint ray_to_cusp(double t, const Vec& z0, const Vec& v) {
  const Vec y = v / v.norm();
  Vec eta = -(z0 - z0.dot(y) * y);
  eta -= eta.dot(y) * y;
  return {y, -2.0 * t, eta};
}

inline constexpr double kGrazingTol = 1e-12;

// First crossing of the sphere |z| = R by the incoming line encoded in p.
inline BoundaryRay cusp_to_entry(const CuspBoundaryPoint& p, double R) {
  const Vec b = -p.eta1c;
  const double b2 = b.squaredNorm();
  if (std::sqrt(b2) >= R - kGrazingTol) throw MissesBall("free ray does not enter the ball");
  const Vec z = b - std::sqrt(R * R - b2) * p.y;
  return BoundaryRay::make(p.time(), z, p.y, R);
}

// Last crossing of the sphere by the outgoing line encoded in p.
inline BoundaryRay cusp_to_exit(const CuspBoundaryPoint& p, double R) {
  const Vec b = -p.eta1c;
  const double b2 = b.squaredNorm();
  if (b2 > R * R) throw MissesBall("free ray does not meet the ball");
  return {p.time(), b + std::sqrt(R * R - b2) * p.y, p.y, Orientation::Outward};
}

struct SojournGraphPoint {
  CuspBoundaryPoint incoming;
  CuspBoundaryPoint outgoing;
  double n1 = 0.0;      // minus the total sojourn time
  double length = 0.0;  // interior length of the traversal, 0 when the ray misses
  bool interacts = false;
};

// Cl_g(p) with the sojourn coordinate attached. Lines with |eta1c| >= R
// (grazing included) never enter the ball, so the map is the identity there.
inline SojournGraphPoint classical_scattering_map(const MetricField& field, const CuspBoundaryPoint& p,
                                                  const ScatterOptions& opt = {}) {
  const double R = field.support_radius();
  if (p.eta1c.norm() >= R - kGrazingTol) return {p, p, 0.0, 0.0, false};
  const BoundaryRay entry = cusp_to_entry(p, R);
  const ScatterResult res = scatter(field, entry, opt);
  return {p, ray_to_cusp(res.exit.t, res.exit.z, res.exit.v), -res.sojourn, res.length, true};
}

// Truncated scattering relation computed through infinity:
// extend the entry backwards to its cusp datum, apply Cl_g, and intersect
// the outgoing free line with the sphere at its last crossing.
inline BoundaryRay truncated_map_via_infinity(const MetricField& field, const BoundaryRay& entry,
                                              const ScatterOptions& opt = {}) {
  if (!entry.inward()) throw InvalidRay("truncated map needs an inward boundary ray");
  const CuspBoundaryPoint q = ray_to_cusp(entry.t, entry.z, entry.v);
  const SojournGraphPoint img = classical_scattering_map(field, q, opt);
  return cusp_to_exit(img.outgoing, field.support_radius());
}

struct LensDiscrepancy {
  double y_angle = 0.0;
  double xi = 0.0;
  double eta = 0.0;     // Euclidean, in length units
  double n1 = 0.0;      // absolute, in length units
  double length = 0.0;  // |l_g1 - l_g2| on the corresponding entry
};

struct LensSample {
  CuspBoundaryPoint point;
  std::optional<SojournGraphPoint> first, second;  // empty when trapped
  LensDiscrepancy diff;
  double score = 0.0;  // largest nondimensional discrepancy
};

struct LensReport {
  std::size_t samples = 0;
  LensDiscrepancy max;
  std::size_t trapped_first = 0, trapped_second = 0;
  std::optional<std::size_t> worst_index;
  std::optional<LensSample> worst;
  double tol = 0.0;
  bool equivalent = false;

  nlohmann::json to_json() const {
    auto cusp_json = [](const CuspBoundaryPoint& p) {
      return nlohmann::json{{"y", detail::vec_to_json(p.y)}, {"xi1c", p.xi1c}, {"eta1c", detail::vec_to_json(p.eta1c)}};
    };
    nlohmann::json j{{"samples", samples},
                     {"tol", tol},
                     {"equivalent", equivalent},
                     {"max_discrepancy",
                      {{"y_angle", max.y_angle},
                       {"xi1c", max.xi},
                       {"eta1c", max.eta},
                       {"n1", max.n1},
                       {"length", max.length}}},
                     {"trapped", {{"first", trapped_first}, {"second", trapped_second}}}};
    if (worst) {
      nlohmann::json w{{"index", *worst_index}, {"incoming", cusp_json(worst->point)}, {"score", worst->score}};
      if (worst->first) w["outgoing_first"] = cusp_json(worst->first->outgoing), w["n1_first"] = worst->first->n1;
      if (worst->second) w["outgoing_second"] = cusp_json(worst->second->outgoing), w["n1_second"] = worst->second->n1;
      j["worst"] = w;
    } else {
      j["worst"] = nullptr;
    }
    return j;
  }
};

// Compares the sojourn graphs of two metrics on the given cusp samples.
// Direction discrepancies are angles on the sphere, eta1c and n1 are
// divided by R, xi1c is compared as is; a single tol bounds all of them.
inline LensReport lens_equivalent(const MetricField& g1, const MetricField& g2,
                                  const std::vector<CuspBoundaryPoint>& samples, double tol, int workers = 1,
                                  const ScatterOptions& opt = {}) {
  if (g1.dim() != g2.dim() || g1.support_radius() != g2.support_radius() ||
      g1.time_radius() != g2.time_radius())
    throw ConfigError("compared metrics must share dim, R and T");
  const double R = g1.support_radius();
  auto run = [&](const MetricField& g, const CuspBoundaryPoint& p) -> std::optional<SojournGraphPoint> {
    try {
      return classical_scattering_map(g, p, opt);
    } catch (const TrappedRay&) {
      return std::nullopt;
    } catch (const StepFailure&) {
      return std::nullopt;
    }
  };
  const auto results = parallel_map(samples.size(), workers, [&](std::size_t i) {
    LensSample s{samples[i], run(g1, samples[i]), run(g2, samples[i]), {}, 0.0};
    if (s.first && s.second) {
      const auto& a = s.first->outgoing;
      const auto& b = s.second->outgoing;
      s.diff = {sphere_angle(a.y, b.y), std::abs(a.xi1c - b.xi1c), (a.eta1c - b.eta1c).norm(),
                std::abs(s.first->n1 - s.second->n1), std::abs(s.first->length - s.second->length)};
      s.score = std::max({s.diff.y_angle, s.diff.xi, s.diff.eta / R, s.diff.n1 / R});
    } else {
      s.score = std::numeric_limits<double>::infinity();
    }
    return s;
  });

  LensReport rep;
  rep.samples = samples.size();
  rep.tol = tol;
  double worst_score = -1.0;
  for (std::size_t i = 0; i < results.size(); ++i) {
    const LensSample& s = results[i];
    if (!s.first) ++rep.trapped_first;
    if (!s.second) ++rep.trapped_second;
    rep.max.y_angle = std::max(rep.max.y_angle, s.diff.y_angle);
    rep.max.xi = std::max(rep.max.xi, s.diff.xi);
    rep.max.eta = std::max(rep.max.eta, s.diff.eta);
    rep.max.n1 = std::max(rep.max.n1, s.diff.n1);
    rep.max.length = std::max(rep.max.length, s.diff.length);
    if (s.score > worst_score) {
      worst_score = s.score;
      rep.worst_index = i;
      rep.worst = s;
    }
  }
  rep.equivalent = rep.trapped_first == 0 && rep.trapped_second == 0 && worst_score <= tol;
  return rep;
}

// Graph rows: y_in, xi1c_in, eta1c_in, y_out, xi1c_out, eta1c_out, n1.
inline void write_graph_csv_header(std::ostream& os, int n) {
  auto block = [&](const char* y, const char* xi, const char* eta) {
    for (int i = 1; i <= n; ++i) os << y << '_' << i << ',';
    os << xi << ',';
    for (int i = 1; i <= n; ++i) os << eta << '_' << i << ',';
  };
  block("y_in", "xi1c_in", "eta1c_in");
  block("y_out", "xi1c_out", "eta1c_out");
  os << "n1\n";
}

inline void write_graph_csv_row(std::ostream& os, const SojournGraphPoint& g) {
  const auto old = os.precision(17);
  for (const CuspBoundaryPoint* p : {&g.incoming, &g.outgoing}) {
    for (Eigen::Index i = 0; i < p->y.size(); ++i) os << p->y[i] << ',';
    os << p->xi1c << ',';
    for (Eigen::Index i = 0; i < p->eta1c.size(); ++i) os << p->eta1c[i] << ',';
  }
  os << g.n1 << '\n';
  os.precision(old);
}

}  // namespace lenscat
