#pragma once

// Lens data on the sphere |z| = R: the scattering relation, interior
// geodesic lengths, total sojourn times and the non-trapping certificate.

#include "lenscat/boundary.hpp"
#include "lenscat/errors.hpp"
#include "lenscat/flow.hpp"
#include "lenscat/metric.hpp"
#include "lenscat/parallel.hpp"

#include <json.hpp>

#include <cmath>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace lenscat {

struct ScatterOptions {
  IntegratorOptions integrator;
  bool keep_trajectory = false;
};

struct ScatterResult {
  BoundaryRay entry;
  BoundaryRay exit;
  double length = 0.0;
  double sojourn = 0.0;
  bool flat_slice = false;  // answered by the straight chord, no integration
  std::optional<Trajectory> trajectory;
};

// -(z' . v') + length + z . v for a traversal from (z, v) to (z', v').
inline double sojourn_from_exit(const BoundaryRay& entry, const BoundaryRay& exit, double length) {
  return -exit.z.dot(exit.v) + length + entry.z.dot(entry.v);
}

// Traces the frozen-time geodesic entering at `entry` to its first exit
// from B_R(0). Throws TrappedRay when no exit happens within the arc-length
// cap (default 50 R).
inline ScatterResult scatter(const MetricField& field, const BoundaryRay& entry, const ScatterOptions& opt = {}) {
  if (!entry.inward()) throw InvalidRay("scattering needs an inward boundary ray");
  if (entry.z.size() != field.dim()) throw InvalidRay("boundary ray dimension does not match the metric");
  const double R = field.support_radius();
  ScatterResult res;
  res.entry = entry;
  if (field.flat_slice(entry.t)) {
    res.flat_slice = true;
    res.length = -2.0 * entry.z.dot(entry.v);
    res.exit = {entry.t, entry.z + res.length * entry.v, entry.v, Orientation::Outward};
    res.sojourn = sojourn_from_exit(res.entry, res.exit, res.length);
    return res;
  }
  IntegratorOptions iopt = opt.integrator;
  iopt.record_samples = opt.keep_trajectory;
  // g = I on the sphere, so the unit covector equals the unit vector.
  Trajectory tr = integrate_ray(field, {entry.t, entry.z, entry.v}, ExitBall{R}, iopt);
  const CotangentState& fin = tr.final_state;
  res.length = tr.length;
  res.exit = {entry.t, fin.z, fin.zeta / fin.zeta.norm(), Orientation::Outward};
  res.sojourn = sojourn_from_exit(res.entry, res.exit, res.length);
  if (opt.keep_trajectory) res.trajectory = std::move(tr);
  return res;
}

inline BoundaryRay scattering_relation(const MetricField& field, const BoundaryRay& entry, const ScatterOptions& opt = {}) {
  return scatter(field, entry, opt).exit;
}

inline double geodesic_length(const MetricField& field, const BoundaryRay& entry, const ScatterOptions& opt = {}) {
  return scatter(field, entry, opt).length;
}

inline double sojourn_closed(const MetricField& field, const BoundaryRay& entry, const ScatterOptions& opt = {}) {
  return scatter(field, entry, opt).sojourn;
}

struct SojournLimit {
  double value = 0.0;         // bracketed expression at (s_max, -s_max)
  double residual = 0.0;      // value - extrapolated
  double extrapolated = 0.0;  // Richardson limit in 1/s_max from s_max, 2 s_max, 4 s_max
};

// Renormalised length s - s' - 1/x(gamma(s)) - 1/x(gamma(s')) with
// x = (1 + t^2 + |z|^2)^(-1/2), evaluated by integrating the flow out to arc
// length s_max beyond the entry point in both directions.
inline double sojourn_bracket(const MetricField& field, const BoundaryRay& entry, double s_max,
                              const ScatterOptions& opt = {}) {
  IntegratorOptions iopt = opt.integrator;
  iopt.record_samples = false;
  const Trajectory fwd = integrate_ray(field, {entry.t, entry.z, entry.v}, ArcLengthBudget{s_max}, iopt);
  const Trajectory bwd = integrate_ray(field, {entry.t, entry.z, Vec(-entry.v)}, ArcLengthBudget{s_max}, iopt);
  const double tt = 1.0 + entry.t * entry.t;
  const double far_plus = std::sqrt(tt + fwd.final_state.z.squaredNorm());
  const double far_minus = std::sqrt(tt + bwd.final_state.z.squaredNorm());
  return (fwd.length + bwd.length) - far_plus - far_minus;
}

inline SojournLimit sojourn_limit(const MetricField& field, const BoundaryRay& entry, double s_max,
                                  const ScatterOptions& opt = {}) {
  if (!entry.inward()) throw InvalidRay("sojourn needs an inward boundary ray");
  if (!(s_max >= 10.0 * field.support_radius())) throw std::invalid_argument("s_max must be at least 10 R");
  const ScatterResult inside = scatter(field, entry, opt);  // TrappedRay surfaces here
  if (!(s_max > inside.length)) throw std::invalid_argument("s_max must exceed the interior length");
  const double v1 = sojourn_bracket(field, entry, s_max, opt);
  const double v2 = sojourn_bracket(field, entry, 2.0 * s_max, opt);
  const double v4 = sojourn_bracket(field, entry, 4.0 * s_max, opt);
  // V(S) = L + a/S + b/S^2 + ...; two Richardson levels.
  const double limit = (8.0 * v4 - 6.0 * v2 + v1) / 3.0;
  return {v1, v1 - limit, limit};
}

struct TrappedEntry {
  std::size_t index = 0;
  BoundaryRay entry;
  double length = 0.0;
};

struct NonTrappingReport {
  std::size_t samples = 0;
  double max_length = 0.0;
  std::size_t trapped = 0;
  std::size_t failures = 0;  // other integration failures
  std::vector<TrappedEntry> offending;
  double length_cap = 0.0;
  bool certificate = false;

  nlohmann::json to_json() const;
};

inline nlohmann::json ray_json(const BoundaryRay& r) {
  return {{"t", r.t}, {"z", detail::vec_to_json(r.z)}, {"v", detail::vec_to_json(r.v)}};
}

inline nlohmann::json NonTrappingReport::to_json() const {
  nlohmann::json off = nlohmann::json::array();
  for (const auto& o : offending)
    off.push_back({{"index", o.index}, {"entry", ray_json(o.entry)}, {"length", o.length}});
  return {{"samples", samples},   {"max_length", max_length}, {"trapped", trapped},
          {"failures", failures}, {"length_cap", length_cap}, {"certificate", certificate},
          {"offending", off}};
}

// Runs every entry to its exit with the given arc-length cap. Failures are
// recorded, never thrown.
inline NonTrappingReport check_non_trapping(const MetricField& field, const std::vector<BoundaryRay>& entries,
                                            double length_cap, int workers = 1, const ScatterOptions& opt = {}) {
  struct Outcome {
    double length = 0.0;
    int status = 0;  // 0 ok, 1 trapped, 2 other failure
  };
  ScatterOptions o = opt;
  o.integrator.max_length = length_cap;
  const auto outcomes = parallel_map(entries.size(), workers, [&](std::size_t i) {
    try {
      return Outcome{scatter(field, entries[i], o).length, 0};
    } catch (const TrappedRay& e) {
      return Outcome{e.length(), 1};
    } catch (const Error&) {
      return Outcome{std::numeric_limits<double>::quiet_NaN(), 2};
    }
  });
  NonTrappingReport rep;
  rep.samples = entries.size();
  rep.length_cap = length_cap;
  for (std::size_t i = 0; i < outcomes.size(); ++i) {
    const Outcome& oc = outcomes[i];
    if (oc.status == 0) {
      rep.max_length = std::max(rep.max_length, oc.length);
    } else {
      if (oc.status == 1) ++rep.trapped;
      else ++rep.failures;
      rep.offending.push_back({i, entries[i], oc.length});
    }
  }
  rep.certificate = rep.trapped == 0 && rep.failures == 0;
  return rep;
}

// Lens-data rows: t, z_in, v_in, z_out, v_out, length, sojourn.
inline void write_lens_csv_header(std::ostream& os, int n) {
  os << "t";
  for (const char* name : {"z_in", "v_in", "z_out", "v_out"})
    for (int i = 1; i <= n; ++i) os << ',' << name << '_' << i;
  os << ",length,sojourn\n";
}

inline void write_lens_csv_row(std::ostream& os, const ScatterResult& r) {
  const auto old = os.precision(17);
  os << r.entry.t;
  for (const Vec* v : {&r.entry.z, &r.entry.v, &r.exit.z, &r.exit.v})
    for (Eigen::Index i = 0; i < v->size(); ++i) os << ',' << (*v)[i];
  os << ',' << r.length << ',' << r.sojourn << '\n';
  os.precision(old);
}

}  // namespace lenscat
