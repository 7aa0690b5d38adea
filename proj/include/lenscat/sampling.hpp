#pragma once

// Deterministic sampling of the inward boundary bundle and of 1-cusp data.
// Lattices use Fibonacci/sunflower constructions; random samplers use a
// seeded mt19937_64 with an explicit uniform mapping so the streams are
// identical across standard libraries.

#include "lenscat/boundary.hpp"
#include "lenscat/linalg.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace lenscat {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Box-Muller; one deviate per call keeps the stream simple to reason about.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }

  Vec unit_vector(int n) {
    Vec v(n);
    double norm = 0.0;
    while (norm < 1e-8) {
      for (int i = 0; i < n; ++i) v[i] = normal();
      norm = v.norm();
    }
    return v / norm;
  }

 private:
  std::mt19937_64 eng_;
};

// Orthonormal basis of the complement of the unit vector u, as columns.
inline Mat orthonormal_complement(const Vec& u) {
  const int n = static_cast<int>(u.size());
  const Mat column = u;
  Eigen::HouseholderQR<Mat> qr(column);
  const Mat q = qr.householderQ() * Mat::Identity(n, n);
  return q.rightCols(n - 1);
}

namespace detail {

inline double radical_inverse(std::uint64_t i, std::uint64_t base) {
  double inv = 1.0 / static_cast<double>(base), f = inv, r = 0.0;
  while (i > 0) {
    r += f * static_cast<double>(i % base);
    i /= base;
    f *= inv;
  }
  return r;
}

inline constexpr std::uint64_t kPrimes[] = {2, 3, 5, 7, 11, 13, 17, 19};

// Quasi-random point of the cube [0, 1)^m (Halton).
inline Vec halton(std::uint64_t i, int m) {
  Vec v(m);
  for (int k = 0; k < m; ++k) v[k] = radical_inverse(i + 1, kPrimes[k]);
  return v;
}

inline const double kGoldenAngle = std::numbers::pi * (3.0 - std::sqrt(5.0));

}  // namespace detail

// Near-uniform points on S^{n-1}.
inline std::vector<Vec> fibonacci_sphere(int n, int count) {
  std::vector<Vec> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    if (n == 2) {
      const double a = 2.0 * std::numbers::pi * (k + 0.5) / count;
      out.push_back(make_vec({std::cos(a), std::sin(a)}));
    } else if (n == 3) {
      const double zc = 1.0 - 2.0 * (k + 0.5) / count;
      const double r = std::sqrt(std::max(0.0, 1.0 - zc * zc));
      const double a = k * detail::kGoldenAngle;
      out.push_back(make_vec({r * std::cos(a), r * std::sin(a), zc}));
    } else {
      // Halton points in the unit ball, projected radially.
      Vec v;
      std::uint64_t i = static_cast<std::uint64_t>(k);
      do {
        v = 2.0 * detail::halton(i, n) - Vec::Ones(n);
        i += static_cast<std::uint64_t>(count);
      } while (v.norm() > 1.0 || v.norm() < 1e-3);
      out.push_back(v.normalized());
    }
  }
  return out;
}

// Directions in the open hemisphere around the unit vector `axis`.
inline std::vector<Vec> hemisphere_lattice(const Vec& axis, int count) {
  const int n = static_cast<int>(axis.size());
  const Mat perp = orthonormal_complement(axis);
  std::vector<Vec> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    if (n == 2) {
      const double a = -0.5 * std::numbers::pi + std::numbers::pi * (k + 0.5) / count;
      out.push_back(std::cos(a) * axis + std::sin(a) * perp.col(0));
    } else {
      const double c = 1.0 - (k + 0.5) / count;  // cos of angle to axis
      const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
      Vec tangent;
      if (n == 3) {
        const double a = k * detail::kGoldenAngle;
        tangent = std::cos(a) * perp.col(0) + std::sin(a) * perp.col(1);
      } else {
        tangent = perp * fibonacci_sphere(n - 1, count)[k];
      }
      out.push_back((c * axis + s * tangent).normalized());
    }
  }
  return out;
}

// Product lattice on the inward boundary bundle of B_R: points on the sphere
// x inward directions x times uniform on [-T, T].
struct BoundarySampling {
  int points = 16;
  int directions = 8;
  int times = 3;
};

inline std::vector<BoundaryRay> boundary_lattice(int n, double R, double T, const BoundarySampling& s) {
  std::vector<BoundaryRay> out;
  const auto pts = fibonacci_sphere(n, s.points);
  for (int it = 0; it < s.times; ++it) {
    const double t = s.times == 1 ? 0.0 : -T + 2.0 * T * it / (s.times - 1);
    for (const Vec& p : pts)
      for (const Vec& v : hemisphere_lattice(-p, s.directions)) out.push_back(BoundaryRay::make(t, R * p, v, R));
  }
  return out;
}

// Independent uniform inward entries: t uniform on [-T, T], boundary point
// uniform on the sphere, direction uniform on the inward hemisphere.
inline std::vector<BoundaryRay> random_inward_entries(int n, double R, double T, int count, std::uint64_t seed,
                                                      double time_scale = 1.0) {
  Rng rng(seed);
  std::vector<BoundaryRay> out;
  out.reserve(count);
  while (static_cast<int>(out.size()) < count) {
    const double t = rng.uniform(-time_scale * T, time_scale * T);
    const Vec p = rng.unit_vector(n);
    Vec v = rng.unit_vector(n);
    const double c = v.dot(p);
    if (std::abs(c) < 1e-9) continue;
    if (c > 0.0) v = -v;
    out.push_back(BoundaryRay::make(t, R * p, v, R));
  }
  return out;
}

// Lattice of cusp data: directions on S^{n-1}, xi1c on a uniform grid of
// [-2T - 1, 2T + 1], eta1c on a disk of radius 0.95 R in y^perp.
struct CuspSampling {
  int directions = 8;
  int xi = 7;
  int eta = 9;
};

inline std::vector<Vec> disk_lattice(int m, double radius, int count) {
  std::vector<Vec> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    if (m == 1) {
      out.push_back(make_vec({count == 1 ? 0.0 : -radius + 2.0 * radius * k / (count - 1)}));
    } else if (m == 2) {
      const double r = radius * std::sqrt((k + 0.5) / count);
      const double a = k * detail::kGoldenAngle;
      out.push_back(make_vec({r * std::cos(a), r * std::sin(a)}));
    } else {
      Vec v;
      std::uint64_t i = static_cast<std::uint64_t>(k);
      do {
        v = 2.0 * detail::halton(i, m) - Vec::Ones(m);
        i += static_cast<std::uint64_t>(count);
      } while (v.norm() > 1.0);
      out.push_back(radius * v);
    }
  }
  return out;
}

inline std::vector<CuspBoundaryPoint> cusp_lattice(int n, double R, double T, const CuspSampling& s) {
  std::vector<CuspBoundaryPoint> out;
  const double lo = -2.0 * T - 1.0, hi = 2.0 * T + 1.0;
  for (const Vec& y : fibonacci_sphere(n, s.directions)) {
    const Mat perp = orthonormal_complement(y);
    const auto offsets = disk_lattice(n - 1, 0.95 * R, s.eta);
    for (int ix = 0; ix < s.xi; ++ix) {
      const double xi = s.xi == 1 ? 0.0 : lo + (hi - lo) * ix / (s.xi - 1);
      for (const Vec& o : offsets) {
        Vec eta = perp * o;
        eta -= eta.dot(y) * y;
        out.push_back(CuspBoundaryPoint::make(y, xi, eta));
      }
    }
  }
  return out;
}

// Random cusp data with |eta1c| uniform in area on the disk of radius
// eta_radius and xi1c uniform on [-2T - 1, 2T + 1].
inline std::vector<CuspBoundaryPoint> random_cusp_points(int n, double T, double eta_radius, int count,
                                                         std::uint64_t seed) {
  Rng rng(seed);
  std::vector<CuspBoundaryPoint> out;
  out.reserve(count);
  for (int k = 0; k < count; ++k) {
    const Vec y = rng.unit_vector(n);
    const double xi = rng.uniform(-2.0 * T - 1.0, 2.0 * T + 1.0);
    Vec dir = reject(rng.unit_vector(n), y);
    while (dir.norm() < 1e-6) dir = reject(rng.unit_vector(n), y);
    const double r = eta_radius * std::pow(rng.uniform(), 1.0 / (n - 1));
    Vec eta = r * dir.normalized();
    eta -= eta.dot(y) * y;
    out.push_back(CuspBoundaryPoint::make(y, xi, eta));
  }
  return out;
}

}  // namespace lenscat
