#pragma once

// Boundary data: rays on the sphere |z| = R and 1-cusp data at infinity.

#include "lenscat/errors.hpp"
#include "lenscat/linalg.hpp"

#include <cmath>

namespace lenscat {

enum class Orientation { Inward, Outward };

// (t, z, v) with |z| = R and v a unit vector. The metric is Euclidean on the
// sphere, so unit length and the inward/outward split are Euclidean notions.
struct BoundaryRay {
  double t = 0.0;
  Vec z;
  Vec v;
  Orientation orientation = Orientation::Inward;

  static constexpr double kRadiusTol = 1e-10;
  static constexpr double kUnitTol = 1e-10;
  static constexpr double kTangentialTol = 1e-12;

  // Validates and classifies. Throws InvalidRay on violated invariants.
  static BoundaryRay make(double t, Vec z, Vec v, double R) {
    if (z.size() != v.size()) throw InvalidRay("position and direction dimensions differ");
    if (std::abs(z.norm() - R) > kRadiusTol * R) throw InvalidRay("boundary ray is not on the sphere");
    if (std::abs(v.norm() - 1.0) > kUnitTol) throw InvalidRay("boundary ray direction is not unit length");
    const double c = z.dot(v) / z.norm();
    if (std::abs(c) < kTangentialTol) throw InvalidRay("tangential boundary ray");
    return {t, std::move(z), std::move(v), c < 0.0 ? Orientation::Inward : Orientation::Outward};
  }

  bool inward() const { return orientation == Orientation::Inward; }

  // Same geometric line traversed backwards.
  BoundaryRay reversed() const {
    return {t, z, -v, inward() ? Orientation::Outward : Orientation::Inward};
  }
};

// 1-cusp datum of a free ray at infinity: direction y, xi1c = -2t and
// eta1c = minus the component of the line's points orthogonal to y.
struct CuspBoundaryPoint {
  Vec y;
  double xi1c = 0.0;
  Vec eta1c;

  static constexpr double kUnitTol = 1e-12;
  static constexpr double kOrthTol = 1e-10;

  static CuspBoundaryPoint make(Vec y, double xi1c, Vec eta1c) {
    if (y.size() != eta1c.size()) throw InvalidRay("cusp datum dimensions differ");
    if (std::abs(y.norm() - 1.0) > kUnitTol) throw InvalidRay("cusp direction is not unit length");
    if (std::abs(eta1c.dot(y)) > kOrthTol) throw InvalidRay("eta1c is not orthogonal to y");
    return {std::move(y), xi1c, std::move(eta1c)};
  }

  double time() const { return -0.5 * xi1c; }
};

}  // namespace lenscat
