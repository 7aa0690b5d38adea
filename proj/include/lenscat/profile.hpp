#pragma once

// Smooth scalar profiles used to build compactly supported metric and
// diffeomorphism families, carried together with their first and second
// spatial derivatives.

#include "lenscat/linalg.hpp"

#include <cmath>
#include <limits>
#include <optional>

namespace lenscat {

// Value, gradient and Hessian of a scalar function of z at one point.
struct ScalarJet {
  double value = 0.0;
  Vec grad;
  Mat hess;

  static ScalarJet constant(int n, double c) { return {c, Vec::Zero(n), Mat::Zero(n, n)}; }
};

inline ScalarJet operator*(const ScalarJet& a, const ScalarJet& b) {
  ScalarJet r;
  r.value = a.value * b.value;
  r.grad = a.value * b.grad + b.value * a.grad;
  r.hess = a.value * b.hess + b.value * a.hess + a.grad * b.grad.transpose() +
           b.grad * a.grad.transpose();
  return r;
}

inline ScalarJet operator*(double c, ScalarJet a) {
  a.value *= c;
  a.grad *= c;
  a.hess *= c;
  return a;
}

// Standard mollifier written in q = r^2 and normalised to 1 at the origin:
// m(q) = exp(1 - 1/(1 - q)) for q < 1, zero otherwise. Returns (m, m', m'').
struct MollifierValue {
  double m = 0.0, dm = 0.0, d2m = 0.0;
};

inline MollifierValue mollifier_q(double q) {
  if (q >= 1.0) return {};
  const double u = 1.0 / (1.0 - q);
  const double m = std::exp(1.0 - u);
  // dm/dq = -m u^2, d2m/dq2 = m (u^4 - 2 u^3)
  return {m, -m * u * u, m * (u * u * u * u - 2.0 * u * u * u)};
}

// m(|z - c|^2 / radius^2), identically zero for |z - c| >= radius.
inline ScalarJet ball_cutoff(const Vec& z, const Vec& center, double radius) {
  const int n = static_cast<int>(z.size());
  const Vec d = z - center;
  const double inv_r2 = 1.0 / (radius * radius);
  const MollifierValue mq = mollifier_q(d.squaredNorm() * inv_r2);
  ScalarJet j;
  j.value = mq.m;
  j.grad = (2.0 * inv_r2 * mq.dm) * d;
  j.hess = (4.0 * inv_r2 * inv_r2 * mq.d2m) * (d * d.transpose()) +
           (2.0 * inv_r2 * mq.dm) * Mat::Identity(n, n);
  return j;
}

// exp(-|z - c|^2 / width^2)
inline ScalarJet gaussian(const Vec& z, const Vec& center, double width) {
  const int n = static_cast<int>(z.size());
  const Vec d = z - center;
  const double inv_w2 = 1.0 / (width * width);
  const double g = std::exp(-d.squaredNorm() * inv_w2);
  ScalarJet j;
  j.value = g;
  j.grad = (-2.0 * inv_w2 * g) * d;
  j.hess = g * ((4.0 * inv_w2 * inv_w2) * (d * d.transpose()) -
                (2.0 * inv_w2) * Mat::Identity(n, n));
  return j;
}

// Temporal envelope m(t^2/T^2) * exp(-t^2/tau^2); the Gaussian factor is
// dropped when no time width is given. Zero for |t| >= T.
inline double time_envelope(double t, double T, std::optional<double> time_width) {
  const double env = mollifier_q((t * t) / (T * T)).m;
  if (env == 0.0 || !time_width) return env;
  return env * std::exp(-(t * t) / (*time_width * *time_width));
}

}  // namespace lenscat
