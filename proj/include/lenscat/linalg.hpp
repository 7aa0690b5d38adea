#pragma once

// Small fixed-capacity dense types shared by every module. All spatial
// objects are dynamically sized (the dimension comes from spec files) but
// bounded by kMaxDim so nothing on the hot path touches the heap.

#include <Eigen/Dense>

#include <array>
#include <cmath>
#include <cstddef>

namespace lenscat {

inline constexpr int kMaxDim = 4;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim, kMaxDim>;

// Rank-3 array stored as one matrix per leading index: t[k](i, j).
// Used for dg_{ij}/dz_k (index k first) and for Christoffel symbols
// Gamma^k_{ij} (upper index first).
struct Tensor3 {
  std::array<Mat, kMaxDim> slices;
  int dim = 0;

  Tensor3() = default;
  explicit Tensor3(int n) : dim(n) {
    for (int k = 0; k < n; ++k) slices[k] = Mat::Zero(n, n);
  }

  Mat& operator[](int k) { return slices[k]; }
  const Mat& operator[](int k) const { return slices[k]; }

  double max_abs() const {
    double m = 0.0;
    for (int k = 0; k < dim; ++k) m = std::max(m, slices[k].cwiseAbs().maxCoeff());
    return m;
  }
};

inline Vec zeros(int n) { return Vec::Zero(n); }
inline Mat identity(int n) { return Mat::Identity(n, n); }

inline Vec make_vec(std::initializer_list<double> xs) {
  Vec v(static_cast<Eigen::Index>(xs.size()));
  int i = 0;
  for (double x : xs) v[i++] = x;
  return v;
}

inline Vec unit(int n, int i) {
  Vec v = Vec::Zero(n);
  v[i] = 1.0;
  return v;
}

// Angle between two unit vectors, accurate near zero.
inline double sphere_angle(const Vec& a, const Vec& b) {
  const double chord = (a - b).norm();
  return 2.0 * std::asin(std::min(1.0, 0.5 * chord));
}

// Component of x orthogonal to the unit vector u.
inline Vec reject(const Vec& x, const Vec& u) { return x - x.dot(u) * u; }

}  // namespace lenscat
