#include "common.hpp"

#include <gtest/gtest.h>

using namespace lenscat;
using namespace testing_util;

namespace {

MetricField fixture() { return bump(0.1); }

void expect_cusp_near(const CuspBoundaryPoint& a, const CuspBoundaryPoint& b, double tol) {
  EXPECT_LE((a.y - b.y).norm(), tol);
  EXPECT_NEAR(a.xi1c, b.xi1c, tol);
  EXPECT_LE((a.eta1c - b.eta1c).norm(), tol);
}

void expect_ray_near(const BoundaryRay& a, const BoundaryRay& b, double tol) {
  EXPECT_EQ(a.t, b.t);
  EXPECT_LE((a.z - b.z).norm(), tol);
  EXPECT_LE((a.v - b.v).norm(), tol);
}

}  // namespace

TEST(RayToCusp, ThroughOrigin) {
  const CuspBoundaryPoint p = ray_to_cusp(1.0, make_vec({5.0, 0.0}), make_vec({1.0, 0.0}));
  EXPECT_EQ(p.y, make_vec({1.0, 0.0}));
  EXPECT_EQ(p.xi1c, -2.0);
  EXPECT_LE(p.eta1c.norm(), 1e-15);
}

TEST(RayToCusp, OrthogonalOffset) {
  const CuspBoundaryPoint p = ray_to_cusp(0.0, make_vec({5.0, 2.0}), make_vec({1.0, 0.0}));
  EXPECT_LE((p.eta1c - make_vec({0.0, -2.0})).norm(), 1e-15);
  EXPECT_EQ(p.xi1c, 0.0);
}

TEST(RayToCusp, TranslationAlongRay) {
  const Vec v = make_vec({0.6, 0.8});
  const Vec z = make_vec({-1.0, 2.5});
  expect_cusp_near(ray_to_cusp(0.3, z + 7.0 * v, v), ray_to_cusp(0.3, z, v), 1e-12);
  const Vec v3 = make_vec({0.0, 0.6, -0.8});
  const Vec z3 = make_vec({0.4, -1.0, 2.5});
  expect_cusp_near(ray_to_cusp(-0.7, z3 - 11.0 * v3, v3), ray_to_cusp(-0.7, z3, v3), 1e-12);
}

TEST(CuspToEntry, Diametral) {
  const BoundaryRay e = cusp_to_entry(CuspBoundaryPoint::make(make_vec({1.0, 0.0}), 0.0, Vec::Zero(2)), kR);
  EXPECT_EQ(e.t, 0.0);
  EXPECT_LE((e.z - make_vec({-3.0, 0.0})).norm(), 1e-15);
  EXPECT_EQ(e.v, make_vec({1.0, 0.0}));
  EXPECT_TRUE(e.inward());
}

TEST(CuspToEntry, OffsetChord) {
  const BoundaryRay e =
      cusp_to_entry(CuspBoundaryPoint::make(make_vec({1.0, 0.0}), -2.0, make_vec({0.0, -1.0})), kR);
  EXPECT_EQ(e.t, 1.0);
  EXPECT_LE((e.z - make_vec({-std::sqrt(8.0), 1.0})).norm(), 1e-15);
  EXPECT_EQ(e.v, make_vec({1.0, 0.0}));
}

TEST(CuspToEntry, MissesBall) {
  EXPECT_THROW(cusp_to_entry(CuspBoundaryPoint::make(make_vec({1.0, 0.0}), 0.0, make_vec({0.0, 3.5})), kR), MissesBall);
  EXPECT_THROW(cusp_to_entry(CuspBoundaryPoint::make(make_vec({1.0, 0.0}), 0.0, make_vec({0.0, 3.0})), kR), MissesBall);
}

TEST(CuspBoundaryPoint, Invariants) {
  EXPECT_THROW(CuspBoundaryPoint::make(make_vec({1.0, 0.1}), 0.0, Vec::Zero(2)), InvalidRay);
  EXPECT_THROW(CuspBoundaryPoint::make(make_vec({1.0, 0.0}), 0.0, make_vec({0.1, 1.0})), InvalidRay);
  EXPECT_EQ(CuspBoundaryPoint::make(make_vec({0.0, 1.0}), 3.0, make_vec({1.0, 0.0})).time(), -1.5);
}

TEST(CuspToEntry, RoundTrip) {
  for (int n : {2, 3})
    for (const CuspBoundaryPoint& p : random_cusp_points(n, kT, 0.999 * kR, 300, 41)) {
      const BoundaryRay e = cusp_to_entry(p, kR);
      expect_cusp_near(ray_to_cusp(e.t, e.z, e.v), p, 1e-10);
    }
}

TEST(ClassicalScatteringMap, FlatIsIdentity) {
  const MetricField g = flat_metric(2, kR, kT);
  for (const CuspBoundaryPoint& p : random_cusp_points(2, kT, 0.95 * kR, 200, 42)) {
    const SojournGraphPoint s = classical_scattering_map(g, p);
    expect_cusp_near(s.outgoing, p, 1e-10);
    EXPECT_NEAR(s.n1, 0.0, 1e-10);
    EXPECT_TRUE(s.interacts);
  }
}

TEST(ClassicalScatteringMap, IdentityAtLargeOffset) {
  const MetricField g = bump(0.3, make_vec({0.3, -0.2}));
  for (double r : {1.0, 1.5, 2.0}) {
    for (const CuspBoundaryPoint& p : random_cusp_points(2, kT, 1.0, 50, 43)) {
      const CuspBoundaryPoint q = CuspBoundaryPoint::make(p.y, p.xi1c, Vec(r * kR * p.eta1c.normalized()));
      const SojournGraphPoint s = classical_scattering_map(g, q);
      EXPECT_EQ(s.outgoing.y, q.y);
      EXPECT_EQ(s.outgoing.xi1c, q.xi1c);
      EXPECT_EQ(s.outgoing.eta1c, q.eta1c);
      EXPECT_EQ(s.n1, 0.0);
      EXPECT_FALSE(s.interacts);
    }
  }
}

TEST(ClassicalScatteringMap, BumpFixtureMatchesOracle) {
  const CuspBoundaryPoint p = CuspBoundaryPoint::make(make_vec({1.0, 0.0}), 0.0, make_vec({0.0, -1.0}));
  const SojournGraphPoint s = classical_scattering_map(fixture(), p);

  const auto o = bump_oracle(0.1, oracle::V::Zero(2));
  const oracle::V z0 = to_dyn(make_vec({-std::sqrt(8.0), 1.0}));
  const oracle::V v0 = to_dyn(make_vec({1.0, 0.0}));
  const auto ex = oracle::rk4_geodesic([&](const oracle::V& x, const oracle::V& u) { return o.gamma_uu(0.0, x, u); },
                                       z0, v0, kR);
  const CuspBoundaryPoint expect = ray_to_cusp(0.0, Vec(ex.z), Vec(ex.v));
  const double sojourn = -ex.z.dot(ex.v) + ex.length + z0.dot(v0);
  expect_cusp_near(s.outgoing, expect, 1e-7);
  EXPECT_NEAR(s.n1, -sojourn, 1e-7);
  EXPECT_NEAR(s.length, ex.length, 1e-7);
  // The bump attracts the ray towards its centre.
  EXPECT_LT(s.outgoing.y[1], 0.0);
}

TEST(ClassicalScatteringMap, N1IsMinusSojournLimit) {
  const MetricField g = bump(0.3, make_vec({0.3, -0.2}));
  for (const CuspBoundaryPoint& p : random_cusp_points(2, kT, 0.95 * kR, 6, 44)) {
    const SojournGraphPoint s = classical_scattering_map(g, p);
    const BoundaryRay e = cusp_to_entry(p, kR);
    EXPECT_NEAR(s.n1, -sojourn_closed(g, e), 1e-14);
    EXPECT_NEAR(s.n1, -sojourn_limit(g, e, 100.0 * kR).extrapolated, 1e-5);
  }
}

TEST(TruncatedMap, FlatDiametralIsExact) {
  const MetricField g = flat_metric(2, kR, kT);
  const BoundaryRay e = BoundaryRay::make(0.0, make_vec({-3.0, 0.0}), make_vec({1.0, 0.0}), kR);
  const BoundaryRay a = truncated_map_via_infinity(g, e);
  const BoundaryRay b = scattering_relation(g, e);
  EXPECT_EQ(a.z, b.z);
  EXPECT_EQ(a.v, b.v);
  EXPECT_LE((a.z - make_vec({3.0, 0.0})).norm(), 1e-12);
}

TEST(TruncatedMap, MatchesScatteringRelation) {
  const MetricField g = fixture();
  for (const BoundaryRay& e : random_inward_entries(2, kR, kT, 300, 45))
    expect_ray_near(truncated_map_via_infinity(g, e), scattering_relation(g, e), 1e-7);
  const MetricField g3 = load_metric(config("bump3.json"));
  for (const BoundaryRay& e : random_inward_entries(3, kR, kT, 50, 46))
    expect_ray_near(truncated_map_via_infinity(g3, e), scattering_relation(g3, e), 1e-7);
}

TEST(TruncatedMap, MatchesScatteringRelationForPullback) {
  const MetricField pg = pullback(fixture(), shear());
  for (const BoundaryRay& e : random_inward_entries(2, kR, kT, 30, 47))
    expect_ray_near(truncated_map_via_infinity(pg, e), scattering_relation(pg, e), 1e-7);
}

TEST(LensEquivalent, FlatAgainstFlat) {
  const MetricField g = flat_metric(2, kR, kT);
  const LensReport r = lens_equivalent(g, g, random_cusp_points(2, kT, 0.95 * kR, 100, 48), 1e-5, 2);
  EXPECT_TRUE(r.equivalent);
  EXPECT_EQ(r.max.y_angle, 0.0);
  EXPECT_EQ(r.max.xi, 0.0);
  EXPECT_EQ(r.max.eta, 0.0);
  EXPECT_EQ(r.max.n1, 0.0);
  EXPECT_EQ(r.max.length, 0.0);
}

TEST(LensEquivalent, BumpAgainstPullback) {
  const MetricField g = bump(0.1, make_vec({0.3, -0.2}));
  const MetricField pg = pullback(g, swirl(0.3));
  const LensReport r = lens_equivalent(g, pg, random_cusp_points(2, kT, 0.95 * kR, 60, 49), 1e-5);
  EXPECT_TRUE(r.equivalent);
  EXPECT_LE(r.max.length, 1e-5);
  EXPECT_EQ(r.trapped_first + r.trapped_second, 0u);
}

TEST(LensEquivalent, FlatAgainstBumpIsInequivalent) {
  const LensReport r = lens_equivalent(flat_metric(2, kR, kT), fixture(), random_cusp_points(2, kT, 0.95 * kR, 100, 50),
                                       1e-5, 2);
  EXPECT_FALSE(r.equivalent);
  EXPECT_GT(r.max.n1, 1e-3);
  ASSERT_TRUE(r.worst.has_value());
  const nlohmann::json j = r.to_json();
  EXPECT_FALSE(j["equivalent"].get<bool>());
  EXPECT_TRUE(j.contains("worst"));
}

TEST(LensEquivalent, TrappedSamplesAreNotEquivalent) {
  const MetricField g = load_metric(config("trapping.json"));
  std::vector<CuspBoundaryPoint> samples;
  for (double e : {0.0, 0.2, 0.5, 1.0}) samples.push_back(CuspBoundaryPoint::make(make_vec({1.0, 0.0}), 0.0, make_vec({0.0, e})));
  const LensReport r = lens_equivalent(g, g, samples, 1e-5);
  EXPECT_GT(r.trapped_first, 0u);
  EXPECT_FALSE(r.equivalent);
}

TEST(LensEquivalent, MismatchedFields) {
  EXPECT_THROW(lens_equivalent(flat_metric(2, kR, kT), flat_metric(2, 4.0, kT), {}, 1e-5), ConfigError);
  EXPECT_THROW(lens_equivalent(flat_metric(2, kR, kT), flat_metric(3, kR, kT), {}, 1e-5), ConfigError);
}

TEST(GraphCsv, Layout) {
  std::ostringstream os;
  write_graph_csv_header(os, 2);
  EXPECT_EQ(os.str(), "y_in_1,y_in_2,xi1c_in,eta1c_in_1,eta1c_in_2,y_out_1,y_out_2,xi1c_out,eta1c_out_1,eta1c_out_2,n1\n");
  const CuspBoundaryPoint p = CuspBoundaryPoint::make(make_vec({1.0, 0.0}), 0.0, make_vec({0.0, 4.0}));
  std::ostringstream row;
  write_graph_csv_row(row, classical_scattering_map(fixture(), p));
  EXPECT_EQ(row.str(), "1,0,0,0,4,1,0,0,0,4,0\n");
}
