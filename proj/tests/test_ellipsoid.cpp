#include "starcut/verify.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace starcut;
using starcut::verify::random_ellipsoid;
using starcut::verify::random_in_ball;

namespace {

const double kTauLog = std::log(1e-6);

Vector v2(double a, double b) { return (Vector(2) << a, b).finished(); }

Ellipsoid axis_aligned(const Vector& center, const Vector& lengths) {
  const int n = static_cast<int>(center.size());
  return {center, Matrix::Identity(n, n), lengths.array().log().matrix()};
}

// Uniform point of E, from a point of the unit ball in E's own chart.
Vector point_of(const Ellipsoid& e, const Vector& w) {
  Vector x = e.center;
  for (int a = 0; a < e.dim(); ++a) x += e.basis.col(a) * (std::exp(e.log_lengths[a]) * w[a]);
  return x;
}

}  // namespace

TEST(UnitBall, Basics) {
  const Ellipsoid e = unit_ball(2, 1.0);
  EXPECT_EQ(e.center, Vector::Zero(2));
  EXPECT_EQ(e.log_lengths, Vector::Zero(2));
  EXPECT_NEAR(log_volume(e), std::log(M_PI), 1e-15);
  const Ellipsoid big = unit_ball(3, 10.0);
  EXPECT_NEAR(std::exp(log_volume(big)), 4.0 / 3.0 * M_PI * 1000.0, 1e-9);
  const Ellipsoid line = unit_ball(1, 2.5);
  EXPECT_TRUE(contains(line, (Vector(1) << -2.5).finished()));
  EXPECT_FALSE(contains(line, (Vector(1) << 2.5000001).finished()));
}

TEST(Contains, BoundaryHandling) {
  const Ellipsoid e = unit_ball(2, 1.0);
  EXPECT_TRUE(contains(e, Vector::Zero(2)));
  EXPECT_FALSE(contains(e, v2(1.0 + 1e-9, 0.0)));
  EXPECT_TRUE(contains(e, v2(1.0, 0.0)));
  EXPECT_TRUE(contains(axis_aligned(Vector::Zero(2), v2(0.5, 4.0)), v2(0.0, -4.0)));
}

TEST(LogVolume, Homogeneity) {
  Stream rng = seed_schedule(1, 0, 0, 0);
  for (int n = 1; n <= 6; ++n) {
    Ellipsoid e = random_ellipsoid(n, rng, -2.0, 2.0, kTauLog, 0);
    const double before = log_volume(e);
    e.log_lengths.array() += std::log(2.0);
    EXPECT_NEAR(log_volume(e) - before, n * std::log(2.0), 1e-12);
  }
}

TEST(ApplyCut, UnitDiskExample) {
  const Ellipsoid out = apply_cut(unit_ball(2, 1.0), v2(1.0, 0.0), kTauLog);
  EXPECT_NEAR(out.center[0], -2.0 / 9.0, 1e-15);
  EXPECT_NEAR(out.center[1], 0.0, 1e-15);
  // Axis order may change; compare the length attached to each direction.
  for (int a = 0; a < 2; ++a) {
    const double len = std::exp(out.log_lengths[a]);
    if (std::abs(out.basis(0, a)) > 0.5)
      EXPECT_NEAR(len, 7.0 / 9.0, 1e-14);
    else
      EXPECT_NEAR(len, 2.0 / std::sqrt(3.0), 1e-14);
  }
  const double ratio = std::exp(log_volume(out) - log_volume(unit_ball(2, 1.0)));
  EXPECT_NEAR(ratio, 7.0 / 9.0 * std::sqrt(4.0 / 3.0), 1e-14);
  EXPECT_NEAR(ratio, 0.898100, 1e-6);
  EXPECT_LT(ratio, std::exp(-1.0 / 18.0));
}

TEST(ApplyCut, RejectsBadDirections) {
  const Ellipsoid e = axis_aligned(Vector::Zero(3), (Vector(3) << 1.0, 1.0, 1e-8).finished());
  EXPECT_THROW(apply_cut(e, (Vector(3) << 0.6, 0.0, 0.8).finished(), kTauLog), InvalidInput);
  EXPECT_THROW(apply_cut(e, (Vector(3) << 0.6, 0.0, 0.0).finished(), kTauLog), InvalidInput);
  EXPECT_NO_THROW(apply_cut(e, (Vector(3) << 0.6, 0.8, 0.0).finished(), kTauLog));
}

TEST(ApplyCut, ContainmentOfKeptHalf) {
  Stream rng = seed_schedule(2, 0, 0, 0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int n = 2; n <= 8; ++n) {
    const Ellipsoid ball = unit_ball(n, 1.0);
    Vector d(n);
    for (int i = 0; i < n; ++i) d[i] = unif(rng);
    d.normalize();
    const Ellipsoid out = apply_cut(ball, d, kTauLog);
    long long kept = 0, bad = 0;
    for (int s = 0; s < 100000; ++s) {
      const Vector x = random_in_ball(n, rng);
      if (x.dot(d) > 1.0 / (3.0 * n)) continue;
      ++kept;
      if (!contains(out, x)) ++bad;
    }
    EXPECT_GT(kept, 10000);
    EXPECT_EQ(bad, 0) << "n=" << n;
  }
}

TEST(ApplyCut, VolumeContractionProperty) {
  Stream rng = seed_schedule(3, 0, 0, 0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int n = 2; n <= 8; ++n) {
    for (int t = 0; t < 100; ++t) {
      const int thin = t % 2 ? t % (n - 1) : 0;
      const Ellipsoid e = random_ellipsoid(n, rng, -3.0, 3.0, kTauLog, thin);
      const ThinDecomposition f = thin_decomposition(e, kTauLog);
      Vector d = Vector::Zero(n);
      for (int a : f.nonthin_axes) d[a] = unif(rng);
      d.normalize();
      const Ellipsoid out = apply_cut(e, d, kTauLog);
      EXPECT_LE(log_volume(out) - log_volume(e), -1.0 / (6.0 * (n + 1)) + 1e-12);
      EXPECT_LE(orthonormality_drift(out.basis), 1e-10);
    }
  }
}

TEST(ApplyCut, ThinAxesStayExactAxes) {
  Stream rng = seed_schedule(4, 0, 0, 0);
  for (int n = 3; n <= 6; ++n) {
    const Ellipsoid e = random_ellipsoid(n, rng, -1.0, 1.0, kTauLog, 2);
    const ThinDecomposition f = thin_decomposition(e, kTauLog);
    ASSERT_EQ(f.thin_axes.size(), 2u);
    Vector d = Vector::Zero(n);
    for (int a : f.nonthin_axes) d[a] = 1.0;
    d.normalize();
    const Ellipsoid out = apply_cut(e, d, kTauLog);
    const double beta = std::log(n / std::sqrt(n * n - 1.0));
    for (int a : f.thin_axes) {
      EXPECT_EQ(out.basis.col(a), e.basis.col(a));
      EXPECT_NEAR(out.log_lengths[a], e.log_lengths[a] + beta, 1e-12);
    }
  }
}

TEST(ApplyCut, UnstretchedThinAxesWouldLoseContainment) {
  // Keeping a thin length fixed is not enough: a point of E on the far edge
  // of the thin axis, with zero non-thin displacement, lies in the kept half
  // but leaves the update once the center has moved.
  const double tau = 1e-6;
  const Ellipsoid e = axis_aligned(Vector::Zero(2), v2(1.0, tau / 10));
  const Ellipsoid out = apply_cut(e, v2(1.0, 0.0), std::log(tau));
  const Vector edge = v2(0.0, tau / 10);
  ASSERT_TRUE(contains(e, edge));
  EXPECT_TRUE(contains(out, edge));
  Ellipsoid frozen = out;
  frozen.log_lengths[1] = e.log_lengths[1];
  EXPECT_FALSE(contains(frozen, edge));
}

TEST(ApplyCut, ContainmentWithThinAxes) {
  Stream rng = seed_schedule(5, 0, 0, 0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  for (int n = 3; n <= 7; ++n) {
    for (int t = 0; t < 10; ++t) {
      const Ellipsoid e = random_ellipsoid(n, rng, -2.0, 2.0, kTauLog, 1 + t % (n - 2));
      const ThinDecomposition f = thin_decomposition(e, kTauLog);
      Vector d = Vector::Zero(n);
      for (int a : f.nonthin_axes) d[a] = unif(rng);
      d.normalize();
      const Ellipsoid out = apply_cut(e, d, kTauLog);
      for (int s = 0; s < 4000; ++s) {
        const Vector w = random_in_ball(n, rng);
        if (w.dot(d) > 1.0 / (3.0 * n)) continue;
        EXPECT_TRUE(contains(out, point_of(e, w)));
      }
    }
  }
}

TEST(AxisFloor, SimulatedUpdateSequences) {
  Stream rng = seed_schedule(6, 0, 0, 0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);
  const double R = 1.0, tau_log = std::log(1e-3);
  for (int n = 2; n <= 5; ++n) {
    const double floor = axis_floor_log(n, tau_log);
    for (int run = 0; run < 5; ++run) {
      Ellipsoid e = unit_ball(n, R);
      for (int it = 0; it < 4000; ++it) {
        const ThinDecomposition f = thin_decomposition(e, tau_log);
        if (f.nonthin_axes.empty()) break;
        Vector d = Vector::Zero(n);
        for (int a : f.nonthin_axes) d[a] = unif(rng);
        d.normalize();
        e = apply_cut(e, d, tau_log);
        while (e.max_log_length() >= std::log(3.0 * n * R)) e = clamp_axes(e, R, n);
        e = recenter(e, R);
        ASSERT_GE(e.min_log_length(), floor) << "n=" << n << " it=" << it;
      }
    }
  }
}

TEST(ClampAxes, ResizingExample) {
  const double c2 = 0.3;
  const Ellipsoid e = axis_aligned(v2(0.4, c2), v2(7.0, 0.5));
  const Ellipsoid out = clamp_axes(e, 1.0, 2);
  EXPECT_NEAR(std::exp(out.log_lengths[0]), 2.0, 1e-14);
  EXPECT_NEAR(std::exp(out.log_lengths[1]), 0.75, 1e-14);
  EXPECT_NEAR(out.center[0], 0.0, 1e-15);
  EXPECT_NEAR(out.center[1], c2, 1e-15);
  EXPECT_LE(log_volume(out), log_volume(e));
}

TEST(ClampAxes, NothingToClamp) {
  const Ellipsoid e = axis_aligned(v2(0.4, 0.1), v2(5.9, 0.5));
  const Ellipsoid out = clamp_axes(e, 1.0, 2);
  EXPECT_EQ(out.center, e.center);
  EXPECT_EQ(out.log_lengths, e.log_lengths);
}

TEST(Recenter, IsotropicProjectsRadially) {
  const double R = 2.0;
  const Ellipsoid e = axis_aligned(v2(2 * R, 0.0), v2(5.0, 5.0));
  const Ellipsoid out = recenter(e, R);
  EXPECT_NEAR(out.center[0], R, 1e-9);
  EXPECT_NEAR(out.center[1], 0.0, 1e-12);
  EXPECT_EQ(out.log_lengths, e.log_lengths);
  const Ellipsoid inside = axis_aligned(v2(0.5, 0.5), v2(1.0, 1.0));
  EXPECT_EQ(recenter(inside, R).center, inside.center);
}

TEST(Recenter, AnisotropicMatchesGridSearch) {
  const double R = 1.0, angle = M_PI / 6.0;
  Matrix basis(2, 2);
  basis << std::cos(angle), -std::sin(angle), std::sin(angle), std::cos(angle);
  const Ellipsoid e{v2(3.0, 1.5), basis, v2(std::log(1.0), std::log(10.0))};
  auto metric = [&](const Vector& x) {
    const Vector v = basis.transpose() * (x - e.center);
    return std::pow(v[0] / 1.0, 2) + std::pow(v[1] / 10.0, 2);
  };
  // Coarse grid over the circle, then golden-section refinement.
  double best = 0, best_val = std::numeric_limits<double>::infinity();
  const int N = 200000;
  for (int i = 0; i < N; ++i) {
    const double t = 2 * M_PI * i / N;
    const double val = metric(R * v2(std::cos(t), std::sin(t)));
    if (val < best_val) best_val = val, best = t;
  }
  double lo = best - 2 * M_PI / N, hi = best + 2 * M_PI / N;
  const double g = (std::sqrt(5.0) - 1) / 2;
  for (int it = 0; it < 200; ++it) {
    const double a = hi - g * (hi - lo), b = lo + g * (hi - lo);
    if (metric(R * v2(std::cos(a), std::sin(a))) < metric(R * v2(std::cos(b), std::sin(b))))
      hi = b;
    else
      lo = a;
  }
  const double t = 0.5 * (lo + hi);
  const Vector grid = R * v2(std::cos(t), std::sin(t));
  const Vector p = recenter(e, R).center;
  EXPECT_NEAR((p - grid).norm(), 0.0, 1e-6);
  EXPECT_NEAR(p.norm(), R, 1e-9);
}

TEST(Recenter, ContainsBallIntersection) {
  Stream rng = seed_schedule(7, 0, 0, 0);
  for (int n = 2; n <= 6; ++n) {
    for (int t = 0; t < 20; ++t) {
      Ellipsoid e = random_ellipsoid(n, rng, std::log(0.3), std::log(5.0), kTauLog, 0);
      e.center *= 3.0;
      const Ellipsoid out = recenter(e, 1.0);
      EXPECT_LE(out.center.norm(), 1.0 + 1e-12);
      EXPECT_EQ(log_volume(out), log_volume(e));
      for (int s = 0; s < 2000; ++s) {
        const Vector x = random_in_ball(n, rng);
        if (contains(e, x)) {
          EXPECT_TRUE(contains(out, x));
        }
      }
    }
  }
}

TEST(ThinDecomposition, Partitions) {
  const double tau = 1e-6;
  const Ellipsoid round = unit_ball(3, 4.0);
  const ThinDecomposition a = thin_decomposition(round, std::log(tau));
  EXPECT_TRUE(a.thin_axes.empty());
  const Vector x = (Vector(3) << 4.0, -2.0, 1.0).finished();
  EXPECT_NEAR((a.to_normalized(x) - x / 4.0).norm(), 0.0, 1e-15);

  const Ellipsoid flat = axis_aligned(Vector::Zero(2), v2(1.0, tau / 10));
  const ThinDecomposition b = thin_decomposition(flat, std::log(tau));
  ASSERT_EQ(b.thin_axes, std::vector<int>{1});
  EXPECT_EQ(b.nonthin_axes, std::vector<int>{0});
  // Thin coordinates keep their absolute scale in the chart.
  EXPECT_NEAR(b.to_normalized(v2(0.0, tau / 10))[1], tau / 10, 1e-22);
  EXPECT_NEAR(b.to_normalized(v2(1.0, 0.0))[0], 1.0, 1e-15);
}

TEST(ThinDecomposition, RoundTrip) {
  Stream rng = seed_schedule(8, 0, 0, 0);
  std::normal_distribution<double> normal;
  for (int n = 1; n <= 7; ++n) {
    const Ellipsoid e = random_ellipsoid(n, rng, -3.0, 3.0, kTauLog, n / 3);
    const ThinDecomposition f = thin_decomposition(e, kTauLog);
    for (int t = 0; t < 50; ++t) {
      Vector x(n);
      for (int i = 0; i < n; ++i) x[i] = 5.0 * normal(rng);
      EXPECT_LE((f.from_normalized(f.to_normalized(x)) - x).norm(), 1e-10 * (1.0 + x.norm()));
    }
  }
}

TEST(Basis, ReorthonormalizeRepairsDrift) {
  Stream rng = seed_schedule(9, 0, 0, 0);
  Matrix q = verify::random_rotation(5, rng);
  q(0, 0) += 1e-7;
  EXPECT_GT(orthonormality_drift(q), 1e-10);
  keep_orthonormal(q);
  EXPECT_LE(orthonormality_drift(q), 1e-13);
}
