#pragma once

// Feasible-region geometry. An ellipsoid is stored as a center, an
// orthonormal basis of semi-principal axis directions and the natural log of
// each semi-axis length, so that exponentially small axes stay representable.

#include "starcut/core.hpp"

#include <algorithm>
#include <numeric>
#include <vector>

namespace starcut {

struct Ellipsoid {
  Vector center;
  Matrix basis;        // columns are axis directions
  Vector log_lengths;  // natural log of each semi-axis length

  int dim() const { return static_cast<int>(center.size()); }
  double max_log_length() const { return log_lengths.maxCoeff(); }
  double min_log_length() const { return log_lengths.minCoeff(); }
};

inline Ellipsoid unit_ball(int n, double R) {
  require(n >= 1, "dimension must be >= 1");
  require(R > 0.0 && std::isfinite(R), "radius must be positive");
  return Ellipsoid{Vector::Zero(n), Matrix::Identity(n, n), Vector::Constant(n, std::log(R))};
}

inline double log_volume(const Ellipsoid& e) {
  return log_unit_ball_volume(e.dim()) + e.log_lengths.sum();
}

inline double orthonormality_drift(const Matrix& basis) {
  const auto n = basis.cols();
  return (basis.transpose() * basis - Matrix::Identity(n, n)).lpNorm<Eigen::Infinity>();
}

/// Modified Gram-Schmidt on the columns, in place.
inline void reorthonormalize(Matrix& basis) {
  for (Eigen::Index j = 0; j < basis.cols(); ++j) {
    for (Eigen::Index i = 0; i < j; ++i) basis.col(j) -= basis.col(i).dot(basis.col(j)) * basis.col(i);
    const double norm = basis.col(j).norm();
    if (norm == 0.0) throw AlgorithmFailure("ellipsoid basis became degenerate");
    basis.col(j) /= norm;
  }
}

inline void keep_orthonormal(Matrix& basis) {
  if (orthonormality_drift(basis) > 1e-10) reorthonormalize(basis);
}

/// x in E iff sum_i (v_i / length_i)^2 <= 1 with v = basis^T (x - center).
inline bool contains(const Ellipsoid& e, const Vector& x) {
  require(x.size() == e.dim(), "dimension mismatch");
  const Vector v = e.basis.transpose() * (x - e.center);
  double q = 0.0;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (v[i] == 0.0) continue;
    q += std::exp(2.0 * (std::log(std::abs(v[i])) - e.log_lengths[i]));
  }
  return q <= 1.0;
}

/// Partition of the axes into thin (log_length < log tau) and non-thin, with
/// the normalizing chart: non-thin coordinates are divided by their length,
/// thin coordinates are left in absolute units.
struct ThinDecomposition {
  std::vector<int> thin_axes;
  std::vector<int> nonthin_axes;
  Vector center;
  Matrix basis;
  Vector log_lengths;
  std::vector<bool> is_thin;

  int dim() const { return static_cast<int>(center.size()); }

  /// Per-coordinate log scale of the chart (log length for non-thin, 0 for thin).
  double log_scale(int axis) const { return is_thin[axis] ? 0.0 : log_lengths[axis]; }

  Vector to_normalized(const Vector& x) const {
    Vector v = basis.transpose() * (x - center);
    for (int i : nonthin_axes) v[i] *= std::exp(-log_lengths[i]);
    return v;
  }

  Vector from_normalized(const Vector& v) const {
    Vector w = v;
    for (int i : nonthin_axes) w[i] *= std::exp(log_lengths[i]);
    return center + basis * w;
  }
};

inline ThinDecomposition thin_decomposition(const Ellipsoid& e, double tau_log) {
  ThinDecomposition t;
  t.center = e.center;
  t.basis = e.basis;
  t.log_lengths = e.log_lengths;
  t.is_thin.assign(e.dim(), false);
  for (int i = 0; i < e.dim(); ++i) {
    if (e.log_lengths[i] < tau_log) {
      t.thin_axes.push_back(i);
      t.is_thin[i] = true;
    } else {
      t.nonthin_axes.push_back(i);
    }
  }
  return t;
}

inline double axis_floor_log(int n, double tau_log) {
  return tau_log + std::log((1.0 + 1.0 / (3.0 * n)) / 2.0);
}

/// Cut update. `d_hat` is given in the normalized chart of
/// thin_decomposition(e, tau_log); it must be a unit vector with zero thin
/// components. The result contains E intersected with {v : v . d_hat <= 1/(3n)}.
///
/// In the chart where every axis of E has length one the update is the
/// standard one: center shifted by -2/(3(n+1)) along d_hat, semi-axis
/// 1 - 2/(3(n+1)) along d_hat, n/sqrt(n^2-1) across. Thin axes are therefore
/// exact axes of the result, stretched by that same cross factor.
inline Ellipsoid apply_cut(const Ellipsoid& e, const Vector& d_hat, double tau_log) {
  const int n = e.dim();
  require(n >= 2, "apply_cut needs n >= 2");
  require(d_hat.size() == n, "cut direction has wrong dimension");
  require(std::abs(d_hat.norm() - 1.0) <= 1e-9, "cut direction must be a unit vector");
  const ThinDecomposition frame = thin_decomposition(e, tau_log);
  for (int i : frame.thin_axes)
    require(d_hat[i] == 0.0, "cut direction has a component on a thin axis");
  require(!frame.nonthin_axes.empty(), "apply_cut needs a non-thin axis");

  const double nd = n;
  const double shift = 2.0 / (3.0 * (nd + 1.0));
  const double along = 1.0 - shift;
  const double log_across = std::log(nd) - 0.5 * std::log(nd * nd - 1.0);
  const double across = std::exp(log_across);

  Ellipsoid out;
  out.basis = e.basis;
  out.log_lengths = e.log_lengths;

  const int k = static_cast<int>(frame.nonthin_axes.size());
  Vector d(k);
  Vector logl(k);
  for (int a = 0; a < k; ++a) {
    d[a] = d_hat[frame.nonthin_axes[a]];
    logl[a] = e.log_lengths[frame.nonthin_axes[a]];
  }
  d.normalize();

  // Center: c - shift * sum_i U_i l_i d_i.
  Vector step = Vector::Zero(n);
  for (int a = 0; a < k; ++a)
    step += e.basis.col(frame.nonthin_axes[a]) * (std::exp(logl[a]) * d[a]);
  out.center = e.center - shift * step;

  for (int i : frame.thin_axes) out.log_lengths[i] = e.log_lengths[i] + log_across;

  if (k == 1) {
    out.log_lengths[frame.nonthin_axes[0]] = logl[0] + std::log(along);
  } else {
    // New non-thin block has factor L Q with Q = along dd^T + across (I - dd^T).
    // Rows are graded by the axis lengths, so decompose the column-graded
    // transpose Q L and read the directions off its right singular vectors.
    const double top = logl.maxCoeff();
    const Vector scale = (logl.array() - top).exp().matrix();
    if (scale.minCoeff() == 0.0)
      throw AlgorithmFailure("non-thin axis lengths exceed the representable dynamic range");
    const Matrix Q = along * d * d.transpose() + across * (Matrix::Identity(k, k) - d * d.transpose());
    const Matrix graded = Q * scale.asDiagonal();
    Eigen::JacobiSVD<Matrix> svd(graded, Eigen::ComputeFullV);
    const Matrix& V = svd.matrixV();
    const Vector& sv = svd.singularValues();
    Matrix sub(n, k);
    for (int a = 0; a < k; ++a) sub.col(a) = e.basis.col(frame.nonthin_axes[a]);
    const Matrix rotated = sub * V;
    for (int a = 0; a < k; ++a) {
      const int axis = frame.nonthin_axes[a];
      out.basis.col(axis) = rotated.col(a);
      out.log_lengths[axis] = std::log(sv[a]) + top;
    }
  }
  keep_orthonormal(out.basis);
  return out;
}

/// Axes of length >= 3nR become nR, the rest grow by (n+1)/n, and the
/// center loses its components along the clamped axes. Returns e unchanged
/// when nothing reaches 3nR.
inline Ellipsoid clamp_axes(const Ellipsoid& e, double R, int n) {
  require(n == e.dim(), "dimension mismatch");
  const double limit = std::log(3.0 * n * R);
  std::vector<int> clamped;
  for (int i = 0; i < n; ++i)
    if (e.log_lengths[i] >= limit) clamped.push_back(i);
  if (clamped.empty()) return e;

  Ellipsoid out = e;
  const double grow = std::log((n + 1.0) / n);
  for (int i = 0; i < n; ++i) out.log_lengths[i] += grow;
  for (int i : clamped) {
    out.log_lengths[i] = std::log(n * R);
    out.center -= e.basis.col(i) * e.basis.col(i).dot(e.center);
  }
  return out;
}

/// Point of the radius-R ball closest to c in the metric of E, found by
/// bisection on the log of the Lagrange multiplier.
inline Vector mahalanobis_projection(const Ellipsoid& e, double R) {
  const Vector cc = e.basis.transpose() * e.center;
  if (cc.norm() <= R) return e.center;
  auto projected = [&](double log_lambda) {
    Vector p(cc.size());
    for (Eigen::Index i = 0; i < cc.size(); ++i)
      p[i] = cc[i] / (1.0 + std::exp(log_lambda + 2.0 * e.log_lengths[i]));
    return p;
  };
  double lo = 0.0;
  double hi = 0.0;
  while (projected(hi).norm() > R) hi += 8.0;
  while (projected(lo).norm() <= R) lo -= 8.0;
  for (int it = 0; it < 400 && hi - lo > 1e-12; ++it) {
    const double mid = 0.5 * (lo + hi);
    (projected(mid).norm() > R ? lo : hi) = mid;
  }
  Vector p = projected(hi);
  const double norm = p.norm();
  if (norm > R) p *= R / norm;
  return e.basis * p;
}

/// Translates E so its center becomes the Mahalanobis projection onto the
/// radius-R ball; shape and volume are unchanged.
inline Ellipsoid recenter(const Ellipsoid& e, double R) {
  if (e.center.norm() <= R) return e;
  Ellipsoid out = e;
  out.center = mahalanobis_projection(e, R);
  return out;
}

}  // namespace starcut
