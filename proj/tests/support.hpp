#pragma once

// Shared helpers for the test suite: seeded generators for random matrices
// and states, and a few small synthetic plants with closed-form answers.

#include <gtest/gtest.h>

#include <random>

#include "phiac/phiac.hpp"

namespace phiac::test {

inline Vec vec(std::initializer_list<double> v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out(i++) = x;
  return out;
}

inline Mat mat(std::initializer_list<std::initializer_list<double>> rows) {
  Mat out(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.begin()->size()));
  Eigen::Index r = 0;
  for (const auto& row : rows) {
    Eigen::Index c = 0;
    for (double x : row) out(r, c++) = x;
    ++r;
  }
  return out;
}

/// Hand-rolled generator for property tests. Every draw is reproducible from
/// the seed so failures can be replayed.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }

  Vec vec(Eigen::Index n, double r = 1.0) {
    Vec v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = uniform(-r, r);
    return v;
  }
  Mat mat(Eigen::Index r, Eigen::Index c, double s = 1.0) {
    Mat m(r, c);
    for (Eigen::Index i = 0; i < r; ++i)
      for (Eigen::Index j = 0; j < c; ++j) m(i, j) = uniform(-s, s);
    return m;
  }
  Mat skew(Eigen::Index n) {
    const Mat a = mat(n, n);
    return a - a.transpose();
  }
  /// Symmetric with eigenvalues >= floor.
  Mat spd(Eigen::Index n, double floor = 0.5) {
    const Mat a = mat(n, n);
    return a * a.transpose() + floor * Mat::Identity(n, n);
  }
  /// Symmetric PSD of the given rank.
  Mat psd(Eigen::Index n, Eigen::Index rank) {
    const Mat a = mat(n, rank);
    return a * a.transpose();
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline std::vector<Vec> box(const Vec& center, double radius, int count, std::uint64_t seed) {
  BoxSampler s(center, radius, seed);
  return s.draw(count);
}

/// H = 1/2 |x|^2 on R^2 with J = [[0,1],[-1,0]] and no damping.
inline PhSystem rotation_plant(DisturbanceModel dist = {}) {
  const Partition p(1, 1);
  HamiltonianModel H{[](const Vec& x) { return 0.5 * x.squaredNorm(); }, [](const Vec& x) { return x; },
                     [](const Vec& x) { return Mat(Mat::Identity(x.size(), x.size())); }};
  return PhSystem(p, PartitionedMatrix::from_full(p, MatrixRole::interconnection, constant_field(mat({{0, 1}, {-1, 0}}))),
                  PartitionedMatrix::zero(p, MatrixRole::dissipation), H, std::move(dist), Vec::Zero(2), "rotation");
}

/// Quadratic energy 1/2 (x - x*)^T P (x - x*) with constant J, R.
struct Quadratic {
  Partition part;
  Mat P, J, R;
  Vec x_star;
};

inline PhSystem quadratic_plant(const Quadratic& q, DisturbanceModel dist = {}, std::string name = "quadratic") {
  const Mat P = q.P;
  const Vec xs = q.x_star;
  HamiltonianModel H{[P, xs](const Vec& x) { return 0.5 * (x - xs).dot(P * (x - xs)); },
                     [P, xs](const Vec& x) -> Vec { return P * (x - xs); }, [P](const Vec&) { return P; }};
  return PhSystem(q.part, PartitionedMatrix::from_full(q.part, MatrixRole::interconnection, constant_field(q.J)),
                  PartitionedMatrix::from_full(q.part, MatrixRole::dissipation, constant_field(q.R)), H,
                  std::move(dist), xs, std::move(name));
}

/// A random well-posed quadratic plant: P > 0, J skew, R >= 0 with R_uu > 0.
inline Quadratic random_quadratic(Gen& g, Eigen::Index m, Eigen::Index s) {
  const Eigen::Index n = m + s;
  Quadratic q{Partition(m, s), g.spd(n), g.skew(n), g.psd(n, n), g.vec(n)};
  q.R += 0.1 * Mat::Identity(n, n);
  return q;
}

inline DisturbanceModel matched(const Mat& G_d, const Vec& d_bar, double t_on = 0.0) {
  DisturbanceModel d;
  d.matched = MatchedDisturbance{constant_field(G_d), d_bar, t_on, false};
  return d;
}

inline DisturbanceModel unmatched(const Vec& d_bar, double t_on = 0.0) {
  DisturbanceModel d;
  d.unmatched = UnmatchedDisturbance{d_bar, t_on};
  return d;
}

inline IacGains identity_gains(Eigen::Index m, double rc2 = 1.0) {
  const Mat I = Mat::Identity(m, m);
  return IacGains::constant(Mat::Zero(m, m), I, rc2 * I, I);
}

inline double max_abs(const Mat& a) { return a.size() == 0 ? 0.0 : a.cwiseAbs().maxCoeff(); }

}  // namespace phiac::test
