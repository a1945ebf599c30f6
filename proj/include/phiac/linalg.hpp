#pragma once

// Dense linear-algebra vocabulary shared by all modules. Everything is dynamic
// size: the plants handled here have at most a handful of states and the
// partition sizes are only known at run time.

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "phiac/errors.hpp"

namespace phiac {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

using ScalarField = std::function<double(const Vec&)>;
using VecField = std::function<Vec(const Vec&)>;
using MatField = std::function<Mat(const Vec&)>;

/// Wraps a constant matrix as a state-dependent evaluator.
inline MatField constant_field(Mat value) {
  return [value = std::move(value)](const Vec&) { return value; };
}

inline Vec concat(const Vec& a, const Vec& b) {
  Vec out(a.size() + b.size());
  out << a, b;
  return out;
}

inline Vec concat(const Vec& a, const Vec& b, const Vec& c) {
  Vec out(a.size() + b.size() + c.size());
  out << a, b, c;
  return out;
}

namespace linalg {

inline Mat sym(const Mat& a) { return 0.5 * (a + a.transpose()); }
inline Mat skew(const Mat& a) { return 0.5 * (a - a.transpose()); }

/// ||A + A^T||_F.
inline double skew_defect(const Mat& a) { return (a + a.transpose()).norm(); }

/// ||A - A^T||_F.
inline double symmetry_defect(const Mat& a) { return (a - a.transpose()).norm(); }

/// Smallest eigenvalue of the symmetric part. +inf for an empty matrix so that
/// "min eig >= threshold" holds vacuously.
inline double min_sym_eig(const Mat& a) {
  if (a.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Mat> es(sym(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

inline double max_sym_eig(const Mat& a) {
  if (a.size() == 0) return -std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Mat> es(sym(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().maxCoeff();
}

/// 2-norm condition number; +inf when singular.
inline double condition_number(const Mat& a) {
  if (a.size() == 0) return 1.0;
  Eigen::JacobiSVD<Mat> svd(a);
  const auto& sv = svd.singularValues();
  const double smin = sv(sv.size() - 1);
  if (!(smin > 0.0)) return std::numeric_limits<double>::infinity();
  return sv(0) / smin;
}

inline bool all_finite(const Vec& v) { return v.allFinite(); }

/// x^T P x.
inline double weighted_sq(const Vec& x, const Mat& p) { return x.dot(p * x); }

inline std::string format(const Vec& v) {
  std::ostringstream os;
  os.precision(12);
  os << '(';
  for (Eigen::Index i = 0; i < v.size(); ++i) os << (i ? ", " : "") << v(i);
  os << ')';
  return os.str();
}

/// Solve A x = b with a rank-revealing factorization, throwing if A is
/// numerically singular.
inline Vec solve(const Mat& a, const Vec& b, const char* what) {
  Eigen::ColPivHouseholderQR<Mat> qr(a);
  if (qr.rank() < a.cols()) throw SingularityError(std::string(what) + ": matrix is singular");
  return qr.solve(b);
}

inline Mat solve_mat(const Mat& a, const Mat& b, const char* what) {
  Eigen::ColPivHouseholderQR<Mat> qr(a);
  if (qr.rank() < a.cols()) throw SingularityError(std::string(what) + ": matrix is singular");
  return qr.solve(b);
}

inline Mat inverse(const Mat& a, const char* what) {
  Eigen::ColPivHouseholderQR<Mat> qr(a);
  if (qr.rank() < a.cols()) throw SingularityError(std::string(what) + ": matrix is singular");
  return qr.inverse();
}

}  // namespace linalg

/// Deterministic sampler for states in an axis-aligned box around a center.
class BoxSampler {
 public:
  BoxSampler(Vec center, double radius, std::uint64_t seed)
      : center_(std::move(center)), radius_(radius), rng_(seed) {}

  Vec operator()() {
    std::uniform_real_distribution<double> u(-radius_, radius_);
    Vec x = center_;
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) += u(rng_);
    return x;
  }

  std::vector<Vec> draw(std::size_t count) {
    std::vector<Vec> out;
    out.reserve(count);
    for (std::size_t k = 0; k < count; ++k) out.push_back((*this)());
    return out;
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  Vec center_;
  double radius_;
  std::mt19937_64 rng_;
};

}  // namespace phiac
