/// @file
/// Gaussian densities, covariance parameterizations and log-domain reductions.
#pragma once

#include <cmath>
#include <numbers>
#include <span>

#include <Eigen/Core>

#include "posevae/errors.hpp"
#include "posevae/liegroup.hpp"

namespace posevae {

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;  // log(2 pi)
inline constexpr double kLogVarClamp = 10.0;

/// log N(x; mean, L L^T) for lower-triangular L with positive diagonal.
/// The quadratic form uses a triangular solve.
template <typename VecX, typename VecM, typename MatL>
double gaussian_logpdf(const Eigen::MatrixBase<VecX>& x, const Eigen::MatrixBase<VecM>& mean,
                       const Eigen::MatrixBase<MatL>& chol) {
  const auto n = x.size();
  if (mean.size() != n || chol.rows() != n || chol.cols() != n) {
    throw ShapeError("gaussian_logpdf: dimension mismatch");
  }
  if (!x.allFinite() || !mean.allFinite() || !chol.allFinite()) {
    throw NumericError("gaussian_logpdf: non-finite input");
  }
  const auto u = chol.template triangularView<Eigen::Lower>().solve(x - mean).eval();
  const double log_det = 2.0 * chol.diagonal().array().log().sum();
  return -0.5 * (static_cast<double>(n) * kLog2Pi + log_det + u.squaredNorm());
}

/// log N(z; 0, I) for a 2-vector.
inline double standard_normal_logpdf2(const Eigen::Vector2d& z) {
  return -kLog2Pi - 0.5 * z.squaredNorm();
}

/// Covariance of a 2-D Gaussian built from two log-variances and the angle of
/// an SO(2) rotation: R(angle) diag(exp(lv1), exp(lv2)) R(angle)^T.
struct Cov2 {
  Eigen::Matrix2d cov;
  Eigen::Matrix2d chol;
};
Cov2 cov2_from_params(double log_var1, double log_var2, double angle);

/// Diagonal Gaussian posterior over the 2-D latent, rotated by `angle`.
struct LatentPosterior {
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  double log_var1 = 0.0;
  double log_var2 = 0.0;
  double angle = 0.0;

  /// Builds a posterior from raw network outputs, clamping the log-variances
  /// to [-kLogVarClamp, kLogVarClamp].
  static LatentPosterior from_raw(double m1, double m2, double lv1, double lv2, double angle);

  Cov2 covariance() const { return cov2_from_params(log_var1, log_var2, angle); }
  double log_det() const { return log_var1 + log_var2; }
  double logpdf(const Eigen::Vector2d& z) const;
};

double kl_to_standard_normal(const LatentPosterior& q);

/// Homoscedastic pose-noise covariance Sigma = L L^T with
/// diag(L) = exp(log_diag) and the strict lower triangle stored row by row:
/// (1,0), (2,0), (2,1), (3,0), ... , (5,4).
struct NoiseModel {
  Vector6d log_diag = Vector6d::Zero();
  Eigen::Matrix<double, 15, 1> lower = Eigen::Matrix<double, 15, 1>::Zero();

  Matrix6d cholesky() const;
  Matrix6d covariance() const;
  double log_det() const { return 2.0 * log_diag.sum(); }
};

/// Index of L(row, col), row > col, within NoiseModel::lower.
constexpr int strict_lower_index(int row, int col) { return row * (row - 1) / 2 + col; }

/// log sum exp(v) with a max shift. Throws on empty input.
double logsumexp(std::span<const double> v);

}  // namespace posevae
