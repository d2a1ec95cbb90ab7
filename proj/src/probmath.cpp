#include "posevae/probmath.hpp"

#include <algorithm>
#include <limits>

namespace posevae {

Cov2 cov2_from_params(double log_var1, double log_var2, double angle) {
  const double v1 = std::exp(log_var1);
  const double v2 = std::exp(log_var2);
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  const double a = c * c * v1 + s * s * v2;
  const double b = c * s * (v1 - v2);
  const double d = s * s * v1 + c * c * v2;

  Cov2 out;
  out.cov << a, b, b, d;
  const double l11 = std::sqrt(a);
  // det = v1 v2, so the second pivot is det / a without cancellation.
  out.chol << l11, 0.0, b / l11, std::sqrt(v1 * v2 / a);
  return out;
}

LatentPosterior LatentPosterior::from_raw(double m1, double m2, double lv1, double lv2,
                                          double angle) {
  LatentPosterior q;
  q.mean = {m1, m2};
  q.log_var1 = std::clamp(lv1, -kLogVarClamp, kLogVarClamp);
  q.log_var2 = std::clamp(lv2, -kLogVarClamp, kLogVarClamp);
  q.angle = angle;
  return q;
}

double LatentPosterior::logpdf(const Eigen::Vector2d& z) const {
  return gaussian_logpdf(z, mean, covariance().chol);
}

double kl_to_standard_normal(const LatentPosterior& q) {
  // The trace of the rotated covariance does not depend on the angle.
  const double trace = std::exp(q.log_var1) + std::exp(q.log_var2);
  return 0.5 * (trace + q.mean.squaredNorm() - 2.0 - q.log_det());
}

Matrix6d NoiseModel::cholesky() const {
  Matrix6d L = Matrix6d::Zero();
  for (int i = 0; i < 6; ++i) {
    L(i, i) = std::exp(log_diag[i]);
    for (int j = 0; j < i; ++j) L(i, j) = lower[strict_lower_index(i, j)];
  }
  return L;
}

Matrix6d NoiseModel::covariance() const {
  const Matrix6d L = cholesky();
  return L * L.transpose();
}

double logsumexp(std::span<const double> v) {
  if (v.empty()) throw ShapeError("logsumexp: empty input");
  double m = -std::numeric_limits<double>::infinity();
  for (double x : v) {
    if (std::isnan(x)) throw NumericError("logsumexp: NaN input");
    m = std::max(m, x);
  }
  if (!std::isfinite(m)) return m;
  if (v.size() == 1) return v[0];
  double acc = 0.0;
  for (double x : v) acc += std::exp(x - m);
  return m + std::log(acc);
}

}  // namespace posevae
