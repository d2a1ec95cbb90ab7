#include "posevae/inference.hpp"

#include <cmath>
#include <limits>

#include "posevae/errors.hpp"
#include "posevae/probmath.hpp"

namespace posevae {
namespace {

constexpr Eigen::Index kChunk = 4096;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// log p(target(col) | z_col, x) for every column of z.
template <typename TargetOf>
Eigen::VectorXd loglik_columns(const PoseVae& model, const Eigen::VectorXd& feature,
                               const Eigen::MatrixXd& z, TargetOf target_of) {
  const NoiseModel noise = model.noise();
  const Matrix6d L = noise.cholesky();
  const double log_det = noise.log_det();
  Eigen::VectorXd out(z.cols());
  for (Eigen::Index start = 0; start < z.cols(); start += kChunk) {
    const Eigen::Index n = std::min(kChunk, z.cols() - start);
    const Eigen::MatrixXd dec_out =
        model.decoder().forward(model.decoder_input(z.middleCols(start, n), feature));
    for (Eigen::Index k = 0; k < n; ++k) {
      try {
        const Pose pred = model.pose_from_output(dec_out.col(k));
        const Twist xi = pose_error(pred, target_of(start + k));
        const Vector6d u = L.triangularView<Eigen::Lower>().solve(xi);
        out[start + k] = -0.5 * (6.0 * kLog2Pi + log_det + u.squaredNorm());
      } catch (const DegenerateInputError&) {
        out[start + k] = kNaN;
      } catch (const SingularityError&) {
        out[start + k] = kNaN;
      }
    }
  }
  return out;
}

// Importance log-weights for draws z = mean + L eps, using
// log q(z|y) = -log(2 pi) - log|L| - |eps|^2 / 2.
double log_weight(double loglik, const LatentPosterior& q, const Eigen::Vector2d& z,
                  const Eigen::Vector2d& eps) {
  const double log_q = -kLog2Pi - 0.5 * q.log_det() - 0.5 * eps.squaredNorm();
  return loglik + standard_normal_logpdf2(z) - log_q;
}

}  // namespace

std::vector<Pose> sample_poses(const PoseVae& model, const Eigen::VectorXd& feature, int n,
                               Rng& rng) {
  if (n < 0) throw ShapeError("sample_poses: n must be >= 0");
  if (n == 0) return {};
  return model.decode(standard_normal(rng, 2, n), feature);
}

Eigen::VectorXd decoder_loglik(const PoseVae& model, const Pose& y, const Eigen::VectorXd& feature,
                               const Eigen::MatrixXd& z) {
  return loglik_columns(model, feature, z, [&y](Eigen::Index) -> const Pose& { return y; });
}

std::vector<double> importance_log_weights(const PoseVae& model, const Pose& y,
                                           const Eigen::VectorXd& feature, int M, Rng& rng) {
  if (M < 1) throw ShapeError("importance sampling requires M >= 1");
  const LatentPosterior q = model.encode(y);
  const Eigen::Matrix2d chol = q.covariance().chol;
  const Eigen::MatrixXd eps = standard_normal(rng, 2, M);
  const Eigen::MatrixXd z = (chol * eps).colwise() + q.mean;
  const Eigen::VectorXd ll = decoder_loglik(model, y, feature, z);
  std::vector<double> w(static_cast<std::size_t>(M));
  for (int j = 0; j < M; ++j) w[j] = log_weight(ll[j], q, z.col(j), eps.col(j));
  return w;
}

double estimate_log_evidence(const PoseVae& model, const Pose& y, const Eigen::VectorXd& feature,
                             int M, Rng& rng) {
  const auto w = importance_log_weights(model, y, feature, M, rng);
  for (double v : w) {
    if (!std::isfinite(v)) throw FlaggedSampleError("estimate_log_evidence: non-finite importance weight");
  }
  return logsumexp(w) - std::log(static_cast<double>(M));
}

QuadratureResult quadrature_log_evidence(const PoseVae& model, const Pose& y,
                                         const Eigen::VectorXd& feature, double half_width,
                                         int grid_n) {
  if (model.config().latent_dim != 2) {
    throw UnsupportedError("quadrature_log_evidence requires a 2-D latent space");
  }
  if (grid_n < 1 || !(half_width > 0.0)) throw ShapeError("quadrature: invalid grid");
  const double h = 2.0 * half_width / grid_n;
  Eigen::MatrixXd z(2, static_cast<Eigen::Index>(grid_n) * grid_n);
  for (int i = 0; i < grid_n; ++i) {
    for (int j = 0; j < grid_n; ++j) {
      z(0, static_cast<Eigen::Index>(i) * grid_n + j) = -half_width + (i + 0.5) * h;
      z(1, static_cast<Eigen::Index>(i) * grid_n + j) = -half_width + (j + 0.5) * h;
    }
  }
  const Eigen::VectorXd ll = decoder_loglik(model, y, feature, z);
  const double log_cell = 2.0 * std::log(h);
  QuadratureResult res;
  std::vector<double> terms;
  terms.reserve(static_cast<std::size_t>(z.cols()));
  for (Eigen::Index k = 0; k < z.cols(); ++k) {
    if (std::isnan(ll[k])) {
      ++res.skipped_cells;
      continue;
    }
    terms.push_back(ll[k] + standard_normal_logpdf2(z.col(k)) + log_cell);
  }
  if (terms.empty()) throw NumericError("quadrature: every cell was skipped");
  res.log_evidence = logsumexp(terms);
  return res;
}

UncertaintyReport epistemic_uncertainty(const PoseVae& model, const Eigen::VectorXd& feature,
                                        int n_gen, int M, Rng& rng) {
  if (n_gen < 1 || M < 1) throw ShapeError("epistemic_uncertainty requires n_gen >= 1 and M >= 1");
  UncertaintyReport rep;
  rep.n_gen = n_gen;
  rep.importance_samples = M;
  rep.generated = sample_poses(model, feature, n_gen, rng);

  const auto qs = model.encode(std::span<const Pose>(rep.generated));
  const Eigen::MatrixXd eps = standard_normal(rng, 2, static_cast<Eigen::Index>(n_gen) * M);
  Eigen::MatrixXd z(2, eps.cols());
  for (int i = 0; i < n_gen; ++i) {
    const Eigen::Matrix2d chol = qs[i].covariance().chol;
    for (int j = 0; j < M; ++j) {
      const Eigen::Index col = static_cast<Eigen::Index>(i) * M + j;
      z.col(col) = qs[i].mean + chol * eps.col(col);
    }
  }
  const Eigen::VectorXd ll = loglik_columns(
      model, feature, z, [&](Eigen::Index col) -> const Pose& { return rep.generated[col / M]; });

  rep.log_likelihoods.assign(n_gen, kNaN);
  rep.flagged.assign(n_gen, false);
  double sum = 0.0;
  std::vector<double> w(static_cast<std::size_t>(M));
  for (int i = 0; i < n_gen; ++i) {
    bool ok = true;
    for (int j = 0; j < M; ++j) {
      const Eigen::Index col = static_cast<Eigen::Index>(i) * M + j;
      w[j] = log_weight(ll[col], qs[i], z.col(col), eps.col(col));
      ok = ok && std::isfinite(w[j]);
    }
    if (!ok) {
      rep.flagged[i] = true;
      ++rep.n_flagged;
      continue;
    }
    rep.log_likelihoods[i] = logsumexp(w) - std::log(static_cast<double>(M));
    sum += rep.log_likelihoods[i];
  }
  const int n_ok = n_gen - rep.n_flagged;
  rep.score = n_ok > 0 ? -sum / n_ok : kNaN;
  return rep;
}

}  // namespace posevae
