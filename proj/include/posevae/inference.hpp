/// @file
/// Test-time use of a trained PoseVae: sampling poses for an observation,
/// estimating the marginal likelihood log p(y | x) by importance sampling
/// with the encoder posterior as proposal, and scoring epistemic
/// uncertainty as the negative mean log-likelihood of generated poses.
#pragma once

#include <vector>

#include <Eigen/Core>

#include "posevae/liegroup.hpp"
#include "posevae/model.hpp"
#include "posevae/rng.hpp"

namespace posevae {

inline constexpr int kDefaultGenerations = 32;
inline constexpr int kDefaultImportanceSamples = 128;

/// Decodes n latent draws from N(0, I) under `feature`.
std::vector<Pose> sample_poses(const PoseVae& model, const Eigen::VectorXd& feature, int n, Rng& rng);

/// log p(y | z_j, x) for every column z_j of `z` (2 x n). Columns whose pose
/// error is singular or whose decoded rotation is degenerate yield NaN.
Eigen::VectorXd decoder_loglik(const PoseVae& model, const Pose& y, const Eigen::VectorXd& feature,
                               const Eigen::MatrixXd& z);

/// log p(y|z_j,x) + log p(z_j) - log q(z_j|y) for M draws z_j ~ q(z|y).
/// Non-finite entries are returned as-is.
std::vector<double> importance_log_weights(const PoseVae& model, const Pose& y,
                                           const Eigen::VectorXd& feature, int M, Rng& rng);

/// log (1/M) sum_j w_j. Throws FlaggedSampleError if any weight is non-finite.
double estimate_log_evidence(const PoseVae& model, const Pose& y, const Eigen::VectorXd& feature,
                             int M, Rng& rng);

struct QuadratureResult {
  double log_evidence = 0.0;
  /// Cells dropped because the decoded pose was degenerate or singular.
  long skipped_cells = 0;
};

/// Midpoint rule for log int p(y|z,x) N(z; 0, I) dz over [-w, w]^2 with
/// grid_n^2 cells. Throws UnsupportedError unless the latent is 2-D.
QuadratureResult quadrature_log_evidence(const PoseVae& model, const Pose& y,
                                         const Eigen::VectorXd& feature, double half_width = 6.0,
                                         int grid_n = 200);

struct UncertaintyReport {
  std::vector<Pose> generated;
  /// Per-generation log-evidence estimate; NaN where flagged.
  std::vector<double> log_likelihoods;
  std::vector<bool> flagged;
  int n_flagged = 0;
  /// -mean of the unflagged log-likelihoods; NaN if every generation is flagged.
  double score = 0.0;
  int n_gen = 0;
  int importance_samples = 0;
};

/// Draws n_gen poses with sample_poses, then estimates each one's
/// log-evidence with M importance samples. Consumes `rng` exactly as the
/// equivalent sequence of sample_poses and estimate_log_evidence calls.
UncertaintyReport epistemic_uncertainty(const PoseVae& model, const Eigen::VectorXd& feature,
                                        int n_gen, int M, Rng& rng);

}  // namespace posevae
