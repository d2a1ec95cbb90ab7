/// @file
/// Conditional VAE over camera poses: an encoder maps a pose to a Gaussian
/// posterior over a 2-D latent, a decoder maps (feature, latent) to a pose,
/// and a learned homoscedastic 6x6 covariance scores tangent-space errors.
#pragma once

#include <random>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "posevae/liegroup.hpp"
#include "posevae/net.hpp"
#include "posevae/probmath.hpp"

namespace posevae {

struct ModelConfig {
  int feature_dim = 512;
  int latent_dim = 2;
  int hidden_dim = 512;
  int num_layers = 5;
  double leaky_slope = 0.01;
  int residual_layer = 3;

  void validate() const;
};

/// Affine map between metric translations and the unit cube.
struct SceneNormalization {
  Eigen::Vector3d t_min = Eigen::Vector3d::Zero();
  Eigen::Vector3d t_max = Eigen::Vector3d::Ones();

  Eigen::Vector3d range() const { return t_max - t_min; }
  Eigen::Vector3d normalize(const Eigen::Vector3d& t) const {
    return (t - t_min).cwiseQuotient(range());
  }
  Eigen::Vector3d denormalize(const Eigen::Vector3d& u) const {
    return t_min + u.cwiseProduct(range());
  }
  /// Throws ConfigError unless t_max > t_min componentwise and both finite.
  void validate() const;
};

inline constexpr int kEncoderInputDim = 9;
inline constexpr int kEncoderOutputDim = 5;
inline constexpr int kDecoderOutputDim = 9;

class PoseVae {
 public:
  PoseVae(ModelConfig config, SceneNormalization normalization);

  /// Uniform fan-in weights and zero biases, except that the decoder output
  /// bias starts at the scene centre with identity rotation. Noise L = I.
  void initialize(std::mt19937_64& rng);

  const ModelConfig& config() const { return config_; }
  const SceneNormalization& normalization() const { return normalization_; }
  nn::Mlp& encoder() { return encoder_; }
  const nn::Mlp& encoder() const { return encoder_; }
  nn::Mlp& decoder() { return decoder_; }
  const nn::Mlp& decoder() const { return decoder_; }

  NoiseModel noise() const;
  void set_noise(const NoiseModel& noise);
  /// Backing tensors of the noise model: log_diag (6x1), lower (15x1).
  nn::ParamStore& noise_params() { return noise_params_; }
  const nn::ParamStore& noise_params() const { return noise_params_; }

  /// Normalized translation followed by the first two rotation columns.
  Eigen::Matrix<double, kEncoderInputDim, 1> encoder_input(const Pose& y) const;
  /// Posterior from one column of raw encoder output.
  static LatentPosterior posterior_from_output(const Eigen::Ref<const Eigen::VectorXd>& out);
  /// Pose from one column of raw decoder output; throws DegenerateInputError
  /// when the rotation head is degenerate.
  Pose pose_from_output(const Eigen::Ref<const Eigen::VectorXd>& out) const;
  /// Stacks `feature` above each column of `z` (2 x n).
  Eigen::MatrixXd decoder_input(const Eigen::MatrixXd& z, const Eigen::VectorXd& feature) const;

  LatentPosterior encode(const Pose& y) const;
  std::vector<LatentPosterior> encode(std::span<const Pose> poses) const;
  Pose decode(const Eigen::Vector2d& z, const Eigen::VectorXd& feature) const;
  /// Decodes every column of z (2 x n) under the same feature.
  std::vector<Pose> decode(const Eigen::MatrixXd& z, const Eigen::VectorXd& feature) const;

  /// Encoder, decoder, then noise tensors; the order the optimizer sees.
  std::vector<Eigen::MatrixXd*> parameter_tensors();
  std::vector<const Eigen::MatrixXd*> parameter_tensors() const;

 private:
  ModelConfig config_;
  SceneNormalization normalization_;
  nn::Mlp encoder_;
  nn::Mlp decoder_;
  nn::ParamStore noise_params_;
};

/// z = mean + chol(Sigma_q) eps.
Eigen::Vector2d reparameterize(const LatentPosterior& q, const Eigen::Vector2d& eps);

struct NoiseCovariance {
  Matrix6d chol;
  double log_det = 0.0;
};
NoiseCovariance noise_cov(const PoseVae& model);

}  // namespace posevae
