#include "posevae/model.hpp"

#include <cmath>
#include <string>

#include "posevae/errors.hpp"

namespace posevae {
namespace {

nn::MlpSpec encoder_spec(const ModelConfig& c) {
  return {kEncoderInputDim, c.hidden_dim, c.num_layers, kEncoderOutputDim, c.residual_layer,
          c.leaky_slope};
}

nn::MlpSpec decoder_spec(const ModelConfig& c) {
  return {c.feature_dim + c.latent_dim, c.hidden_dim, c.num_layers, kDecoderOutputDim,
          c.residual_layer, c.leaky_slope};
}

}  // namespace

void ModelConfig::validate() const {
  if (feature_dim <= 0) throw ConfigError("model.feature_dim must be positive");
  if (latent_dim != 2) throw ConfigError("model.latent_dim must be 2");
  if (hidden_dim <= 0) throw ConfigError("model.hidden_dim must be positive");
  if (num_layers <= 0) throw ConfigError("model.num_layers must be positive");
  if (residual_layer < 0 || residual_layer > num_layers) {
    throw ConfigError("model.residual_layer must lie in [0, num_layers]");
  }
  if (!std::isfinite(leaky_slope)) throw ConfigError("model.leaky_slope must be finite");
}

void SceneNormalization::validate() const {
  if (!t_min.allFinite() || !t_max.allFinite() || !(t_max.array() > t_min.array()).all()) {
    throw ConfigError("scene normalization requires finite bounds with t_max > t_min");
  }
}

PoseVae::PoseVae(ModelConfig config, SceneNormalization normalization)
    : config_(config), normalization_(normalization) {
  config_.validate();
  normalization_.validate();
  encoder_ = nn::Mlp(encoder_spec(config_));
  decoder_ = nn::Mlp(decoder_spec(config_));
  noise_params_.add("noise.log_diag", 6, 1);
  noise_params_.add("noise.lower", 15, 1);
}

void PoseVae::initialize(std::mt19937_64& rng) {
  encoder_.init_uniform(rng);
  decoder_.init_uniform(rng);
  Eigen::VectorXd neutral(kDecoderOutputDim);
  neutral << 0.5, 0.5, 0.5, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0;
  decoder_.params().at("out.bias") = neutral;
  noise_params_.set_zero();
}

NoiseModel PoseVae::noise() const {
  NoiseModel n;
  n.log_diag = noise_params_[0].col(0);
  n.lower = noise_params_[1].col(0);
  return n;
}

void PoseVae::set_noise(const NoiseModel& noise) {
  noise_params_[0] = noise.log_diag;
  noise_params_[1] = noise.lower;
}

Eigen::Matrix<double, kEncoderInputDim, 1> PoseVae::encoder_input(const Pose& y) const {
  Eigen::Matrix<double, kEncoderInputDim, 1> in;
  in.head<3>() = normalization_.normalize(y.t);
  in.tail<6>() = rot_to_6d(y.R);
  return in;
}

LatentPosterior PoseVae::posterior_from_output(const Eigen::Ref<const Eigen::VectorXd>& out) {
  return LatentPosterior::from_raw(out[0], out[1], out[2], out[3], out[4]);
}

Pose PoseVae::pose_from_output(const Eigen::Ref<const Eigen::VectorXd>& out) const {
  Pose p;
  p.t = normalization_.denormalize(out.head<3>());
  p.R = rot_from_6d(out.segment<6>(3));
  return p;
}

Eigen::MatrixXd PoseVae::decoder_input(const Eigen::MatrixXd& z,
                                       const Eigen::VectorXd& feature) const {
  if (feature.size() != config_.feature_dim) {
    throw ShapeError("decoder: expected feature dimension " + std::to_string(config_.feature_dim) +
                     ", got " + std::to_string(feature.size()));
  }
  if (z.rows() != config_.latent_dim) throw ShapeError("decoder: latent must have 2 rows");
  Eigen::MatrixXd in(config_.feature_dim + config_.latent_dim, z.cols());
  in.topRows(config_.feature_dim) = feature.replicate(1, z.cols());
  in.bottomRows(config_.latent_dim) = z;
  return in;
}

LatentPosterior PoseVae::encode(const Pose& y) const {
  const Eigen::VectorXd out = encoder_.forward(Eigen::VectorXd(encoder_input(y)));
  return posterior_from_output(out);
}

std::vector<LatentPosterior> PoseVae::encode(std::span<const Pose> poses) const {
  Eigen::MatrixXd in(kEncoderInputDim, static_cast<Eigen::Index>(poses.size()));
  for (std::size_t i = 0; i < poses.size(); ++i) in.col(i) = encoder_input(poses[i]);
  const Eigen::MatrixXd out = encoder_.forward(in);
  std::vector<LatentPosterior> qs;
  qs.reserve(poses.size());
  for (Eigen::Index i = 0; i < out.cols(); ++i) qs.push_back(posterior_from_output(out.col(i)));
  return qs;
}

Pose PoseVae::decode(const Eigen::Vector2d& z, const Eigen::VectorXd& feature) const {
  return decode(Eigen::MatrixXd(z), feature).front();
}

std::vector<Pose> PoseVae::decode(const Eigen::MatrixXd& z, const Eigen::VectorXd& feature) const {
  const Eigen::MatrixXd out = decoder_.forward(decoder_input(z, feature));
  std::vector<Pose> poses;
  poses.reserve(out.cols());
  for (Eigen::Index i = 0; i < out.cols(); ++i) poses.push_back(pose_from_output(out.col(i)));
  return poses;
}

std::vector<Eigen::MatrixXd*> PoseVae::parameter_tensors() {
  std::vector<Eigen::MatrixXd*> out;
  for (auto& e : encoder_.params()) out.push_back(&e.value);
  for (auto& e : decoder_.params()) out.push_back(&e.value);
  for (auto& e : noise_params_) out.push_back(&e.value);
  return out;
}

std::vector<const Eigen::MatrixXd*> PoseVae::parameter_tensors() const {
  auto mut = const_cast<PoseVae*>(this)->parameter_tensors();
  return {mut.begin(), mut.end()};
}

Eigen::Vector2d reparameterize(const LatentPosterior& q, const Eigen::Vector2d& eps) {
  return q.mean + q.covariance().chol * eps;
}

NoiseCovariance noise_cov(const PoseVae& model) {
  const NoiseModel n = model.noise();
  return {n.cholesky(), n.log_det()};
}

}  // namespace posevae
