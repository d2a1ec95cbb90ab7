#include "toy.hpp"

#include <numbers>
#include <random>

#include <unistd.h>

namespace posevae::testing {

Eigen::Matrix3d random_rotation(Rng& rng, double max_angle) {
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> angle(0.0, max_angle);
  Eigen::Vector3d axis(n01(rng), n01(rng), n01(rng));
  return so3_exp(axis.normalized() * angle(rng));
}

Pose random_pose(Rng& rng, double max_t, double max_angle) {
  std::uniform_real_distribution<double> u(-max_t, max_t);
  Pose p;
  p.R = random_rotation(rng, max_angle);
  p.t = Eigen::Vector3d(u(rng), u(rng), u(rng));
  return p;
}

Twist random_twist(Rng& rng, double max_angle, double max_rho) {
  std::normal_distribution<double> n01;
  std::uniform_real_distribution<double> angle(0.0, max_angle);
  std::uniform_real_distribution<double> u(-max_rho, max_rho);
  Eigen::Vector3d axis(n01(rng), n01(rng), n01(rng));
  Twist xi;
  xi << u(rng), u(rng), u(rng), axis.normalized() * angle(rng);
  return xi;
}

PoseVae random_model(const ModelConfig& config, std::uint64_t seed, double noise_scale) {
  SceneNormalization norm;
  norm.t_min = Eigen::Vector3d(-1.0, -2.0, 0.0);
  norm.t_max = Eigen::Vector3d(3.0, 1.0, 1.5);
  PoseVae model(config, norm);
  Rng rng(seed);
  model.initialize(rng);
  std::uniform_real_distribution<double> u(-noise_scale, noise_scale);
  for (auto* m : model.parameter_tensors()) {
    for (Eigen::Index i = 0; i < m->size(); ++i) (*m)(i) += u(rng);
  }
  return model;
}

ModelConfig tiny_model_config(int feature_dim) {
  ModelConfig c;
  c.feature_dim = feature_dim;
  c.hidden_dim = 8;
  c.num_layers = 2;
  c.residual_layer = 1;
  return c;
}

std::filesystem::path config_path(const std::string& name) {
  return std::filesystem::path(POSEVAE_CONFIG_DIR) / name;
}

RunConfig load_config(const std::string& name, std::uint64_t seed) {
  RunConfig c = load_run_config(config_path(name));
  c.seed = seed;
  return c;
}

ToyRun train_toy(const RunConfig& config) {
  SceneSplits splits = generate_scene(config);
  FitResult fit = train_model(config, splits.train);
  return {config, std::move(splits), std::move(fit.model), std::move(fit.trace)};
}

std::filesystem::path scratch_dir(const std::string& tag) {
  static int counter = 0;
  const auto dir = std::filesystem::temp_directory_path() /
                   ("posevae_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

}  // namespace posevae::testing
