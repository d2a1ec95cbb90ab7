/// @file
/// Synthetic relocalization scenes and the line-delimited dataset format.
///
/// Poses follow a trajectory with the camera looking along its tangent.
/// Observations are random Fourier features of the clean pose,
/// cos(W h(p) + b), where h(p) stacks the translation (divided by the scene
/// extent) and the nine rotation entries. Labels are the clean poses
/// perturbed by Gaussian tangent-space noise.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "posevae/liegroup.hpp"
#include "posevae/model.hpp"
#include "posevae/rng.hpp"

namespace posevae {

enum class TrajectoryKind { Loop, FigureEight, Corridor };

std::string_view to_string(TrajectoryKind kind);
/// Accepts "loop", "figure-eight" and "corridor"; throws ConfigError otherwise.
TrajectoryKind parse_trajectory(std::string_view name);

struct SceneConfig {
  int feature_dim = 64;
  TrajectoryKind trajectory = TrajectoryKind::Loop;
  /// Loop / figure-eight radius, or corridor length (meters).
  double extent = 4.0;
  double height = 1.5;
  int n_train = 1000;
  int n_test = 200;
  /// Corridor only: the along-track coordinate enters the features modulo
  /// `period`, so poses one period apart look identical.
  bool ambiguity = false;
  double period = 2.0;
  /// Adds an out-of-distribution test split: the trajectory shifted by
  /// `ood_offset` meters along world x, with `ood_feature_bias` added to
  /// every feature.
  bool ood = false;
  double ood_offset = 6.0;
  double ood_feature_bias = 0.5;
  /// Length scale of the Fourier features in units of h; larger is smoother.
  double feature_smoothness = 1.0;
  /// Label noise standard deviation per twist axis (rho xyz [m], omega xyz [rad]).
  std::array<double, 6> noise = {0.02, 0.02, 0.02, 0.01, 0.01, 0.01};
  std::uint64_t seed = 0;

  void validate() const;
};

struct Sample {
  Eigen::VectorXd feature;
  Pose pose;
};

struct SceneDataset {
  int feature_dim = 0;
  std::vector<Sample> samples;
  SceneNormalization normalization;
  std::string split;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::vector<Pose> poses() const;
};

struct SceneSplits {
  SceneDataset train;
  SceneDataset test_id;
  /// Empty unless SceneConfig::ood is set.
  SceneDataset test_ood;
};

/// Clean trajectory pose at normalized arc parameter s in [0, 1).
Pose trajectory_pose(const SceneConfig& config, double s);

class FeatureMap {
 public:
  /// Draws W ~ N(0, 1/smoothness^2) and b ~ U[0, 2 pi).
  FeatureMap(const SceneConfig& config, Rng& rng);

  /// Features of a clean pose, without any OOD bias.
  Eigen::VectorXd operator()(const Pose& pose) const;

 private:
  Eigen::Matrix<double, 12, 1> embed(const Pose& pose) const;

  Eigen::MatrixXd W_;
  Eigen::VectorXd b_;
  double length_scale_;
  bool wrap_;
  double period_;
};

SceneSplits generate_scene(const SceneConfig& config);

/// Componentwise bounds of the translations with a 5% margin on each side;
/// an axis with zero spread is widened to +-1 m.
SceneNormalization compute_normalization(std::span<const Pose> poses);

void save_dataset(const SceneDataset& dataset, const std::filesystem::path& path);
/// Rotations whose orthonormality defect exceeds 1e-12 are re-orthonormalized
/// by Gram-Schmidt; defects above 1e-3 or det <= 0 are rejected.
SceneDataset load_dataset(const std::filesystem::path& path);

}  // namespace posevae
