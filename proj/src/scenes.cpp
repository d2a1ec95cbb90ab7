#include "posevae/scenes.hpp"

#include <cmath>
#include <fstream>
#include <numbers>
#include <sstream>

#include <Eigen/Geometry>
#include <Eigen/LU>
#include <json.hpp>

#include "posevae/errors.hpp"

namespace posevae {
namespace {

using nlohmann::json;

constexpr double kMaxLoadDefect = 1e-3;
constexpr double kReorthonormalizeDefect = 1e-12;

Eigen::Matrix3d tangent_frame(const Eigen::Vector3d& forward) {
  const Eigen::Vector3d f = forward.normalized();
  const Eigen::Vector3d up(0.0, 0.0, 1.0);
  Eigen::Matrix3d R;
  R.col(0) = f;
  R.col(1) = up.cross(f);
  R.col(2) = up;
  return R;
}

Sample make_sample(const FeatureMap& features, const Pose& clean, const SceneConfig& config,
                   Rng& rng, double feature_bias) {
  std::normal_distribution<double> n01(0.0, 1.0);
  Twist noise;
  for (int k = 0; k < 6; ++k) noise[k] = config.noise[k] * n01(rng);
  Sample s;
  s.feature = features(clean);
  if (feature_bias != 0.0) s.feature.array() += feature_bias;
  s.pose = clean * se3_exp(noise);
  return s;
}

json vec_json(const Eigen::Ref<const Eigen::VectorXd>& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd json_vec(const json& j, const char* key, Eigen::Index expected, std::size_t line) {
  if (!j.contains(key) || !j.at(key).is_array()) {
    throw DataError(std::string("missing array field '") + key + "'", line);
  }
  const json& a = j.at(key);
  if (expected >= 0 && static_cast<Eigen::Index>(a.size()) != expected) {
    throw DataError(std::string("field '") + key + "' has " + std::to_string(a.size()) +
                        " entries, expected " + std::to_string(expected),
                    line);
  }
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw DataError(std::string("non-numeric entry in '") + key + "'", line);
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  }
  if (!v.allFinite()) throw DataError(std::string("non-finite entry in '") + key + "'", line);
  return v;
}

}  // namespace

std::string_view to_string(TrajectoryKind kind) {
  switch (kind) {
    case TrajectoryKind::Loop:
      return "loop";
    case TrajectoryKind::FigureEight:
      return "figure-eight";
    case TrajectoryKind::Corridor:
      return "corridor";
  }
  return "loop";
}

TrajectoryKind parse_trajectory(std::string_view name) {
  if (name == "loop") return TrajectoryKind::Loop;
  if (name == "figure-eight") return TrajectoryKind::FigureEight;
  if (name == "corridor") return TrajectoryKind::Corridor;
  throw ConfigError("unknown trajectory kind '" + std::string(name) + "'");
}

void SceneConfig::validate() const {
  if (feature_dim <= 0) throw ConfigError("scene.feature_dim must be positive");
  if (n_train <= 0 || n_test <= 0) throw ConfigError("scene sample counts must be positive");
  if (!(extent > 0.0) || !std::isfinite(extent)) throw ConfigError("scene.extent must be positive");
  if (!std::isfinite(height)) throw ConfigError("scene.height must be finite");
  if (ambiguity) {
    if (!(period > 0.0) || !std::isfinite(period)) {
      throw ConfigError("scene.period must be positive when ambiguity is on");
    }
    if (trajectory != TrajectoryKind::Corridor) {
      throw ConfigError("scene.ambiguity requires the corridor trajectory");
    }
  }
  if (!std::isfinite(ood_offset) || !std::isfinite(ood_feature_bias)) {
    throw ConfigError("scene OOD parameters must be finite");
  }
  if (!(feature_smoothness > 0.0) || !std::isfinite(feature_smoothness)) {
    throw ConfigError("scene.feature_smoothness must be positive");
  }
  for (double s : noise) {
    if (!(s >= 0.0) || !std::isfinite(s)) throw ConfigError("scene.noise entries must be >= 0");
  }
}

std::vector<Pose> SceneDataset::poses() const {
  std::vector<Pose> out;
  out.reserve(samples.size());
  for (const auto& s : samples) out.push_back(s.pose);
  return out;
}

Pose trajectory_pose(const SceneConfig& config, double s) {
  const double r = config.extent;
  const double u = 2.0 * std::numbers::pi * s;
  Pose p;
  switch (config.trajectory) {
    case TrajectoryKind::Loop:
      p.t = {r * std::cos(u), r * std::sin(u), config.height};
      p.R = tangent_frame({-std::sin(u), std::cos(u), 0.0});
      break;
    case TrajectoryKind::FigureEight:
      p.t = {r * std::sin(u), r * std::sin(u) * std::cos(u), config.height};
      p.R = tangent_frame({std::cos(u), std::cos(2.0 * u), 0.0});
      break;
    case TrajectoryKind::Corridor:
      p.t = {s * r, 0.0, config.height};
      p.R = Eigen::Matrix3d::Identity();
      break;
  }
  return p;
}

FeatureMap::FeatureMap(const SceneConfig& config, Rng& rng)
    : W_(config.feature_dim, 12),
      b_(config.feature_dim),
      length_scale_(config.extent),
      wrap_(config.ambiguity),
      period_(config.period) {
  std::normal_distribution<double> w_dist(0.0, 1.0 / config.feature_smoothness);
  std::uniform_real_distribution<double> b_dist(0.0, 2.0 * std::numbers::pi);
  for (Eigen::Index j = 0; j < W_.cols(); ++j)
    for (Eigen::Index i = 0; i < W_.rows(); ++i) W_(i, j) = w_dist(rng);
  for (Eigen::Index i = 0; i < b_.size(); ++i) b_[i] = b_dist(rng);
}

Eigen::Matrix<double, 12, 1> FeatureMap::embed(const Pose& pose) const {
  Eigen::Vector3d t = pose.t;
  if (wrap_) {
    double x = std::fmod(t.x(), period_);
    if (x < 0.0) x += period_;
    t.x() = x;
  }
  Eigen::Matrix<double, 12, 1> h;
  h.head<3>() = t / length_scale_;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) h[3 + 3 * r + c] = pose.R(r, c);
  return h;
}

Eigen::VectorXd FeatureMap::operator()(const Pose& pose) const {
  return ((W_ * embed(pose)) + b_).array().cos().matrix();
}

SceneSplits generate_scene(const SceneConfig& config) {
  config.validate();
  Rng map_rng(derive_seed(config.seed, "feature-map"));
  const FeatureMap features(config, map_rng);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  auto draw = [&](std::string_view split, int n, const Eigen::Vector3d& offset, double bias) {
    Rng rng(derive_seed(config.seed, split));
    SceneDataset ds;
    ds.feature_dim = config.feature_dim;
    ds.split = std::string(split);
    ds.samples.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      Pose clean = trajectory_pose(config, unit(rng));
      clean.t += offset;
      ds.samples.push_back(make_sample(features, clean, config, rng, bias));
    }
    return ds;
  };

  SceneSplits out;
  out.train = draw("train", config.n_train, Eigen::Vector3d::Zero(), 0.0);
  const auto train_poses = out.train.poses();
  const SceneNormalization norm = compute_normalization(train_poses);
  out.train.normalization = norm;
  out.test_id = draw("test_id", config.n_test, Eigen::Vector3d::Zero(), 0.0);
  out.test_id.normalization = norm;
  if (config.ood) {
    out.test_ood = draw("test_ood", config.n_test, Eigen::Vector3d(config.ood_offset, 0.0, 0.0),
                        config.ood_feature_bias);
  } else {
    out.test_ood.feature_dim = config.feature_dim;
    out.test_ood.split = "test_ood";
  }
  out.test_ood.normalization = norm;
  return out;
}

SceneNormalization compute_normalization(std::span<const Pose> poses) {
  if (poses.empty()) throw DataError("compute_normalization: no poses");
  Eigen::Vector3d lo = poses.front().t;
  Eigen::Vector3d hi = poses.front().t;
  for (const auto& p : poses) {
    lo = lo.cwiseMin(p.t);
    hi = hi.cwiseMax(p.t);
  }
  SceneNormalization n;
  for (int k = 0; k < 3; ++k) {
    const double span = hi[k] - lo[k];
    if (span > 0.0) {
      n.t_min[k] = lo[k] - 0.05 * span;
      n.t_max[k] = hi[k] + 0.05 * span;
    } else {
      n.t_min[k] = lo[k] - 1.0;
      n.t_max[k] = hi[k] + 1.0;
    }
  }
  return n;
}

void save_dataset(const SceneDataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  json meta;
  meta["version"] = 1;
  meta["feature_dim"] = dataset.feature_dim;
  meta["scene_min"] = vec_json(dataset.normalization.t_min);
  meta["scene_max"] = vec_json(dataset.normalization.t_max);
  if (!dataset.split.empty()) meta["split"] = dataset.split;
  out << meta.dump() << '\n';
  for (const auto& s : dataset.samples) {
    if (s.feature.size() != dataset.feature_dim) {
      throw DataError("save_dataset: sample feature dimension mismatch");
    }
    json rec;
    rec["feature"] = vec_json(s.feature);
    rec["t"] = vec_json(s.pose.t);
    json r = json::array();
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) r.push_back(s.pose.R(i, j));
    rec["R"] = std::move(r);
    out << rec.dump() << '\n';
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

SceneDataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path.string() + "'");

  SceneDataset ds;
  std::string line;
  std::size_t lineno = 0;
  bool have_meta = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw DataError(std::string("malformed record: ") + e.what(), lineno);
    }
    if (!j.is_object()) throw DataError("record is not an object", lineno);

    if (!have_meta) {
      if (!j.contains("version") || !j.at("version").is_number_integer() ||
          j.at("version").get<int>() != 1) {
        throw DataError("unsupported or missing dataset version", lineno);
      }
      if (!j.contains("feature_dim") || !j.at("feature_dim").is_number_integer() ||
          j.at("feature_dim").get<int>() <= 0) {
        throw DataError("missing or invalid feature_dim", lineno);
      }
      ds.feature_dim = j.at("feature_dim").get<int>();
      ds.normalization.t_min = json_vec(j, "scene_min", 3, lineno);
      ds.normalization.t_max = json_vec(j, "scene_max", 3, lineno);
      if (!(ds.normalization.t_max.array() > ds.normalization.t_min.array()).all()) {
        throw DataError("scene_max must exceed scene_min componentwise", lineno);
      }
      if (j.contains("split") && j.at("split").is_string()) ds.split = j.at("split").get<std::string>();
      have_meta = true;
      continue;
    }

    Sample s;
    s.feature = json_vec(j, "feature", ds.feature_dim, lineno);
    s.pose.t = json_vec(j, "t", 3, lineno);
    const Eigen::VectorXd r = json_vec(j, "R", 9, lineno);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) s.pose.R(a, b) = r[3 * a + b];
    const double defect = orthonormality_defect(s.pose.R);
    if (defect > kMaxLoadDefect || !(s.pose.R.determinant() > 0.0)) {
      throw DataError("rotation is not a proper rotation matrix (defect " +
                          std::to_string(defect) + ")",
                      lineno);
    }
    if (defect > kReorthonormalizeDefect) s.pose.R = rot_from_6d(rot_to_6d(s.pose.R));
    ds.samples.push_back(std::move(s));
  }
  if (!have_meta) throw DataError("missing metadata record", lineno == 0 ? 1 : lineno);
  return ds;
}

}  // namespace posevae
