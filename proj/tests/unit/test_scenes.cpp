#include <cmath>
#include <fstream>
#include <sstream>

#include <Eigen/LU>
#include <gtest/gtest.h>
#include <json.hpp>

#include "posevae/errors.hpp"
#include "posevae/scenes.hpp"
#include "toy.hpp"

using namespace posevae;
using posevae::testing::scratch_dir;

namespace {

SceneConfig small_scene(TrajectoryKind kind) {
  SceneConfig c;
  c.trajectory = kind;
  c.n_train = 300;
  c.n_test = 50;
  c.feature_dim = 16;
  c.seed = 42;
  return c;
}

void expect_same_dataset(const SceneDataset& a, const SceneDataset& b) {
  ASSERT_EQ(a.size(), b.size());
  EXPECT_EQ(a.feature_dim, b.feature_dim);
  EXPECT_EQ(a.normalization.t_min, b.normalization.t_min);
  EXPECT_EQ(a.normalization.t_max, b.normalization.t_max);
  for (std::size_t i = 0; i < a.size(); ++i) {
    ASSERT_EQ(a.samples[i].feature, b.samples[i].feature) << i;
    ASSERT_EQ(a.samples[i].pose.t, b.samples[i].pose.t) << i;
    ASSERT_EQ(a.samples[i].pose.R, b.samples[i].pose.R) << i;
  }
}

std::vector<std::string> read_lines(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  for (std::string l; std::getline(in, l);) out.push_back(l);
  return out;
}

void write_lines(const std::filesystem::path& p, const std::vector<std::string>& lines) {
  std::ofstream out(p);
  for (const auto& l : lines) out << l << '\n';
}

std::string sample_line(const Eigen::VectorXd& f, const Eigen::Vector3d& t, const Eigen::Matrix3d& R) {
  nlohmann::json j;
  j["feature"] = std::vector<double>(f.data(), f.data() + f.size());
  j["t"] = {t.x(), t.y(), t.z()};
  std::vector<double> r;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) r.push_back(R(a, b));
  j["R"] = r;
  return j.dump();
}

const std::string kMeta =
    R"({"version":1,"feature_dim":2,"scene_min":[-1,-1,-1],"scene_max":[1,1,1]})";

}  // namespace

TEST(Scenes, ParseTrajectory) {
  EXPECT_EQ(parse_trajectory("loop"), TrajectoryKind::Loop);
  EXPECT_EQ(parse_trajectory("figure-eight"), TrajectoryKind::FigureEight);
  EXPECT_EQ(parse_trajectory("corridor"), TrajectoryKind::Corridor);
  EXPECT_EQ(to_string(TrajectoryKind::FigureEight), "figure-eight");
  EXPECT_THROW(parse_trajectory("spiral"), ConfigError);
}

TEST(Scenes, ConfigValidation) {
  SceneConfig c;
  EXPECT_NO_THROW(c.validate());
  c.n_train = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SceneConfig{};
  c.trajectory = TrajectoryKind::Corridor;
  c.ambiguity = true;
  c.period = 0.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SceneConfig{};
  c.feature_smoothness = -1.0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = SceneConfig{};
  c.noise[3] = -0.1;
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(generate_scene(c), ConfigError);
}

TEST(Scenes, TrajectoryPosesAreValidAndTangent) {
  for (auto kind : {TrajectoryKind::Loop, TrajectoryKind::FigureEight, TrajectoryKind::Corridor}) {
    const SceneConfig c = small_scene(kind);
    for (int i = 0; i < 100; ++i) {
      const double s = i / 100.0;
      const Pose p = trajectory_pose(c, s);
      EXPECT_LT(orthonormality_defect(p.R), 1e-12);
      EXPECT_NEAR(p.R.determinant(), 1.0, 1e-12);
      EXPECT_DOUBLE_EQ(p.t.z(), c.height);
      // The viewing axis follows the finite-difference tangent.
      const double h = 1e-6;
      const Eigen::Vector3d d = (trajectory_pose(c, s + h).t - trajectory_pose(c, s - h).t);
      if (d.norm() > 1e-9) EXPECT_GT(d.normalized().dot(p.R.col(0)), 1.0 - 1e-6);
    }
  }
}

TEST(Scenes, AmbiguousPairsShareFeaturesExactly) {
  SceneConfig c = small_scene(TrajectoryKind::Corridor);
  c.ambiguity = true;
  c.extent = 8.0;
  c.period = 2.0;
  Rng rng(1);
  const FeatureMap g(c, rng);
  // Dyadic arc positions keep s*extent and its shift by a period exact.
  for (int k = 0; k < 64; ++k) {
    const double s = k / 256.0;
    const Pose a = trajectory_pose(c, s);
    const Pose b = trajectory_pose(c, s + c.period / c.extent);
    EXPECT_EQ(b.t.x() - a.t.x(), c.period);
    EXPECT_EQ(g(a), g(b));
  }
  std::uniform_real_distribution<double> u(0.0, 0.75);
  for (int k = 0; k < 200; ++k) {
    const double s = u(rng);
    EXPECT_LT((g(trajectory_pose(c, s)) - g(trajectory_pose(c, s + 0.25))).cwiseAbs().maxCoeff(), 1e-12);
  }
  c.ambiguity = false;
  Rng rng2(1);
  const FeatureMap plain(c, rng2);
  EXPECT_GT((plain(trajectory_pose(c, 0.1)) - plain(trajectory_pose(c, 0.35))).norm(), 1e-3);
}

TEST(Scenes, OodOffByDefault) {
  const SceneSplits s = generate_scene(small_scene(TrajectoryKind::Loop));
  EXPECT_TRUE(s.test_ood.empty());
  EXPECT_EQ(s.train.size(), 300u);
  EXPECT_EQ(s.test_id.size(), 50u);
  EXPECT_EQ(s.train.split, "train");
  EXPECT_EQ(s.test_id.split, "test_id");
}

TEST(Scenes, OodTranslationsLeaveTrainingBox) {
  const RunConfig rc = posevae::testing::load_config("toy_ood.json", 5);
  SceneConfig c = rc.scene;
  c.seed = 5;
  const SceneSplits s = generate_scene(c);
  ASSERT_EQ(s.test_ood.size(), static_cast<std::size_t>(c.n_test));
  const SceneNormalization& n = s.train.normalization;
  int outside = 0;
  for (const auto& smp : s.test_ood.samples) {
    const Eigen::Vector3d u = n.normalize(smp.pose.t);
    if ((u.array() < 0.0).any() || (u.array() > 1.0).any()) ++outside;
  }
  EXPECT_GE(2 * outside, static_cast<int>(s.test_ood.size()));
  // The feature bias is visible in the mean.
  Eigen::VectorXd mid = Eigen::VectorXd::Zero(c.feature_dim), mood = mid;
  for (const auto& smp : s.test_id.samples) mid += smp.feature / s.test_id.size();
  for (const auto& smp : s.test_ood.samples) mood += smp.feature / s.test_ood.size();
  EXPECT_GT((mood - mid).mean(), 0.0);
}

TEST(Scenes, NearestFeatureNeighbourIsTrajectoryNeighbour) {
  for (auto kind : {TrajectoryKind::Loop, TrajectoryKind::FigureEight, TrajectoryKind::Corridor}) {
    SceneConfig c = small_scene(kind);
    c.feature_dim = 64;
    c.n_train = 1000;
    const SceneDataset d = generate_scene(c).train;
    const double spacing = 0.2;
    int ok = 0;
    for (std::size_t i = 0; i < d.size(); ++i) {
      double best = std::numeric_limits<double>::infinity();
      std::size_t arg = i;
      for (std::size_t j = 0; j < d.size(); ++j) {
        if (j == i) continue;
        const double dist = (d.samples[i].feature - d.samples[j].feature).squaredNorm();
        if (dist < best) {
          best = dist;
          arg = j;
        }
      }
      if ((d.samples[i].pose.t - d.samples[arg].pose.t).norm() < spacing) ++ok;
    }
    EXPECT_GE(ok, static_cast<int>(0.95 * d.size())) << to_string(kind);
  }
}

TEST(Scenes, GenerationIsDeterministic) {
  SceneConfig c = small_scene(TrajectoryKind::FigureEight);
  c.ood = true;
  const SceneSplits a = generate_scene(c);
  const SceneSplits b = generate_scene(c);
  expect_same_dataset(a.train, b.train);
  expect_same_dataset(a.test_id, b.test_id);
  expect_same_dataset(a.test_ood, b.test_ood);
  c.seed = 43;
  EXPECT_NE(generate_scene(c).train.samples[0].feature, a.train.samples[0].feature);
}

TEST(Scenes, GeneratedPosesValid) {
  const SceneSplits s = generate_scene(small_scene(TrajectoryKind::Loop));
  for (const auto& smp : s.train.samples) {
    EXPECT_LT(orthonormality_defect(smp.pose.R), 1e-12);
    EXPECT_GT(smp.pose.R.determinant(), 0.0);
    EXPECT_EQ(smp.feature.size(), 16);
    EXPECT_LE(smp.feature.cwiseAbs().maxCoeff(), 1.0);
  }
}

TEST(Scenes, NormalizationExamples) {
  std::vector<Pose> corners;
  for (int k = 0; k < 8; ++k) {
    corners.push_back(Pose::from_translation(
        Eigen::Vector3d((k & 1) ? 10 : 0, (k & 2) ? 10 : 0, (k & 4) ? 10 : 0)));
  }
  const SceneNormalization n = compute_normalization(corners);
  EXPECT_EQ(n.t_min, Eigen::Vector3d::Constant(-0.5));
  EXPECT_EQ(n.t_max, Eigen::Vector3d::Constant(10.5));

  const std::vector<Pose> one{Pose::from_translation(Eigen::Vector3d(1, 2, 3))};
  const SceneNormalization m = compute_normalization(one);
  EXPECT_EQ(m.t_min, Eigen::Vector3d(0, 1, 2));
  EXPECT_EQ(m.t_max, Eigen::Vector3d(2, 3, 4));
  EXPECT_THROW(compute_normalization(std::vector<Pose>{}), DataError);
}

TEST(Scenes, SaveLoadBitExact) {
  SceneConfig c = small_scene(TrajectoryKind::FigureEight);
  c.ood = true;
  const SceneSplits s = generate_scene(c);
  const auto dir = scratch_dir("scenes_rt");
  for (const SceneDataset* d : {&s.train, &s.test_id, &s.test_ood}) {
    save_dataset(*d, dir / "d.jsonl");
    const SceneDataset back = load_dataset(dir / "d.jsonl");
    expect_same_dataset(*d, back);
    EXPECT_EQ(back.split, d->split);
  }
}

TEST(Scenes, LoadedTrainTranslationsInsideUnitCube) {
  const SceneSplits s = generate_scene(small_scene(TrajectoryKind::Loop));
  const auto dir = scratch_dir("scenes_box");
  save_dataset(s.train, dir / "train.jsonl");
  const SceneDataset d = load_dataset(dir / "train.jsonl");
  for (const auto& smp : d.samples) {
    const Eigen::Vector3d u = d.normalization.normalize(smp.pose.t);
    EXPECT_TRUE((u.array() >= 0.0).all() && (u.array() <= 1.0).all());
  }
}

TEST(Scenes, TruncatedFileNamesLine) {
  const SceneSplits s = generate_scene(small_scene(TrajectoryKind::Loop));
  const auto dir = scratch_dir("scenes_trunc");
  save_dataset(s.test_id, dir / "d.jsonl");
  auto lines = read_lines(dir / "d.jsonl");
  const std::size_t last = lines.size();
  lines.back() = lines.back().substr(0, lines.back().size() / 2);
  write_lines(dir / "d.jsonl", lines);
  try {
    load_dataset(dir / "d.jsonl");
    FAIL() << "expected DataError";
  } catch (const DataError& e) {
    EXPECT_EQ(e.line(), last);
    EXPECT_NE(std::string(e.what()).find("line " + std::to_string(last)), std::string::npos);
  }
}

TEST(Scenes, NoisyRotationIsReorthonormalized) {
  Rng rng(7);
  const Eigen::Matrix3d R = posevae::testing::random_rotation(rng);
  Eigen::Matrix3d noisy = R;
  std::uniform_real_distribution<double> u(-1e-5, 1e-5);
  for (int i = 0; i < 9; ++i) noisy(i) += u(rng);
  ASSERT_GT(orthonormality_defect(noisy), 1e-12);
  const auto dir = scratch_dir("scenes_noisy");
  write_lines(dir / "d.jsonl", {kMeta, sample_line(Eigen::Vector2d(0.1, 0.2), Eigen::Vector3d::Zero(), noisy)});
  const SceneDataset d = load_dataset(dir / "d.jsonl");
  ASSERT_EQ(d.size(), 1u);
  const Eigen::Matrix3d& L = d.samples[0].pose.R;
  EXPECT_LT(orthonormality_defect(L), 1e-12);
  EXPECT_NEAR(L.determinant(), 1.0, 1e-12);
  EXPECT_LT((L - R).norm(), 1e-4);
}

TEST(Scenes, RejectsBadRecords) {
  const auto dir = scratch_dir("scenes_bad");
  const auto f = Eigen::Vector2d(0.1, 0.2);
  Eigen::Matrix3d skew = Eigen::Matrix3d::Identity();
  skew(0, 1) = 0.01;
  Eigen::Matrix3d reflect = Eigen::Matrix3d::Identity();
  reflect(2, 2) = -1.0;
  const std::string good = sample_line(f, Eigen::Vector3d::Zero(), Eigen::Matrix3d::Identity());
  const std::vector<std::pair<std::vector<std::string>, std::size_t>> cases{
      {{kMeta, good, sample_line(f, Eigen::Vector3d::Zero(), skew)}, 3},
      {{kMeta, sample_line(f, Eigen::Vector3d::Zero(), reflect)}, 2},
      {{kMeta, good, sample_line(Eigen::Vector3d(1, 2, 3), Eigen::Vector3d::Zero(), Eigen::Matrix3d::Identity())}, 3},
      {{R"({"version":2,"feature_dim":2,"scene_min":[0,0,0],"scene_max":[1,1,1]})", good}, 1},
      {{R"({"version":1,"feature_dim":2,"scene_min":[0,0,0],"scene_max":[1,0,1]})", good}, 1},
      {{kMeta, good, R"({"feature":[1,2],"t":[0,0],"R":[1,0,0,0,1,0,0,0,1]})"}, 3},
      {{kMeta, R"([1,2,3])"}, 2},
  };
  for (const auto& [lines, bad_line] : cases) {
    write_lines(dir / "d.jsonl", lines);
    try {
      load_dataset(dir / "d.jsonl");
      ADD_FAILURE() << "accepted: " << lines.back();
    } catch (const DataError& e) {
      EXPECT_EQ(e.line(), bad_line) << e.what();
    }
  }
  EXPECT_THROW(load_dataset(dir / "missing.jsonl"), DataError);
}
