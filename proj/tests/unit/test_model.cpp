#include <cmath>
#include <random>

#include <Eigen/LU>
#include <gtest/gtest.h>

#include "posevae/errors.hpp"
#include "posevae/model.hpp"
#include "toy.hpp"

using namespace posevae;
using posevae::testing::random_model;
using posevae::testing::random_pose;

namespace {

ModelConfig small_config() {
  ModelConfig c;
  c.feature_dim = 6;
  c.hidden_dim = 12;
  c.num_layers = 3;
  c.residual_layer = 2;
  return c;
}

SceneNormalization box() {
  SceneNormalization n;
  n.t_min = Eigen::Vector3d(-2.0, 0.0, 1.0);
  n.t_max = Eigen::Vector3d(2.0, 5.0, 1.5);
  return n;
}

}  // namespace

TEST(Model, ConfigValidation) {
  ModelConfig c = small_config();
  c.latent_dim = 3;
  EXPECT_THROW(PoseVae(c, box()), ConfigError);
  c = small_config();
  c.num_layers = 0;
  EXPECT_THROW(PoseVae(c, box()), ConfigError);
  c = small_config();
  c.residual_layer = 4;
  EXPECT_THROW(PoseVae(c, box()), ConfigError);
  SceneNormalization bad = box();
  bad.t_max.x() = bad.t_min.x();
  EXPECT_THROW(PoseVae(small_config(), bad), ConfigError);
}

TEST(Model, NetworkDimensions) {
  const PoseVae m(small_config(), box());
  EXPECT_EQ(m.encoder().spec().input_dim, 9);
  EXPECT_EQ(m.encoder().spec().output_dim, 5);
  EXPECT_EQ(m.decoder().spec().input_dim, 6 + 2);
  EXPECT_EQ(m.decoder().spec().output_dim, 9);
  EXPECT_EQ(m.decoder().spec().num_layers, 3);
  EXPECT_EQ(m.decoder().spec().residual_layer, 2);
}

TEST(Model, ZeroEncoderGivesUnitPosterior) {
  PoseVae m(small_config(), box());
  m.encoder().params().set_zero();
  Rng rng(1);
  const LatentPosterior q = m.encode(random_pose(rng));
  EXPECT_EQ(q.mean, Eigen::Vector2d::Zero());
  EXPECT_EQ(q.log_var1, 0.0);
  EXPECT_EQ(q.log_var2, 0.0);
  EXPECT_EQ(q.angle, 0.0);
}

TEST(Model, EncoderInputLayout) {
  const PoseVae m(small_config(), box());
  Rng rng(2);
  Pose y = random_pose(rng);
  y.t = Eigen::Vector3d(0.0, 1.0, 1.25);
  const auto in = m.encoder_input(y);
  EXPECT_LT((in.head<3>() - Eigen::Vector3d(0.5, 0.2, 0.5)).norm(), 1e-15);
  EXPECT_EQ(in.segment<3>(3), y.R.col(0));
  EXPECT_EQ(in.segment<3>(6), y.R.col(1));
}

TEST(Model, NeutralDecoderGivesSceneCentre) {
  PoseVae m(small_config(), box());
  m.decoder().params().set_zero();
  m.decoder().params().at("out.bias") << 0.5, 0.5, 0.5, 1, 0, 0, 0, 1, 0;
  const Pose p = m.decode(Eigen::Vector2d(0.3, -2.0), Eigen::VectorXd::Ones(6));
  EXPECT_LT((p.t - Eigen::Vector3d(0.0, 2.5, 1.25)).norm(), 1e-15);
  EXPECT_TRUE(p.R.isIdentity(0.0));
}

TEST(Model, InitializeSetsNeutralDecoderAndUnitNoise) {
  PoseVae m(small_config(), box());
  Rng rng(3);
  m.initialize(rng);
  Eigen::VectorXd neutral(9);
  neutral << 0.5, 0.5, 0.5, 1, 0, 0, 0, 1, 0;
  EXPECT_EQ(Eigen::VectorXd(m.decoder().params().at("out.bias")), neutral);
  const NoiseCovariance nc = noise_cov(m);
  EXPECT_TRUE(nc.chol.isIdentity(0.0));
  EXPECT_EQ(nc.log_det, 0.0);
  EXPECT_FALSE(m.decoder().params().at("out.weight").isZero(0.0));
}

TEST(Model, DenormalizationEndpointsExact) {
  const PoseVae m(small_config(), box());
  Eigen::VectorXd out(9);
  out << 0, 0, 0, 1, 0, 0, 0, 1, 0;
  EXPECT_EQ(m.pose_from_output(out).t, box().t_min);
  out.head<3>().setOnes();
  EXPECT_EQ(m.pose_from_output(out).t, box().t_max);
}

TEST(Model, DegenerateRotationHeadThrows) {
  const PoseVae m(small_config(), box());
  Eigen::VectorXd out = Eigen::VectorXd::Zero(9);
  EXPECT_THROW(m.pose_from_output(out), DegenerateInputError);
}

TEST(Model, DecodeIsDeterministicAndValid) {
  const PoseVae m = random_model(small_config(), 4);
  Rng rng(5);
  const Eigen::MatrixXd Z = standard_normal(rng, 2, 50);
  const Eigen::VectorXd x = standard_normal(rng, 6, 1).col(0);
  const auto a = m.decode(Z, x);
  const auto b = m.decode(Z, x);
  for (Eigen::Index i = 0; i < Z.cols(); ++i) {
    EXPECT_EQ(a[i].R, b[i].R);
    EXPECT_EQ(a[i].t, b[i].t);
    EXPECT_LT(orthonormality_defect(a[i].R), 1e-12);
    EXPECT_NEAR(a[i].R.determinant(), 1.0, 1e-12);
    const Pose single = m.decode(Eigen::Vector2d(Z.col(i)), x);
    EXPECT_LT((single.R - a[i].R).norm(), 1e-14);
    EXPECT_LT((single.t - a[i].t).norm(), 1e-14);
  }
}

TEST(Model, EncodeBatchMatchesSingle) {
  const PoseVae m = random_model(small_config(), 6);
  Rng rng(7);
  std::vector<Pose> ys;
  for (int i = 0; i < 10; ++i) ys.push_back(random_pose(rng));
  const auto qs = m.encode(std::span<const Pose>(ys));
  for (int i = 0; i < 10; ++i) {
    const LatentPosterior q = m.encode(ys[i]);
    EXPECT_LT((q.mean - qs[i].mean).norm(), 1e-14);
    EXPECT_NEAR(q.log_var1, qs[i].log_var1, 1e-14);
    EXPECT_NEAR(q.angle, qs[i].angle, 1e-14);
  }
}

TEST(Model, DecoderInputStacksFeatureAboveLatent) {
  const PoseVae m(small_config(), box());
  Eigen::MatrixXd z(2, 3);
  z << 1, 2, 3, 4, 5, 6;
  const Eigen::VectorXd x = Eigen::VectorXd::LinSpaced(6, 0.0, 5.0);
  const Eigen::MatrixXd in = m.decoder_input(z, x);
  ASSERT_EQ(in.rows(), 8);
  for (int c = 0; c < 3; ++c) {
    EXPECT_EQ(Eigen::VectorXd(in.col(c).head(6)), x);
    EXPECT_EQ(Eigen::Vector2d(in.col(c).tail(2)), Eigen::Vector2d(z.col(c)));
  }
  EXPECT_THROW(m.decoder_input(z, Eigen::VectorXd::Zero(5)), ShapeError);
}

TEST(Model, ReparameterizeKnownValues) {
  LatentPosterior q;
  q.mean = Eigen::Vector2d(0.3, -0.7);
  q.log_var1 = 0.4;
  q.angle = 1.0;
  EXPECT_EQ(reparameterize(q, Eigen::Vector2d::Zero()), q.mean);
  const LatentPosterior prior;
  const Eigen::Vector2d eps(1.3, -0.2);
  EXPECT_LT((reparameterize(prior, eps) - eps).norm(), 1e-15);
}

TEST(Model, ReparameterizeMoments) {
  LatentPosterior q;
  q.mean = Eigen::Vector2d(0.5, -1.0);
  q.log_var1 = 0.7;
  q.log_var2 = -0.9;
  q.angle = 0.6;
  const Eigen::Matrix2d S = q.covariance().cov;
  Rng rng(8);
  const int n = 1000000;
  Eigen::Vector2d sum = Eigen::Vector2d::Zero();
  Eigen::Matrix2d outer = Eigen::Matrix2d::Zero();
  std::normal_distribution<double> n01;
  for (int i = 0; i < n; ++i) {
    const Eigen::Vector2d z = reparameterize(q, Eigen::Vector2d(n01(rng), n01(rng)));
    sum += z;
    outer += (z - q.mean) * (z - q.mean).transpose();
  }
  const Eigen::Vector2d mean = sum / n;
  const Eigen::Matrix2d cov = outer / n;
  for (int k = 0; k < 2; ++k) EXPECT_NEAR(mean[k], q.mean[k], 3 * std::sqrt(S(k, k) / n));
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 2; ++b) {
      const double se = std::sqrt((S(a, a) * S(b, b) + S(a, b) * S(a, b)) / n);
      EXPECT_NEAR(cov(a, b), S(a, b), 3 * se);
    }
  }
}

TEST(Model, NoiseCovScaled) {
  PoseVae m(small_config(), box());
  NoiseModel n;
  n.log_diag.setConstant(std::log(2.0));
  m.set_noise(n);
  const NoiseCovariance nc = noise_cov(m);
  EXPECT_LT((nc.chol * nc.chol.transpose() - 4.0 * Matrix6d::Identity()).norm(), 1e-14);
  EXPECT_NEAR(nc.log_det, 6.0 * std::log(4.0), 1e-14);
  EXPECT_EQ(m.noise().log_diag, n.log_diag);
}

TEST(Model, ParameterTensorOrder) {
  PoseVae m(small_config(), box());
  const auto tensors = m.parameter_tensors();
  const std::size_t ne = m.encoder().params().size();
  const std::size_t nd = m.decoder().params().size();
  ASSERT_EQ(tensors.size(), ne + nd + 2);
  EXPECT_EQ(tensors[0], &m.encoder().params()[0]);
  EXPECT_EQ(tensors[ne], &m.decoder().params()[0]);
  EXPECT_EQ(tensors[ne + nd], &m.noise_params().at("noise.log_diag"));
  EXPECT_EQ(tensors[ne + nd + 1], &m.noise_params().at("noise.lower"));
}
