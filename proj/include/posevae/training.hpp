/// @file
/// Evidence lower bound, its exact gradients, and the optimization loop.
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "posevae/model.hpp"
#include "posevae/net.hpp"
#include "posevae/rng.hpp"
#include "posevae/scenes.hpp"

namespace posevae {

struct TrainConfig {
  std::int64_t iterations = 30000;
  double lr = 1e-4;
  double weight_decay = 1e-2;
  int batch_size = 128;
  int mc_samples = 100;
  std::int64_t kl_warmup_start = 10000;
  std::int64_t kl_warmup_end = 20000;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

struct TrainRecord {
  std::int64_t iteration = 0;
  double elbo = 0.0;
  double recon = 0.0;
  double kl = 0.0;
  double kl_weight = 0.0;
  double wall_seconds = 0.0;
};

/// Thrown by fit() when the objective or its gradient stops being finite,
/// or when a pose operation fails mid-training.
class TrainingAborted : public NumericError {
 public:
  TrainingAborted(const std::string& what, TrainRecord record)
      : NumericError(what), record_(record) {}
  const TrainRecord& record() const { return record_; }

 private:
  TrainRecord record_;
};

/// log N(pose_error(predicted, target); 0, Sigma).
double recon_loglik(const Pose& predicted, const Pose& target, const NoiseModel& noise);

/// 0 before kl_warmup_start, linear up to 1 at kl_warmup_end, 1 afterwards.
double kl_weight_at(std::int64_t iteration, const TrainConfig& config);

/// Gradient buffers laid out like the model's parameters.
struct ModelGradients {
  explicit ModelGradients(const PoseVae& model);

  nn::ParamStore encoder;
  nn::ParamStore decoder;
  nn::ParamStore noise;

  void set_zero();
  void scale(double factor);
  bool all_finite() const;
  /// Same order as PoseVae::parameter_tensors().
  std::vector<const Eigen::MatrixXd*> tensors() const;
};

struct ElboValue {
  double elbo = 0.0;
  /// Mean Monte Carlo reconstruction log-likelihood.
  double recon = 0.0;
  /// Mean KL divergence to the prior (unweighted).
  double kl = 0.0;
};

/// Batch-mean ELBO with the standard-normal draws given explicitly:
/// `eps` is 2 x (batch * mc_samples), column b * mc_samples + j holding draw
/// j of batch element b. When `grads` is non-null, the exact gradient of the
/// returned ELBO is accumulated into it.
ElboValue evaluate_elbo(const PoseVae& model, std::span<const Sample* const> batch,
                        const Eigen::MatrixXd& eps, int mc_samples, double kl_weight,
                        ModelGradients* grads = nullptr);

/// Single-sample ELBO with draws taken from `rng`.
ElboValue elbo(const PoseVae& model, const Pose& y, const Eigen::VectorXd& feature, Rng& rng,
               int mc_samples, double kl_weight, ModelGradients* grads = nullptr);

struct FitResult {
  PoseVae model;
  std::vector<TrainRecord> trace;
};

/// AdamW on the negative batch ELBO with batches drawn uniformly with
/// replacement. Batch indices and reparameterization noise come from the
/// "batch" and "mc" substreams of config.seed.
FitResult fit(const SceneDataset& dataset, PoseVae model, const TrainConfig& config,
              const std::function<void(const TrainRecord&)>& on_record = {});

/// Columns: iteration, elbo, recon, kl, kl_weight.
void write_trace_csv(std::span<const TrainRecord> trace, const std::filesystem::path& path);

}  // namespace posevae
