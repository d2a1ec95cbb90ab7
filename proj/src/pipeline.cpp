#include "posevae/pipeline.hpp"

#include "posevae/errors.hpp"

namespace posevae {

SceneConfig seeded_scene_config(const RunConfig& config) {
  SceneConfig sc = config.scene;
  sc.seed = derive_seed(config.seed, "scene");
  return sc;
}

SceneSplits generate_scene(const RunConfig& config) {
  return generate_scene(seeded_scene_config(config));
}

ModelConfig resolve_model_config(const RunConfig& config, int data_feature_dim) {
  ModelConfig mc = config.model;
  if (!config.model_feature_dim_set) {
    mc.feature_dim = data_feature_dim;
  } else if (mc.feature_dim != data_feature_dim) {
    throw ConfigError("model.feature_dim " + std::to_string(mc.feature_dim) +
                      " does not match the data's " + std::to_string(data_feature_dim));
  }
  return mc;
}

FitResult train_model(const RunConfig& config, const SceneDataset& train,
                      const std::function<void(const TrainRecord&)>& on_record) {
  if (train.empty()) throw DataError("training set has no samples");
  PoseVae model(resolve_model_config(config, train.feature_dim), train.normalization);
  Rng init_rng(derive_seed(config.seed, "init"));
  model.initialize(init_rng);
  TrainConfig tc = config.train;
  tc.seed = config.seed;
  return fit(train, std::move(model), tc, on_record);
}

Rng query_rng(std::uint64_t seed, const char* stream, std::size_t index) {
  return Rng(derive_seed(derive_seed(seed, stream), static_cast<std::uint64_t>(index)));
}

std::vector<std::vector<Pose>> predict_dataset(const PoseVae& model, const SceneDataset& data,
                                               int samples, std::uint64_t seed) {
  std::vector<std::vector<Pose>> out;
  out.reserve(data.size());
  for (std::size_t q = 0; q < data.size(); ++q) {
    Rng rng = query_rng(seed, "predict", q);
    out.push_back(sample_poses(model, data.samples[q].feature, samples, rng));
  }
  return out;
}

std::vector<UncertaintyReport> score_dataset(const PoseVae& model, const SceneDataset& data,
                                             int n_gen, int M, std::uint64_t seed) {
  std::vector<UncertaintyReport> out;
  out.reserve(data.size());
  for (std::size_t q = 0; q < data.size(); ++q) {
    Rng rng = query_rng(seed, "inference", q);
    out.push_back(epistemic_uncertainty(model, data.samples[q].feature, n_gen, M, rng));
  }
  return out;
}

}  // namespace posevae
