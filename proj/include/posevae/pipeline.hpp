/// @file
/// Seeded end-to-end steps shared by the command-line tool and the test
/// suites. All randomness is derived from RunConfig::seed through named
/// substreams: "scene", "init", "batch", "mc", "predict", "inference".
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "posevae/inference.hpp"
#include "posevae/run_config.hpp"
#include "posevae/scenes.hpp"
#include "posevae/training.hpp"

namespace posevae {

/// Scene config with its seed derived from the run seed.
SceneConfig seeded_scene_config(const RunConfig& config);
SceneSplits generate_scene(const RunConfig& config);

/// Model config with feature_dim resolved against the data. Throws
/// ConfigError when the document sets a conflicting feature_dim.
ModelConfig resolve_model_config(const RunConfig& config, int data_feature_dim);

/// Initializes a model on the training set's normalization and fits it.
FitResult train_model(const RunConfig& config, const SceneDataset& train,
                      const std::function<void(const TrainRecord&)>& on_record = {});

/// Independent stream for query `index` of the named substream.
Rng query_rng(std::uint64_t seed, const char* stream, std::size_t index);

/// Pose samples per query, drawn from the "predict" substream.
std::vector<std::vector<Pose>> predict_dataset(const PoseVae& model, const SceneDataset& data,
                                               int samples, std::uint64_t seed);

/// Uncertainty report per query, drawn from the "inference" substream.
std::vector<UncertaintyReport> score_dataset(const PoseVae& model, const SceneDataset& data,
                                             int n_gen, int M, std::uint64_t seed);

}  // namespace posevae
