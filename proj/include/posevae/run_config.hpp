/// @file
/// Run configuration document. Every section is optional and falls back to
/// the defaults below; unknown keys are rejected.
///
///   {
///     "seed": 0,
///     "scene":     { "feature_dim", "trajectory", "extent", "height", "n_train",
///                    "n_test", "ambiguity", "period", "ood", "ood_offset",
///                    "ood_feature_bias", "feature_smoothness", "noise": [6] },
///     "model":     { "feature_dim", "latent_dim", "hidden_dim", "num_layers",
///                    "leaky_slope", "residual_layer" },
///     "train":     { "iterations", "lr", "weight_decay", "batch_size", "mc_samples",
///                    "kl_warmup_start", "kl_warmup_end", "beta1", "beta2", "eps" },
///     "inference": { "n_gen", "importance_samples", "pred_samples",
///                    "grid_half_width", "grid_n" },
///     "metrics":   { "keep_fraction", "translation_filter" }
///   }
#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>

#include <json.hpp>

#include "posevae/inference.hpp"
#include "posevae/model.hpp"
#include "posevae/scenes.hpp"
#include "posevae/training.hpp"

namespace posevae {

struct InferenceConfig {
  int n_gen = kDefaultGenerations;
  int importance_samples = kDefaultImportanceSamples;
  int pred_samples = 100;
  double grid_half_width = 6.0;
  int grid_n = 200;
};

struct MetricsConfig {
  double keep_fraction = 0.1;
  std::optional<double> translation_filter;
};

struct RunConfig {
  std::uint64_t seed = 0;
  SceneConfig scene;
  ModelConfig model;
  /// False when the document leaves model.feature_dim to be taken from data.
  bool model_feature_dim_set = false;
  TrainConfig train;
  InferenceConfig inference;
  MetricsConfig metrics;

  /// Throws ConfigError on any invalid value.
  void validate() const;
};

/// Throws ConfigError on unknown keys, wrong types or invalid values.
RunConfig parse_run_config(const nlohmann::json& doc);
RunConfig load_run_config(const std::filesystem::path& path);
nlohmann::json to_json(const RunConfig& config);

}  // namespace posevae
