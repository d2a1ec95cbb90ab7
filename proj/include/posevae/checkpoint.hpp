/// @file
/// Model checkpoints as JSON documents:
///
///   { "version": 1,
///     "model_config": {...},
///     "normalization": {"t_min": [3], "t_max": [3]},
///     "params": [{"name": "encoder.layer1.weight", "shape": [r, c], "data": [row-major]}, ...],
///     "noise": {"log_diag": [6], "lower": [15]} }
///
/// Numbers use the shortest round-trip decimal form, so a save/load cycle
/// reproduces every parameter bit for bit.
#pragma once

#include <filesystem>

#include <json.hpp>

#include "posevae/model.hpp"

namespace posevae {

inline constexpr int kCheckpointVersion = 1;

nlohmann::json checkpoint_to_json(const PoseVae& model);
/// Throws DataError on a version mismatch or any missing, misshaped or
/// unknown parameter.
PoseVae checkpoint_from_json(const nlohmann::json& doc);

/// Writes to a temporary sibling and renames it into place.
void save_checkpoint(const PoseVae& model, const std::filesystem::path& path);
PoseVae load_checkpoint(const std::filesystem::path& path);

}  // namespace posevae
