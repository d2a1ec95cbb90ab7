/// @file
/// Evaluation protocol: rank correlation between uncertainty and error,
/// closest-fraction median pose errors, and threshold-filtered reports.
#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

#include "posevae/liegroup.hpp"

namespace posevae {

struct ErrorRecord {
  long query_index = 0;
  double translation_error = 0.0;  ///< meters
  double rotation_error = 0.0;     ///< degrees
  double nll_score = 0.0;          ///< nats
};

/// 1-based ranks, ties receiving the mean of the ranks they span.
std::vector<double> average_ranks(std::span<const double> v);

/// Pearson correlation of average ranks. Throws ShapeError on length
/// mismatch or fewer than two elements, DegenerateInputError when either
/// input is constant.
double spearman(std::span<const double> u, std::span<const double> v);

struct PoseErrorPair {
  double translation = 0.0;  ///< meters
  double rotation = 0.0;     ///< degrees
};

/// Median translation error over the ceil-rounded keep_fraction of samples
/// closest in translation, and likewise for rotation, each selected on its
/// own metric.
PoseErrorPair pose_errors(std::span<const Pose> samples, const Pose& y, double keep_fraction = 0.1);

double median(std::vector<double> v);

struct CorrelationReport {
  double spearman_tra = 0.0;
  double spearman_rot = 0.0;
  double spearman_tra_filtered = 0.0;
  double spearman_rot_filtered = 0.0;
  double median_tra_m = 0.0;
  double median_rot_deg = 0.0;
  std::size_t n = 0;
  std::size_t n_filtered = 0;
  std::optional<double> filter_m;
};

/// Throws DataError when fewer than two records remain after filtering.
CorrelationReport correlation_report(std::span<const ErrorRecord> records,
                                     std::optional<double> translation_filter = std::nullopt);

nlohmann::json to_json(const CorrelationReport& report);
void write_report(const CorrelationReport& report, const std::filesystem::path& path);

}  // namespace posevae
