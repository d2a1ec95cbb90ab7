#include "posevae/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "posevae/errors.hpp"

namespace posevae {

using nlohmann::json;

std::vector<double> average_ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i + 1;
    while (j < n && v[order[j]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j + 1);  // mean of i+1 .. j
    for (std::size_t k = i; k < j; ++k) ranks[order[k]] = r;
    i = j;
  }
  return ranks;
}

double spearman(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ShapeError("spearman: inputs differ in length");
  if (u.size() < 2) throw ShapeError("spearman: need at least two elements");
  for (std::size_t i = 0; i < u.size(); ++i) {
    if (!std::isfinite(u[i]) || !std::isfinite(v[i])) throw NumericError("spearman: non-finite input");
  }
  const auto ru = average_ranks(u);
  const auto rv = average_ranks(v);
  const double n = static_cast<double>(u.size());
  const double mean = 0.5 * (n + 1.0);
  double suv = 0.0, suu = 0.0, svv = 0.0;
  for (std::size_t i = 0; i < ru.size(); ++i) {
    const double a = ru[i] - mean;
    const double b = rv[i] - mean;
    suv += a * b;
    suu += a * a;
    svv += b * b;
  }
  if (suu == 0.0 || svv == 0.0) throw DegenerateInputError("spearman: correlation undefined for constant input");
  return std::clamp(suv / std::sqrt(suu * svv), -1.0, 1.0);
}

double median(std::vector<double> v) {
  if (v.empty()) throw ShapeError("median of empty sequence");
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 == 1 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

namespace {

double median_of_smallest(std::vector<double> v, std::size_t k) {
  std::sort(v.begin(), v.end());
  v.resize(k);
  return median(std::move(v));
}

}  // namespace

PoseErrorPair pose_errors(std::span<const Pose> samples, const Pose& y, double keep_fraction) {
  if (samples.empty()) throw ShapeError("pose_errors: no samples");
  if (!(keep_fraction > 0.0 && keep_fraction <= 1.0)) {
    throw ShapeError("pose_errors: keep_fraction must lie in (0, 1]");
  }
  const std::size_t n = samples.size();
  const double raw = std::ceil(keep_fraction * static_cast<double>(n) - 1e-9);
  const std::size_t k = std::clamp<std::size_t>(static_cast<std::size_t>(std::max(raw, 1.0)), 1, n);
  std::vector<double> tra(n), rot(n);
  for (std::size_t i = 0; i < n; ++i) {
    tra[i] = (samples[i].t - y.t).norm();
    rot[i] = rotation_angle_deg(samples[i].R.transpose() * y.R);
  }
  return {median_of_smallest(std::move(tra), k), median_of_smallest(std::move(rot), k)};
}

CorrelationReport correlation_report(std::span<const ErrorRecord> records,
                                     std::optional<double> translation_filter) {
  if (records.size() < 2) throw DataError("correlation report needs at least two records");
  std::vector<double> nll, tra, rot, nll_f, tra_f, rot_f;
  for (const auto& r : records) {
    nll.push_back(r.nll_score);
    tra.push_back(r.translation_error);
    rot.push_back(r.rotation_error);
    if (!translation_filter || r.translation_error < *translation_filter) {
      nll_f.push_back(r.nll_score);
      tra_f.push_back(r.translation_error);
      rot_f.push_back(r.rotation_error);
    }
  }
  if (nll_f.size() < 2) {
    throw DataError("fewer than two records remain below the translation filter");
  }
  CorrelationReport rep;
  rep.n = records.size();
  rep.n_filtered = nll_f.size();
  rep.filter_m = translation_filter;
  rep.spearman_tra = spearman(nll, tra);
  rep.spearman_rot = spearman(nll, rot);
  rep.spearman_tra_filtered = spearman(nll_f, tra_f);
  rep.spearman_rot_filtered = spearman(nll_f, rot_f);
  rep.median_tra_m = median(tra);
  rep.median_rot_deg = median(rot);
  return rep;
}

json to_json(const CorrelationReport& report) {
  json j;
  j["version"] = 1;
  j["spearman_tra"] = report.spearman_tra;
  j["spearman_rot"] = report.spearman_rot;
  j["spearman_tra_filtered"] = report.spearman_tra_filtered;
  j["spearman_rot_filtered"] = report.spearman_rot_filtered;
  j["median_tra_m"] = report.median_tra_m;
  j["median_rot_deg"] = report.median_rot_deg;
  j["n"] = report.n;
  j["n_filtered"] = report.n_filtered;
  j["filter_m"] = report.filter_m ? json(*report.filter_m) : json(nullptr);
  return j;
}

void write_report(const CorrelationReport& report, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot open '" + path.string() + "' for writing");
  out << to_json(report).dump(2) << '\n';
}

}  // namespace posevae
