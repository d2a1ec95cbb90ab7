#include "posevae/cli.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>

#include <CLI11.hpp>
#include <json.hpp>

#include "posevae/checkpoint.hpp"
#include "posevae/csv.hpp"
#include "posevae/errors.hpp"
#include "posevae/inference.hpp"
#include "posevae/metrics.hpp"
#include "posevae/pipeline.hpp"
#include "posevae/run_config.hpp"
#include "posevae/scenes.hpp"
#include "posevae/training.hpp"

namespace posevae::cli {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr const char* kPredictHeader =
    "query_index,sample_index,tx,ty,tz,r00,r01,r02,r10,r11,r12,r20,r21,r22";
constexpr const char* kUncertaintyHeader = "query_index,nll_score,n_gen,M,n_flagged";
constexpr const char* kOracleHeader = "query_index,log_evidence,skipped_cells";

// Numeric failure that still carries a diagnostics payload.
class DiagnosedFailure : public NumericError {
 public:
  DiagnosedFailure(const std::string& what, json details)
      : NumericError(what), details_(std::move(details)) {}
  const json& details() const { return details_; }

 private:
  json details_;
};

struct Options {
  std::string command;
  std::string config;
  std::string out;
  std::string out_dir;
  std::string data;
  std::string model;
  std::string pred;
  std::string unc;
  std::optional<std::uint64_t> seed;
  std::optional<int> samples;
  std::optional<int> gen;
  std::optional<int> importance;
  std::optional<int> grid_n;
  std::optional<double> half_width;
  std::optional<double> filter_m;
  std::optional<double> keep_fraction;
};

RunConfig config_or_default(const Options& o) {
  RunConfig c;
  if (!o.config.empty()) c = load_run_config(o.config);
  if (o.seed) c.seed = *o.seed;
  return c;
}

int gen_scene(const Options& o, std::ostream& out) {
  const RunConfig c = config_or_default(o);
  const SceneSplits splits = generate_scene(c);
  fs::create_directories(o.out_dir);
  save_dataset(splits.train, fs::path(o.out_dir) / "train.jsonl");
  save_dataset(splits.test_id, fs::path(o.out_dir) / "test_id.jsonl");
  save_dataset(splits.test_ood, fs::path(o.out_dir) / "test_ood.jsonl");
  if (!splits.test_ood.empty()) {
    SceneDataset all = splits.test_id;
    all.split = "test_all";
    all.samples.insert(all.samples.end(), splits.test_ood.samples.begin(), splits.test_ood.samples.end());
    save_dataset(all, fs::path(o.out_dir) / "test_all.jsonl");
  }
  out << "wrote " << splits.train.size() << " train, " << splits.test_id.size() << " test_id, "
      << splits.test_ood.size() << " test_ood samples to " << o.out_dir << '\n';
  return kExitOk;
}

int train(const Options& o, std::ostream& out) {
  const RunConfig c = config_or_default(o);
  const SceneDataset data = load_dataset(o.data);
  std::vector<TrainRecord> trace;
  std::optional<FitResult> result;
  try {
    result.emplace(train_model(c, data, [&](const TrainRecord& r) { trace.push_back(r); }));
  } catch (const TrainingAborted& e) {
    const auto& r = e.record();
    write_trace_csv(trace, o.out + ".trace.csv");
    throw DiagnosedFailure(e.what(), {{"iteration", r.iteration},
                                      {"elbo", r.elbo},
                                      {"recon", r.recon},
                                      {"kl", r.kl},
                                      {"kl_weight", r.kl_weight}});
  }
  save_checkpoint(result->model, o.out);
  write_trace_csv(result->trace, o.out + ".trace.csv");
  if (!result->trace.empty()) {
    out << "final elbo " << result->trace.back().elbo << " after "
        << result->trace.back().iteration + 1 << " iterations\n";
  }
  return kExitOk;
}

SceneDataset load_matching(const std::string& path, const PoseVae& model) {
  SceneDataset data = load_dataset(path);
  if (data.feature_dim != model.config().feature_dim) {
    throw DataError("data feature_dim " + std::to_string(data.feature_dim) +
                    " does not match the model's " + std::to_string(model.config().feature_dim));
  }
  return data;
}

int predict(const Options& o, std::ostream& out) {
  const RunConfig c = config_or_default(o);
  const PoseVae model = load_checkpoint(o.model);
  const SceneDataset data = load_matching(o.data, model);
  const int n = o.samples.value_or(c.inference.pred_samples);
  if (n < 1) throw ConfigError("--samples must be positive");
  const auto samples = predict_dataset(model, data, n, c.seed);
  auto file = csv::open_writer(o.out, kPredictHeader);
  for (std::size_t q = 0; q < samples.size(); ++q) {
    for (int s = 0; s < n; ++s) {
      const Pose& p = samples[q][s];
      file << q << ',' << s;
      for (int i = 0; i < 3; ++i) file << ',' << csv::format(p.t[i]);
      for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) file << ',' << csv::format(p.R(i, j));
      file << '\n';
    }
  }
  out << "wrote " << n << " samples for " << data.size() << " queries to " << o.out << '\n';
  return kExitOk;
}

int uncertainty(const Options& o, std::ostream& out) {
  const RunConfig c = config_or_default(o);
  const PoseVae model = load_checkpoint(o.model);
  const SceneDataset data = load_matching(o.data, model);
  const int n_gen = o.gen.value_or(c.inference.n_gen);
  const int M = o.importance.value_or(c.inference.importance_samples);
  if (n_gen < 1 || M < 1) throw ConfigError("--gen and --importance must be positive");
  const auto reports = score_dataset(model, data, n_gen, M, c.seed);
  auto file = csv::open_writer(o.out, kUncertaintyHeader);
  json failed = json::array();
  for (std::size_t q = 0; q < reports.size(); ++q) {
    const auto& rep = reports[q];
    if (!std::isfinite(rep.score)) failed.push_back(q);
    file << q << ',' << csv::format(rep.score) << ',' << n_gen << ',' << M << ',' << rep.n_flagged
         << '\n';
  }
  file.close();
  if (!failed.empty()) {
    throw DiagnosedFailure("every generation was flagged for some queries",
                           {{"queries", failed}, {"n_gen", n_gen}, {"M", M}});
  }
  out << "wrote scores for " << data.size() << " queries to " << o.out << '\n';
  return kExitOk;
}

int evaluate(const Options& o, std::ostream& out) {
  const RunConfig c = config_or_default(o);
  const SceneDataset data = load_dataset(o.data);
  const double keep = o.keep_fraction.value_or(c.metrics.keep_fraction);
  if (!(keep > 0.0 && keep <= 1.0)) throw ConfigError("--keep-fraction must lie in (0, 1]");
  std::optional<double> filter = c.metrics.translation_filter;
  if (o.filter_m) filter = *o.filter_m;
  if (filter && !(*filter > 0.0)) throw ConfigError("--filter-m must be positive");

  std::vector<std::vector<Pose>> samples(data.size());
  {
    const csv::Table t = csv::read(o.pred);
    const std::size_t qi = t.column("query_index");
    const std::size_t tx = t.column("tx");
    const std::size_t r00 = t.column("r00");
    for (const auto& [line, f] : t.rows) {
      const long long q = csv::parse_int(f[qi], line);
      if (q < 0 || static_cast<std::size_t>(q) >= data.size()) {
        throw DataError("query_index out of range", line);
      }
      Pose p;
      for (int i = 0; i < 3; ++i) p.t[i] = csv::parse_double(f[tx + i], line);
      for (int i = 0; i < 9; ++i) p.R(i / 3, i % 3) = csv::parse_double(f[r00 + i], line);
      if (!p.t.allFinite() || !p.R.allFinite()) throw DataError("non-finite predicted pose", line);
      samples[q].push_back(p);
    }
  }
  std::vector<std::optional<double>> scores(data.size());
  {
    const csv::Table t = csv::read(o.unc);
    const std::size_t qi = t.column("query_index");
    const std::size_t si = t.column("nll_score");
    for (const auto& [line, f] : t.rows) {
      const long long q = csv::parse_int(f[qi], line);
      if (q < 0 || static_cast<std::size_t>(q) >= data.size()) {
        throw DataError("query_index out of range", line);
      }
      const double s = csv::parse_double(f[si], line);
      if (!std::isfinite(s)) throw DataError("non-finite nll_score", line);
      scores[q] = s;
    }
  }
  std::vector<ErrorRecord> records;
  for (std::size_t q = 0; q < data.size(); ++q) {
    if (samples[q].empty()) throw DataError("no predictions for query " + std::to_string(q));
    if (!scores[q]) throw DataError("no uncertainty score for query " + std::to_string(q));
    const auto e = pose_errors(samples[q], data.samples[q].pose, keep);
    records.push_back({static_cast<long>(q), e.translation, e.rotation, *scores[q]});
  }
  const CorrelationReport rep = correlation_report(records, filter);
  write_report(rep, o.out);
  out << "spearman_tra " << rep.spearman_tra << ", spearman_rot " << rep.spearman_rot << '\n';
  return kExitOk;
}

int oracle_loglik(const Options& o, std::ostream& out) {
  const RunConfig c = config_or_default(o);
  const PoseVae model = load_checkpoint(o.model);
  const SceneDataset data = load_matching(o.data, model);
  const int grid_n = o.grid_n.value_or(c.inference.grid_n);
  const double w = o.half_width.value_or(c.inference.grid_half_width);
  if (grid_n < 1 || !(w > 0.0)) throw ConfigError("--grid-n and --half-width must be positive");
  auto file = csv::open_writer(o.out, kOracleHeader);
  for (std::size_t q = 0; q < data.size(); ++q) {
    const auto r = quadrature_log_evidence(model, data.samples[q].pose, data.samples[q].feature, w, grid_n);
    file << q << ',' << csv::format(r.log_evidence) << ',' << r.skipped_cells << '\n';
  }
  out << "wrote quadrature evidences for " << data.size() << " queries to " << o.out << '\n';
  return kExitOk;
}

fs::path diagnostics_path(const Options& o) {
  if (!o.out.empty()) return fs::path(o.out + ".diagnostics.json");
  if (!o.out_dir.empty()) return fs::path(o.out_dir) / "diagnostics.json";
  return fs::path("posevae.diagnostics.json");
}

void write_diagnostics(const Options& o, const std::string& what, const json& details,
                       std::ostream& err) {
  json doc = {{"version", 1}, {"command", o.command}, {"error", what}, {"details", details}};
  const fs::path path = diagnostics_path(o);
  std::ofstream f(path);
  if (f) {
    f << doc.dump(2) << '\n';
    err << "diagnostics written to " << path.string() << '\n';
  }
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Pose VAE toolkit: synthetic scenes, training, sampling and uncertainty"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-scene", "Generate train/test_id/test_ood datasets");
  gen->add_option("--config", o.config, "Run config JSON")->check(CLI::ExistingFile);
  gen->add_option("--out-dir", o.out_dir, "Output directory")->required();
  gen->add_option("--seed", o.seed, "Base seed");

  auto* tr = app.add_subcommand("train", "Fit a model and write a checkpoint");
  tr->add_option("--data", o.data, "Training dataset (JSONL)")->required();
  tr->add_option("--config", o.config, "Run config JSON")->check(CLI::ExistingFile);
  tr->add_option("--out", o.out, "Checkpoint path")->required();
  tr->add_option("--seed", o.seed, "Base seed");

  auto* pr = app.add_subcommand("predict", "Sample poses for each query");
  pr->add_option("--model", o.model, "Checkpoint")->required();
  pr->add_option("--data", o.data, "Query dataset (JSONL)")->required();
  pr->add_option("--config", o.config, "Run config JSON")->check(CLI::ExistingFile);
  pr->add_option("--samples", o.samples, "Samples per query");
  pr->add_option("--seed", o.seed, "Base seed");
  pr->add_option("--out", o.out, "Output CSV")->required();

  auto* un = app.add_subcommand("uncertainty", "Score epistemic uncertainty per query");
  un->add_option("--model", o.model, "Checkpoint")->required();
  un->add_option("--data", o.data, "Query dataset (JSONL)")->required();
  un->add_option("--config", o.config, "Run config JSON")->check(CLI::ExistingFile);
  un->add_option("--gen", o.gen, "Generated poses per query");
  un->add_option("--importance", o.importance, "Importance samples per generated pose");
  un->add_option("--seed", o.seed, "Base seed");
  un->add_option("--out", o.out, "Output CSV")->required();

  auto* ev = app.add_subcommand("evaluate", "Correlate uncertainty with pose error");
  ev->add_option("--data", o.data, "Query dataset with ground truth (JSONL)")->required();
  ev->add_option("--pred", o.pred, "Predict CSV")->required();
  ev->add_option("--unc", o.unc, "Uncertainty CSV")->required();
  ev->add_option("--config", o.config, "Run config JSON")->check(CLI::ExistingFile);
  ev->add_option("--filter-m", o.filter_m, "Translation error filter (m)");
  ev->add_option("--keep-fraction", o.keep_fraction, "Fraction of closest samples kept");
  ev->add_option("--out", o.out, "Report JSON")->required();

  auto* orc = app.add_subcommand("oracle-loglik", "Quadrature log-evidence of each query's label");
  orc->add_option("--model", o.model, "Checkpoint")->required();
  orc->add_option("--data", o.data, "Query dataset (JSONL)")->required();
  orc->add_option("--config", o.config, "Run config JSON")->check(CLI::ExistingFile);
  orc->add_option("--grid-n", o.grid_n, "Cells per latent axis");
  orc->add_option("--half-width", o.half_width, "Half width of the latent window");
  orc->add_option("--out", o.out, "Output CSV")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  o.command = app.get_subcommands().front()->get_name();

  try {
    if (o.command == "gen-scene") return gen_scene(o, out);
    if (o.command == "train") return train(o, out);
    if (o.command == "predict") return predict(o, out);
    if (o.command == "uncertainty") return uncertainty(o, out);
    if (o.command == "evaluate") return evaluate(o, out);
    return oracle_loglik(o, out);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UnsupportedError& e) {
    err << "unsupported: " << e.what() << '\n';
    return kExitUsage;
  } catch (const DataError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const ShapeError& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const DiagnosedFailure& e) {
    err << "numeric failure: " << e.what() << '\n';
    write_diagnostics(o, e.what(), e.details(), err);
    return kExitNumeric;
  } catch (const Error& e) {
    err << "numeric failure: " << e.what() << '\n';
    write_diagnostics(o, e.what(), json::object(), err);
    return kExitNumeric;
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return kExitData;
  }
}

}  // namespace posevae::cli
