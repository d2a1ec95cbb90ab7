#include "posevae/run_config.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <string>

#include "posevae/errors.hpp"

namespace posevae {

using nlohmann::json;

namespace {

// Reads typed fields out of one JSON object and rejects keys never asked for.
class Section {
 public:
  Section(const json& doc, std::string name) : name_(std::move(name)) {
    if (doc.is_null()) return;
    if (!doc.is_object()) throw ConfigError("'" + name_ + "' must be an object");
    doc_ = &doc;
  }

  template <typename T>
  bool read(const char* key, T& out) {
    known_.insert(key);
    if (doc_ == nullptr || !doc_->contains(key)) return false;
    const json& v = doc_->at(key);
    try {
      if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) throw ConfigError("");
        out = v.get<bool>();
      } else if constexpr (std::is_integral_v<T>) {
        if (!v.is_number_integer()) throw ConfigError("");
        if (std::is_unsigned_v<T> && v.is_number_integer() && !v.is_number_unsigned() &&
            v.get<std::int64_t>() < 0) {
          throw ConfigError("");
        }
        out = v.get<T>();
      } else if constexpr (std::is_floating_point_v<T>) {
        if (!v.is_number()) throw ConfigError("");
        out = v.get<T>();
      } else {
        out = v.get<T>();
      }
    } catch (const std::exception&) {
      throw ConfigError("bad value for '" + path(key) + "'");
    }
    return true;
  }

  const json* raw(const char* key) {
    known_.insert(key);
    if (doc_ == nullptr || !doc_->contains(key)) return nullptr;
    return &doc_->at(key);
  }

  std::string path(const char* key) const { return name_.empty() ? key : name_ + "." + key; }

  void finish() const {
    if (doc_ == nullptr) return;
    for (const auto& [key, value] : doc_->items()) {
      if (!known_.count(key)) throw ConfigError("unknown config key '" + path(key.c_str()) + "'");
    }
  }

 private:
  const json* doc_ = nullptr;
  std::string name_;
  std::set<std::string> known_;
};

const json& child(const json& doc, const char* key) {
  static const json kNull;
  return doc.contains(key) ? doc.at(key) : kNull;
}

void parse_scene(const json& doc, SceneConfig& c) {
  Section s(doc, "scene");
  s.read("feature_dim", c.feature_dim);
  if (const json* kind = s.raw("trajectory")) {
    if (!kind->is_string()) throw ConfigError("scene.trajectory must be a string");
    c.trajectory = parse_trajectory(kind->get<std::string>());
  }
  s.read("extent", c.extent);
  s.read("height", c.height);
  s.read("n_train", c.n_train);
  s.read("n_test", c.n_test);
  s.read("ambiguity", c.ambiguity);
  s.read("period", c.period);
  s.read("ood", c.ood);
  s.read("ood_offset", c.ood_offset);
  s.read("ood_feature_bias", c.ood_feature_bias);
  s.read("feature_smoothness", c.feature_smoothness);
  if (const json* noise = s.raw("noise")) {
    if (!noise->is_array() || noise->size() != 6) throw ConfigError("scene.noise must hold 6 numbers");
    for (std::size_t i = 0; i < 6; ++i) {
      if (!(*noise)[i].is_number()) throw ConfigError("scene.noise must hold 6 numbers");
      c.noise[i] = (*noise)[i].get<double>();
    }
  }
  s.finish();
}

void parse_model(const json& doc, ModelConfig& c, bool& feature_dim_set) {
  Section s(doc, "model");
  feature_dim_set = s.read("feature_dim", c.feature_dim);
  s.read("latent_dim", c.latent_dim);
  s.read("hidden_dim", c.hidden_dim);
  s.read("num_layers", c.num_layers);
  s.read("leaky_slope", c.leaky_slope);
  s.read("residual_layer", c.residual_layer);
  s.finish();
}

void parse_train(const json& doc, TrainConfig& c) {
  Section s(doc, "train");
  s.read("iterations", c.iterations);
  s.read("lr", c.lr);
  s.read("weight_decay", c.weight_decay);
  s.read("batch_size", c.batch_size);
  s.read("mc_samples", c.mc_samples);
  s.read("kl_warmup_start", c.kl_warmup_start);
  s.read("kl_warmup_end", c.kl_warmup_end);
  s.read("beta1", c.beta1);
  s.read("beta2", c.beta2);
  s.read("eps", c.eps);
  s.finish();
}

void parse_inference(const json& doc, InferenceConfig& c) {
  Section s(doc, "inference");
  s.read("n_gen", c.n_gen);
  s.read("importance_samples", c.importance_samples);
  s.read("pred_samples", c.pred_samples);
  s.read("grid_half_width", c.grid_half_width);
  s.read("grid_n", c.grid_n);
  s.finish();
}

void parse_metrics(const json& doc, MetricsConfig& c) {
  Section s(doc, "metrics");
  s.read("keep_fraction", c.keep_fraction);
  if (const json* f = s.raw("translation_filter")) {
    if (f->is_null()) {
      c.translation_filter.reset();
    } else if (f->is_number()) {
      c.translation_filter = f->get<double>();
    } else {
      throw ConfigError("metrics.translation_filter must be a number or null");
    }
  }
  s.finish();
}

}  // namespace

void RunConfig::validate() const {
  scene.validate();
  if (model_feature_dim_set) model.validate();
  else {
    ModelConfig probe = model;
    probe.feature_dim = 1;
    probe.validate();
  }
  train.validate();
  if (inference.n_gen < 1 || inference.importance_samples < 1 || inference.pred_samples < 1) {
    throw ConfigError("inference counts must be positive");
  }
  if (!(inference.grid_half_width > 0.0) || inference.grid_n < 1) {
    throw ConfigError("inference quadrature grid must be non-empty");
  }
  if (!(metrics.keep_fraction > 0.0 && metrics.keep_fraction <= 1.0)) {
    throw ConfigError("metrics.keep_fraction must lie in (0, 1]");
  }
  if (metrics.translation_filter && !(*metrics.translation_filter > 0.0)) {
    throw ConfigError("metrics.translation_filter must be positive");
  }
}

RunConfig parse_run_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config document must be an object");
  RunConfig c;
  Section top(doc, "");
  top.read("seed", c.seed);
  top.raw("version");
  parse_scene(child(doc, "scene"), c.scene);
  top.raw("scene");
  parse_model(child(doc, "model"), c.model, c.model_feature_dim_set);
  top.raw("model");
  parse_train(child(doc, "train"), c.train);
  top.raw("train");
  parse_inference(child(doc, "inference"), c.inference);
  top.raw("inference");
  parse_metrics(child(doc, "metrics"), c.metrics);
  top.raw("metrics");
  top.finish();
  if (doc.contains("version") && doc.at("version") != 1) throw ConfigError("unsupported config version");
  c.validate();
  return c;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("malformed config '" + path.string() + "': " + e.what());
  }
  return parse_run_config(doc);
}

json to_json(const RunConfig& c) {
  json j;
  j["version"] = 1;
  j["seed"] = c.seed;
  j["scene"] = {{"feature_dim", c.scene.feature_dim},
                {"trajectory", std::string(to_string(c.scene.trajectory))},
                {"extent", c.scene.extent},
                {"height", c.scene.height},
                {"n_train", c.scene.n_train},
                {"n_test", c.scene.n_test},
                {"ambiguity", c.scene.ambiguity},
                {"period", c.scene.period},
                {"ood", c.scene.ood},
                {"ood_offset", c.scene.ood_offset},
                {"ood_feature_bias", c.scene.ood_feature_bias},
                {"feature_smoothness", c.scene.feature_smoothness},
                {"noise", c.scene.noise}};
  j["model"] = {{"latent_dim", c.model.latent_dim},
                {"hidden_dim", c.model.hidden_dim},
                {"num_layers", c.model.num_layers},
                {"leaky_slope", c.model.leaky_slope},
                {"residual_layer", c.model.residual_layer}};
  if (c.model_feature_dim_set) j["model"]["feature_dim"] = c.model.feature_dim;
  j["train"] = {{"iterations", c.train.iterations},
                {"lr", c.train.lr},
                {"weight_decay", c.train.weight_decay},
                {"batch_size", c.train.batch_size},
                {"mc_samples", c.train.mc_samples},
                {"kl_warmup_start", c.train.kl_warmup_start},
                {"kl_warmup_end", c.train.kl_warmup_end},
                {"beta1", c.train.beta1},
                {"beta2", c.train.beta2},
                {"eps", c.train.eps}};
  j["inference"] = {{"n_gen", c.inference.n_gen},
                    {"importance_samples", c.inference.importance_samples},
                    {"pred_samples", c.inference.pred_samples},
                    {"grid_half_width", c.inference.grid_half_width},
                    {"grid_n", c.inference.grid_n}};
  j["metrics"] = {{"keep_fraction", c.metrics.keep_fraction},
                  {"translation_filter", c.metrics.translation_filter
                                             ? json(*c.metrics.translation_filter)
                                             : json(nullptr)}};
  return j;
}

}  // namespace posevae
