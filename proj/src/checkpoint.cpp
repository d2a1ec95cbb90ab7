#include "posevae/checkpoint.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <string>

#include "posevae/errors.hpp"

namespace posevae {

using nlohmann::json;

namespace {

json matrix_data(const Eigen::MatrixXd& m) {
  if (!m.allFinite()) throw NumericError("cannot checkpoint non-finite parameters");
  json data = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r)
    for (Eigen::Index c = 0; c < m.cols(); ++c) data.push_back(m(r, c));
  return data;
}

void fill_matrix(const json& data, Eigen::MatrixXd& m, const std::string& name) {
  if (!data.is_array() || data.size() != static_cast<std::size_t>(m.size())) {
    throw DataError("checkpoint tensor '" + name + "' has the wrong number of values");
  }
  std::size_t k = 0;
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    for (Eigen::Index c = 0; c < m.cols(); ++c) {
      if (!data[k].is_number()) throw DataError("checkpoint tensor '" + name + "' holds a non-number");
      m(r, c) = data[k++].get<double>();
    }
  }
}

void add_params(json& out, const nn::ParamStore& store, const std::string& prefix) {
  for (const auto& e : store) {
    out.push_back({{"name", prefix + e.name},
                   {"shape", {e.value.rows(), e.value.cols()}},
                   {"data", matrix_data(e.value)}});
  }
}

}  // namespace

json checkpoint_to_json(const PoseVae& model) {
  const ModelConfig& c = model.config();
  json doc;
  doc["version"] = kCheckpointVersion;
  doc["model_config"] = {{"feature_dim", c.feature_dim},   {"latent_dim", c.latent_dim},
                         {"hidden_dim", c.hidden_dim},     {"num_layers", c.num_layers},
                         {"leaky_slope", c.leaky_slope},   {"residual_layer", c.residual_layer}};
  const auto& n = model.normalization();
  doc["normalization"] = {{"t_min", {n.t_min.x(), n.t_min.y(), n.t_min.z()}},
                          {"t_max", {n.t_max.x(), n.t_max.y(), n.t_max.z()}}};
  json params = json::array();
  add_params(params, model.encoder().params(), "encoder.");
  add_params(params, model.decoder().params(), "decoder.");
  doc["params"] = std::move(params);
  doc["noise"] = {{"log_diag", matrix_data(model.noise_params().at("noise.log_diag"))},
                  {"lower", matrix_data(model.noise_params().at("noise.lower"))}};
  return doc;
}

PoseVae checkpoint_from_json(const json& doc) {
  try {
    if (!doc.is_object() || !doc.contains("version")) throw DataError("checkpoint lacks a version");
    if (doc.at("version") != kCheckpointVersion) {
      throw DataError("unsupported checkpoint version " + doc.at("version").dump());
    }
    const json& mc = doc.at("model_config");
    ModelConfig config;
    config.feature_dim = mc.at("feature_dim").get<int>();
    config.latent_dim = mc.at("latent_dim").get<int>();
    config.hidden_dim = mc.at("hidden_dim").get<int>();
    config.num_layers = mc.at("num_layers").get<int>();
    config.leaky_slope = mc.at("leaky_slope").get<double>();
    config.residual_layer = mc.at("residual_layer").get<int>();

    SceneNormalization norm;
    const json& nj = doc.at("normalization");
    for (int i = 0; i < 3; ++i) {
      norm.t_min[i] = nj.at("t_min").at(i).get<double>();
      norm.t_max[i] = nj.at("t_max").at(i).get<double>();
    }

    PoseVae model(config, norm);
    std::set<std::string> seen;
    for (const json& p : doc.at("params")) {
      const std::string name = p.at("name").get<std::string>();
      if (!seen.insert(name).second) throw DataError("duplicate checkpoint tensor '" + name + "'");
      nn::ParamStore* store = nullptr;
      std::string local;
      if (name.rfind("encoder.", 0) == 0) {
        store = &model.encoder().params();
        local = name.substr(8);
      } else if (name.rfind("decoder.", 0) == 0) {
        store = &model.decoder().params();
        local = name.substr(8);
      } else {
        throw DataError("unknown checkpoint tensor '" + name + "'");
      }
      Eigen::MatrixXd* target = nullptr;
      try {
        target = &store->at(local);
      } catch (const std::out_of_range&) {
        throw DataError("unknown checkpoint tensor '" + name + "'");
      }
      const json& shape = p.at("shape");
      if (shape.size() != 2 || shape[0].get<Eigen::Index>() != target->rows() ||
          shape[1].get<Eigen::Index>() != target->cols()) {
        throw DataError("checkpoint tensor '" + name + "' has the wrong shape");
      }
      fill_matrix(p.at("data"), *target, name);
    }
    const std::size_t expected = model.encoder().params().size() + model.decoder().params().size();
    if (seen.size() != expected) throw DataError("checkpoint is missing parameter tensors");
    fill_matrix(doc.at("noise").at("log_diag"), model.noise_params().at("noise.log_diag"), "noise.log_diag");
    fill_matrix(doc.at("noise").at("lower"), model.noise_params().at("noise.lower"), "noise.lower");
    return model;
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed checkpoint: ") + e.what());
  } catch (const ConfigError& e) {
    throw DataError(std::string("invalid checkpoint: ") + e.what());
  }
}

void save_checkpoint(const PoseVae& model, const std::filesystem::path& path) {
  const std::string text = checkpoint_to_json(model).dump() + "\n";
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary);
    if (!out) throw DataError("cannot open '" + tmp.string() + "' for writing");
    out << text;
    if (!out) throw DataError("failed writing '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

PoseVae load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint '" + path.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint '" + path.string() + "': " + e.what());
  }
  return checkpoint_from_json(doc);
}

}  // namespace posevae
