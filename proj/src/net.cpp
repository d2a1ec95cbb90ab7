#include "posevae/net.hpp"

#include <cmath>
#include <stdexcept>

#include "posevae/errors.hpp"

namespace posevae::nn {
namespace {

Eigen::MatrixXd leaky_relu(const Eigen::MatrixXd& x, double slope) {
  return x.unaryExpr([slope](double v) { return v > 0.0 ? v : slope * v; });
}

Eigen::MatrixXd leaky_relu_grad(const Eigen::MatrixXd& pre, const Eigen::MatrixXd& g,
                                double slope) {
  return g.binaryExpr(pre, [slope](double gv, double p) { return p > 0.0 ? gv : slope * gv; });
}

}  // namespace

void MlpSpec::validate() const {
  if (input_dim <= 0 || output_dim <= 0) throw ShapeError("MlpSpec: dimensions must be positive");
  if (num_layers < 0) throw ShapeError("MlpSpec: num_layers must be non-negative");
  if (num_layers > 0 && hidden_dim <= 0) throw ShapeError("MlpSpec: hidden_dim must be positive");
  if (residual_layer < 0 || residual_layer > num_layers) {
    throw ShapeError("MlpSpec: residual layer must lie in [0, num_layers]");
  }
  if (!std::isfinite(leaky_slope)) throw ShapeError("MlpSpec: leaky slope must be finite");
}

void ParamStore::add(std::string name, Eigen::Index rows, Eigen::Index cols) {
  entries_.push_back({std::move(name), Eigen::MatrixXd::Zero(rows, cols)});
}

Eigen::MatrixXd& ParamStore::at(std::string_view name) {
  for (auto& e : entries_)
    if (e.name == name) return e.value;
  throw std::out_of_range("ParamStore: no parameter named " + std::string(name));
}

const Eigen::MatrixXd& ParamStore::at(std::string_view name) const {
  return const_cast<ParamStore*>(this)->at(name);
}

Eigen::Index ParamStore::count() const {
  Eigen::Index n = 0;
  for (const auto& e : entries_) n += e.value.size();
  return n;
}

ParamStore ParamStore::zeros_like() const {
  ParamStore out;
  for (const auto& e : entries_) out.add(e.name, e.value.rows(), e.value.cols());
  return out;
}

void ParamStore::set_zero() {
  for (auto& e : entries_) e.value.setZero();
}

bool ParamStore::same_layout(const ParamStore& other) const {
  if (entries_.size() != other.entries_.size()) return false;
  for (std::size_t i = 0; i < entries_.size(); ++i) {
    const auto& a = entries_[i];
    const auto& b = other.entries_[i];
    if (a.name != b.name || a.value.rows() != b.value.rows() || a.value.cols() != b.value.cols())
      return false;
  }
  return true;
}

Mlp::Mlp(MlpSpec spec) : spec_(spec) {
  spec_.validate();
  int in = spec_.input_dim;
  for (int k = 1; k <= spec_.num_layers; ++k) {
    params_.add("layer" + std::to_string(k) + ".weight", spec_.hidden_dim, in);
    params_.add("layer" + std::to_string(k) + ".bias", spec_.hidden_dim, 1);
    in = spec_.hidden_dim;
  }
  if (spec_.residual_projected()) {
    residual_index_ = params_.size();
    params_.add("residual.weight", spec_.hidden_dim, spec_.input_dim);
  }
  out_index_ = params_.size();
  params_.add("out.weight", spec_.output_dim, in);
  params_.add("out.bias", spec_.output_dim, 1);
}

void Mlp::init_uniform(std::mt19937_64& rng) {
  for (auto& e : params_) {
    if (e.value.cols() == 1 && e.name.ends_with(".bias")) {
      e.value.setZero();
      continue;
    }
    const double bound = std::sqrt(1.0 / static_cast<double>(e.value.cols()));
    std::uniform_real_distribution<double> dist(-bound, bound);
    for (Eigen::Index j = 0; j < e.value.cols(); ++j)
      for (Eigen::Index i = 0; i < e.value.rows(); ++i) e.value(i, j) = dist(rng);
  }
}

Eigen::MatrixXd Mlp::forward(const Eigen::MatrixXd& input, Tape* tape) const {
  if (input.rows() != spec_.input_dim) {
    throw ShapeError("Mlp::forward: expected input dimension " + std::to_string(spec_.input_dim) +
                     ", got " + std::to_string(input.rows()));
  }
  if (tape) {
    tape->input = input;
    tape->pre.clear();
    tape->act.clear();
  }
  Eigen::MatrixXd h = input;
  for (int k = 0; k < spec_.num_layers; ++k) {
    Eigen::MatrixXd pre = params_[2 * k] * h;
    pre.colwise() += params_[2 * k + 1].col(0);
    h = leaky_relu(pre, spec_.leaky_slope);
    if (k + 1 == spec_.residual_layer) {
      if (spec_.residual_projected())
        h.noalias() += params_[residual_index_] * input;
      else
        h += input;
    }
    if (tape) {
      tape->pre.push_back(std::move(pre));
      tape->act.push_back(h);
    }
  }
  Eigen::MatrixXd out = params_[out_index_] * h;
  out.colwise() += params_[out_index_ + 1].col(0);
  return out;
}

Eigen::VectorXd Mlp::forward(const Eigen::VectorXd& input) const {
  return forward(Eigen::MatrixXd(input)).col(0);
}

Eigen::MatrixXd Mlp::backward(const Tape& tape, const Eigen::MatrixXd& grad_output,
                              ParamStore& grads) const {
  const Eigen::Index n = tape.input.cols();
  if (grad_output.rows() != spec_.output_dim || grad_output.cols() != n) {
    throw ShapeError("Mlp::backward: output gradient shape does not match the tape");
  }
  if (static_cast<int>(tape.pre.size()) != spec_.num_layers || tape.input.rows() != spec_.input_dim) {
    throw ShapeError("Mlp::backward: tape does not belong to this network");
  }
  if (!grads.same_layout(params_)) throw ShapeError("Mlp::backward: gradient store layout mismatch");

  const Eigen::MatrixXd& last = spec_.num_layers > 0 ? tape.act.back() : tape.input;
  grads[out_index_].noalias() += grad_output * last.transpose();
  grads[out_index_ + 1] += grad_output.rowwise().sum();
  Eigen::MatrixXd g = params_[out_index_].transpose() * grad_output;

  Eigen::MatrixXd grad_input = Eigen::MatrixXd::Zero(spec_.input_dim, n);
  for (int k = spec_.num_layers - 1; k >= 0; --k) {
    if (k + 1 == spec_.residual_layer) {
      if (spec_.residual_projected()) {
        grads[residual_index_].noalias() += g * tape.input.transpose();
        grad_input.noalias() += params_[residual_index_].transpose() * g;
      } else {
        grad_input += g;
      }
    }
    const Eigen::MatrixXd g_pre = leaky_relu_grad(tape.pre[k], g, spec_.leaky_slope);
    const Eigen::MatrixXd& in = k > 0 ? tape.act[k - 1] : tape.input;
    grads[2 * k].noalias() += g_pre * in.transpose();
    grads[2 * k + 1] += g_pre.rowwise().sum();
    g.noalias() = params_[2 * k].transpose() * g_pre;
  }
  grad_input += g;
  return grad_input;
}

AdamW::AdamW(AdamWConfig config, std::span<Eigen::MatrixXd* const> params) : config_(config) {
  m_.reserve(params.size());
  v_.reserve(params.size());
  for (const auto* p : params) {
    m_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
    v_.push_back(Eigen::MatrixXd::Zero(p->rows(), p->cols()));
  }
}

void AdamW::step(std::span<Eigen::MatrixXd* const> params,
                 std::span<const Eigen::MatrixXd* const> grads) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw ShapeError("AdamW::step: parameter count mismatch");
  }
  for (std::size_t i = 0; i < m_.size(); ++i) {
    if (params[i]->rows() != m_[i].rows() || params[i]->cols() != m_[i].cols() ||
        grads[i]->rows() != m_[i].rows() || grads[i]->cols() != m_[i].cols()) {
      throw ShapeError("AdamW::step: shape mismatch in tensor " + std::to_string(i));
    }
  }
  ++step_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(step_));
  const double decay = 1.0 - config_.lr * config_.weight_decay;
  for (std::size_t i = 0; i < m_.size(); ++i) {
    auto& w = *params[i];
    const auto& g = *grads[i];
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseAbs2();
    if (config_.weight_decay != 0.0) w *= decay;
    w.array() -= config_.lr * (m_[i].array() / bc1) /
                 ((v_[i].array() / bc2).sqrt() + config_.eps);
  }
}

}  // namespace posevae::nn
