/// @file
/// Small dense multilayer perceptrons with exact reverse-mode gradients and
/// an Adam optimizer with decoupled weight decay.
///
/// Activations are column-major batches: one sample per column.
#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace posevae::nn {

/// Layout of an MLP: `num_layers` hidden layers of width `hidden_dim`, each
/// followed by LeakyReLU, then a linear output layer. When `residual_layer`
/// is k > 0 the network input is added to the activation of hidden layer k,
/// through a learned projection if input_dim != hidden_dim.
struct MlpSpec {
  int input_dim = 0;
  int hidden_dim = 0;
  int num_layers = 0;
  int output_dim = 0;
  int residual_layer = 0;
  double leaky_slope = 0.01;

  void validate() const;
  bool residual_projected() const { return residual_layer > 0 && input_dim != hidden_dim; }
};

/// Ordered collection of named parameter tensors. Vectors are stored as
/// n x 1 matrices. Shapes never change after `add`.
class ParamStore {
 public:
  struct Entry {
    std::string name;
    Eigen::MatrixXd value;
  };

  void add(std::string name, Eigen::Index rows, Eigen::Index cols);

  std::size_t size() const { return entries_.size(); }
  Entry& entry(std::size_t i) { return entries_.at(i); }
  const Entry& entry(std::size_t i) const { return entries_.at(i); }
  Eigen::MatrixXd& operator[](std::size_t i) { return entries_[i].value; }
  const Eigen::MatrixXd& operator[](std::size_t i) const { return entries_[i].value; }

  /// Throws std::out_of_range for unknown names.
  Eigen::MatrixXd& at(std::string_view name);
  const Eigen::MatrixXd& at(std::string_view name) const;

  /// Total number of scalars.
  Eigen::Index count() const;
  ParamStore zeros_like() const;
  void set_zero();
  bool same_layout(const ParamStore& other) const;

  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }
  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }

 private:
  std::vector<Entry> entries_;
};

/// Cached activations of one forward pass.
struct Tape {
  Eigen::MatrixXd input;
  /// pre[k]: pre-activation of hidden layer k (0-based).
  std::vector<Eigen::MatrixXd> pre;
  /// act[k]: output of hidden layer k, including the residual term.
  std::vector<Eigen::MatrixXd> act;
};

/// Parameter order: layer{k}.weight, layer{k}.bias for k = 1..num_layers,
/// then residual.weight (only when projected), then out.weight, out.bias.
class Mlp {
 public:
  Mlp() = default;
  explicit Mlp(MlpSpec spec);

  const MlpSpec& spec() const { return spec_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  /// Uniform(-sqrt(1/fan_in), sqrt(1/fan_in)) weights and zero biases.
  void init_uniform(std::mt19937_64& rng);

  Eigen::MatrixXd forward(const Eigen::MatrixXd& input, Tape* tape = nullptr) const;
  Eigen::VectorXd forward(const Eigen::VectorXd& input) const;

  /// Accumulates parameter gradients into `grads` (same layout as params())
  /// and returns the gradient with respect to the input.
  Eigen::MatrixXd backward(const Tape& tape, const Eigen::MatrixXd& grad_output,
                           ParamStore& grads) const;

 private:
  MlpSpec spec_;
  ParamStore params_;
  std::size_t residual_index_ = 0;
  std::size_t out_index_ = 0;
};

struct AdamWConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-2;
};

/// Adam with decoupled weight decay: w <- w (1 - lr wd), then the
/// bias-corrected Adam step.
class AdamW {
 public:
  AdamW(AdamWConfig config, std::span<Eigen::MatrixXd* const> params);

  /// `grads` are loss gradients in the same order and shapes as the
  /// parameters given to the constructor.
  void step(std::span<Eigen::MatrixXd* const> params,
            std::span<const Eigen::MatrixXd* const> grads);

  std::int64_t step_count() const { return step_; }
  const AdamWConfig& config() const { return config_; }
  const std::vector<Eigen::MatrixXd>& first_moments() const { return m_; }
  const std::vector<Eigen::MatrixXd>& second_moments() const { return v_; }

 private:
  AdamWConfig config_;
  std::vector<Eigen::MatrixXd> m_;
  std::vector<Eigen::MatrixXd> v_;
  std::int64_t step_ = 0;
};

}  // namespace posevae::nn
