#include "posevae/training.hpp"

#include <chrono>
#include <cmath>

#include "posevae/csv.hpp"
#include "posevae/errors.hpp"
#include "posevae/probmath.hpp"

namespace posevae {
namespace {

// Gradient of the ELBO w.r.t. (lv1, lv2, angle) of a latent posterior,
// given the gradient w.r.t. its Cholesky entries (L11, L21, L22).
Eigen::Vector3d cholesky_param_grad(const LatentPosterior& q, double g11, double g21, double g22) {
  const double v1 = std::exp(q.log_var1);
  const double v2 = std::exp(q.log_var2);
  const double c = std::cos(q.angle);
  const double s = std::sin(q.angle);
  const double a = c * c * v1 + s * s * v2;
  const double b = c * s * (v1 - v2);
  const double d = v1 * v2;
  const double sa = std::sqrt(a);
  const double sd = std::sqrt(d);
  // L11 = sqrt(a), L21 = b / sqrt(a), L22 = sqrt(d / a)
  const double ga = g11 / (2.0 * sa) - g21 * b / (2.0 * a * sa) - g22 * sd / (2.0 * a * sa);
  const double gb = g21 / sa;
  const double gd = g22 / (2.0 * sa * sd);
  return {ga * c * c * v1 + gb * c * s * v1 + gd * d,
          ga * s * s * v2 - gb * c * s * v2 + gd * d,
          ga * 2.0 * c * s * (v2 - v1) + gb * (c * c - s * s) * (v1 - v2)};
}

bool inside_clamp(double raw) { return raw > -kLogVarClamp && raw < kLogVarClamp; }

}  // namespace

void TrainConfig::validate() const {
  if (iterations < 0) throw ConfigError("train.iterations must be >= 0");
  if (batch_size <= 0 || mc_samples <= 0) throw ConfigError("train batch and MC counts must be positive");
  if (!(kl_warmup_start >= 0 && kl_warmup_start <= kl_warmup_end && kl_warmup_end <= iterations)) {
    throw ConfigError("train requires 0 <= kl_warmup_start <= kl_warmup_end <= iterations");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be positive");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw ConfigError("train.weight_decay must be >= 0");
  }
  if (!(beta1 >= 0.0 && beta1 < 1.0 && beta2 >= 0.0 && beta2 < 1.0)) {
    throw ConfigError("train betas must lie in [0, 1)");
  }
  if (!(eps > 0.0)) throw ConfigError("train.eps must be positive");
}

double recon_loglik(const Pose& predicted, const Pose& target, const NoiseModel& noise) {
  return gaussian_logpdf(pose_error(predicted, target), Vector6d::Zero(), noise.cholesky());
}

double kl_weight_at(std::int64_t iteration, const TrainConfig& config) {
  if (iteration < config.kl_warmup_start) return 0.0;
  if (iteration >= config.kl_warmup_end) return 1.0;
  return static_cast<double>(iteration - config.kl_warmup_start) /
         static_cast<double>(config.kl_warmup_end - config.kl_warmup_start);
}

ModelGradients::ModelGradients(const PoseVae& model)
    : encoder(model.encoder().params().zeros_like()),
      decoder(model.decoder().params().zeros_like()),
      noise(model.noise_params().zeros_like()) {}

void ModelGradients::set_zero() {
  encoder.set_zero();
  decoder.set_zero();
  noise.set_zero();
}

void ModelGradients::scale(double factor) {
  for (auto* store : {&encoder, &decoder, &noise})
    for (auto& e : *store) e.value *= factor;
}

bool ModelGradients::all_finite() const {
  for (const auto* store : {&encoder, &decoder, &noise})
    for (const auto& e : *store)
      if (!e.value.allFinite()) return false;
  return true;
}

std::vector<const Eigen::MatrixXd*> ModelGradients::tensors() const {
  std::vector<const Eigen::MatrixXd*> out;
  for (const auto* store : {&encoder, &decoder, &noise})
    for (const auto& e : *store) out.push_back(&e.value);
  return out;
}

ElboValue evaluate_elbo(const PoseVae& model, std::span<const Sample* const> batch,
                        const Eigen::MatrixXd& eps, int mc_samples, double kl_weight,
                        ModelGradients* grads) {
  const auto B = static_cast<Eigen::Index>(batch.size());
  const Eigen::Index S = mc_samples;
  const int F = model.config().feature_dim;
  if (B == 0 || S <= 0) throw ShapeError("evaluate_elbo: empty batch");
  if (eps.rows() != 2 || eps.cols() != B * S) throw ShapeError("evaluate_elbo: eps must be 2 x (B*S)");

  // Encoder.
  Eigen::MatrixXd enc_in(kEncoderInputDim, B);
  for (Eigen::Index b = 0; b < B; ++b) {
    if (batch[b]->feature.size() != F) throw ShapeError("evaluate_elbo: feature dimension mismatch");
    enc_in.col(b) = model.encoder_input(batch[b]->pose);
  }
  nn::Tape enc_tape;
  const Eigen::MatrixXd enc_out = model.encoder().forward(enc_in, grads ? &enc_tape : nullptr);

  std::vector<LatentPosterior> qs;
  std::vector<Eigen::Matrix2d> chols;
  qs.reserve(B);
  chols.reserve(B);
  double kl_sum = 0.0;
  Eigen::MatrixXd dec_in(F + 2, B * S);
  for (Eigen::Index b = 0; b < B; ++b) {
    qs.push_back(PoseVae::posterior_from_output(enc_out.col(b)));
    chols.push_back(qs.back().covariance().chol);
    kl_sum += kl_to_standard_normal(qs.back());
    for (Eigen::Index j = 0; j < S; ++j) {
      const Eigen::Index col = b * S + j;
      dec_in.col(col).head(F) = batch[b]->feature;
      dec_in.col(col).tail<2>() = qs[b].mean + chols[b] * eps.col(col);
    }
  }

  // Decoder and reconstruction term.
  nn::Tape dec_tape;
  const Eigen::MatrixXd dec_out = model.decoder().forward(dec_in, grads ? &dec_tape : nullptr);
  const NoiseModel noise = model.noise();
  const Matrix6d L = noise.cholesky();
  const double log_det = noise.log_det();
  const Eigen::Vector3d range = model.normalization().range();
  const double c = 1.0 / static_cast<double>(B * S);

  Eigen::MatrixXd grad_dec_out;
  Vector6d grad_log_diag = Vector6d::Zero();
  Eigen::Matrix<double, 15, 1> grad_lower = Eigen::Matrix<double, 15, 1>::Zero();
  if (grads) grad_dec_out.resize(kDecoderOutputDim, B * S);

  double recon_sum = 0.0;
  for (Eigen::Index col = 0; col < B * S; ++col) {
    const Pose& target = batch[col / S]->pose;
    const Pose pred = model.pose_from_output(dec_out.col(col));
    const Twist xi = pose_error(pred, target);
    const Vector6d u = L.triangularView<Eigen::Lower>().solve(xi);
    recon_sum += -0.5 * (6.0 * kLog2Pi + log_det + u.squaredNorm());
    if (!grads) continue;

    const Vector6d w = L.transpose().triangularView<Eigen::Upper>().solve(u);  // Sigma^-1 xi
    for (int i = 0; i < 6; ++i) {
      grad_log_diag[i] += c * (w[i] * u[i] * L(i, i) - 1.0);
      for (int j = 0; j < i; ++j) grad_lower[strict_lower_index(i, j)] += c * w[i] * u[j];
    }
    const PoseGradient pg = pose_error_vjp(pred, xi, -c * w);
    grad_dec_out.col(col).head<3>() = pg.t.cwiseProduct(range);
    grad_dec_out.col(col).tail<6>() = rot_from_6d_vjp(dec_out.col(col).tail<6>(), pg.R);
  }

  ElboValue value;
  value.recon = recon_sum * c;
  value.kl = kl_sum / static_cast<double>(B);
  value.elbo = value.recon - kl_weight * value.kl;
  if (!grads) return value;

  grads->noise[0] += grad_log_diag;
  grads->noise[1] += grad_lower;
  const Eigen::MatrixXd grad_dec_in = model.decoder().backward(dec_tape, grad_dec_out, grads->decoder);

  Eigen::MatrixXd grad_enc_out = Eigen::MatrixXd::Zero(kEncoderOutputDim, B);
  const double kl_scale = kl_weight / static_cast<double>(B);
  for (Eigen::Index b = 0; b < B; ++b) {
    const LatentPosterior& q = qs[b];
    Eigen::Vector2d g_mean = Eigen::Vector2d::Zero();
    double g11 = 0.0, g21 = 0.0, g22 = 0.0;
    for (Eigen::Index j = 0; j < S; ++j) {
      const Eigen::Index col = b * S + j;
      const Eigen::Vector2d gz = grad_dec_in.col(col).tail<2>();
      g_mean += gz;
      g11 += eps(0, col) * gz[0];
      g21 += eps(0, col) * gz[1];
      g22 += eps(1, col) * gz[1];
    }
    Eigen::Vector3d g_cov = cholesky_param_grad(q, g11, g21, g22);
    // -kl_weight * KL / B
    g_mean -= kl_scale * q.mean;
    g_cov[0] -= kl_scale * 0.5 * (std::exp(q.log_var1) - 1.0);
    g_cov[1] -= kl_scale * 0.5 * (std::exp(q.log_var2) - 1.0);
    if (!inside_clamp(enc_out(2, b))) g_cov[0] = 0.0;
    if (!inside_clamp(enc_out(3, b))) g_cov[1] = 0.0;
    grad_enc_out.col(b) << g_mean, g_cov;
  }
  model.encoder().backward(enc_tape, grad_enc_out, grads->encoder);
  return value;
}

ElboValue elbo(const PoseVae& model, const Pose& y, const Eigen::VectorXd& feature, Rng& rng,
               int mc_samples, double kl_weight, ModelGradients* grads) {
  const Sample sample{feature, y};
  const Sample* ptr = &sample;
  const Eigen::MatrixXd eps = standard_normal(rng, 2, mc_samples);
  return evaluate_elbo(model, std::span<const Sample* const>(&ptr, 1), eps, mc_samples, kl_weight,
                       grads);
}

FitResult fit(const SceneDataset& dataset, PoseVae model, const TrainConfig& config,
              const std::function<void(const TrainRecord&)>& on_record) {
  config.validate();
  if (dataset.empty()) throw DataError("fit: empty training set");
  if (dataset.feature_dim != model.config().feature_dim) {
    throw ShapeError("fit: dataset feature dimension " + std::to_string(dataset.feature_dim) +
                     " does not match the model's " + std::to_string(model.config().feature_dim));
  }

  FitResult result{std::move(model), {}};
  PoseVae& m = result.model;
  const auto params = m.parameter_tensors();
  nn::AdamW optimizer({config.lr, config.beta1, config.beta2, config.eps, config.weight_decay},
                      params);
  ModelGradients grads(m);
  const auto grad_tensors = grads.tensors();

  Rng batch_rng(derive_seed(config.seed, "batch"));
  Rng mc_rng(derive_seed(config.seed, "mc"));
  std::uniform_int_distribution<std::size_t> pick(0, dataset.size() - 1);
  std::vector<const Sample*> batch(static_cast<std::size_t>(config.batch_size));
  const auto start = std::chrono::steady_clock::now();
  result.trace.reserve(static_cast<std::size_t>(config.iterations));

  for (std::int64_t it = 0; it < config.iterations; ++it) {
    TrainRecord rec;
    rec.iteration = it;
    rec.kl_weight = kl_weight_at(it, config);
    for (auto& p : batch) p = &dataset.samples[pick(batch_rng)];
    const Eigen::MatrixXd eps = standard_normal(mc_rng, 2, config.batch_size * config.mc_samples);
    grads.set_zero();
    try {
      const ElboValue v = evaluate_elbo(m, batch, eps, config.mc_samples, rec.kl_weight, &grads);
      rec.elbo = v.elbo;
      rec.recon = v.recon;
      rec.kl = v.kl;
    } catch (const Error& e) {
      throw TrainingAborted(std::string("iteration ") + std::to_string(it) + ": " + e.what(), rec);
    }
    rec.wall_seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!std::isfinite(rec.elbo) || !grads.all_finite()) {
      throw TrainingAborted("non-finite ELBO or gradient at iteration " + std::to_string(it), rec);
    }
    grads.scale(-1.0);
    optimizer.step(params, grad_tensors);
    result.trace.push_back(rec);
    if (on_record) on_record(rec);
  }
  return result;
}

void write_trace_csv(std::span<const TrainRecord> trace, const std::filesystem::path& path) {
  auto out = csv::open_writer(path, "iteration,elbo,recon,kl,kl_weight");
  for (const auto& r : trace) {
    out << r.iteration << ',' << csv::format(r.elbo) << ',' << csv::format(r.recon) << ','
        << csv::format(r.kl) << ',' << csv::format(r.kl_weight) << '\n';
  }
  if (!out) throw DataError("write failed for '" + path.string() + "'");
}

}  // namespace posevae
