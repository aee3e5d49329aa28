#include "sichainfl/model.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sichainfl {

namespace {

constexpr double kProbFloor = 1e-12;

// Forward pass writing hidden activations for the mlp arch (size hidden).
double forward(const ModelParams& m, const Vec& x, Vec* hidden_act) {
  if (static_cast<int>(x.size()) != m.input_dim)
    throw std::invalid_argument("predict: feature dimension mismatch");
  const Vec& w = m.weights;
  if (m.arch == Arch::logistic) {
    double z = w[m.input_dim];
    for (int j = 0; j < m.input_dim; ++j) z += w[j] * x[j];
    return z;
  }
  const int d = m.input_dim;
  const int h = m.hidden;
  const std::size_t b1_off = static_cast<std::size_t>(h) * d;
  const std::size_t w2_off = b1_off + h;
  const std::size_t b2_off = w2_off + h;
  double z2 = w[b2_off];
  for (int k = 0; k < h; ++k) {
    double z1 = w[b1_off + k];
    const std::size_t row = static_cast<std::size_t>(k) * d;
    for (int j = 0; j < d; ++j) z1 += w[row + j] * x[j];
    const double a = std::tanh(z1);
    if (hidden_act) (*hidden_act)[k] = a;
    z2 += w[w2_off + k] * a;
  }
  return z2;
}

// Accumulates the gradient of the per-sample BCE into grad (not scaled).
void accumulate_gradient(const ModelParams& m, const Vec& x, double y, Vec& grad,
                         Vec& hidden_scratch) {
  if (m.arch == Arch::logistic) {
    const double p = sigmoid(forward(m, x, nullptr));
    const double g = p - y;
    for (int j = 0; j < m.input_dim; ++j) grad[j] += g * x[j];
    grad[m.input_dim] += g;
    return;
  }
  const int d = m.input_dim;
  const int h = m.hidden;
  const double p = sigmoid(forward(m, x, &hidden_scratch));
  const double g2 = p - y;
  const std::size_t b1_off = static_cast<std::size_t>(h) * d;
  const std::size_t w2_off = b1_off + h;
  const std::size_t b2_off = w2_off + h;
  grad[b2_off] += g2;
  for (int k = 0; k < h; ++k) {
    const double a = hidden_scratch[k];
    grad[w2_off + k] += g2 * a;
    const double g1 = g2 * m.weights[w2_off + k] * (1.0 - a * a);
    grad[b1_off + k] += g1;
    const std::size_t row = static_cast<std::size_t>(k) * d;
    for (int j = 0; j < d; ++j) grad[row + j] += g1 * x[j];
  }
}

}  // namespace

void ModelParams::validate() const {
  if (input_dim <= 0) throw std::invalid_argument("model: input_dim must be positive");
  if (arch == Arch::mlp && hidden <= 0)
    throw std::invalid_argument("model: mlp requires positive hidden size");
  if (weights.size() != param_count(arch, input_dim, hidden))
    throw std::invalid_argument("model: weight count does not match arch");
  if (!all_finite(weights)) throw std::invalid_argument("model: non-finite weights");
}

std::size_t ModelParams::param_count(Arch arch, int input_dim, int hidden) {
  if (arch == Arch::logistic) return static_cast<std::size_t>(input_dim) + 1;
  return static_cast<std::size_t>(hidden) * input_dim + hidden + hidden + 1;
}

ModelParams ModelParams::zeros(Arch arch, int input_dim, int hidden) {
  ModelParams m;
  m.arch = arch;
  m.input_dim = input_dim;
  m.hidden = hidden;
  m.weights.assign(param_count(arch, input_dim, hidden), 0.0);
  return m;
}

double DpConfig::sigma() const {
  if (per_round_epsilon > 0.0)
    return dp_sigma(clip_bound, per_round_epsilon, delta_dp);
  return noise_multiplier * clip_bound;
}

double DpConfig::implied_epsilon() const {
  if (per_round_epsilon > 0.0) return per_round_epsilon;
  const double s = sigma();
  if (s <= 0.0) return 0.0;
  return clip_bound * std::sqrt(2.0 * std::log(1.25 / delta_dp)) / s;
}

void DpConfig::validate() const {
  if (clip_bound <= 0.0) throw std::invalid_argument("dp: clip_bound must be positive");
  if (noise_multiplier < 0.0)
    throw std::invalid_argument("dp: noise multiplier must be non-negative");
  if (delta_dp <= 0.0 || delta_dp >= 1.0)
    throw std::invalid_argument("dp: delta must lie in (0,1)");
  if (per_round_epsilon < 0.0)
    throw std::invalid_argument("dp: per-round epsilon must be non-negative");
}

double sigmoid(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

double predict_proba(const ModelParams& model, const Vec& features) {
  return sigmoid(forward(model, features, nullptr));
}

Vec predict_proba_batch(const ModelParams& model, const std::vector<Vec>& rows) {
  Vec out(rows.size());
  Vec scratch(model.arch == Arch::mlp ? model.hidden : 0);
  for (std::size_t i = 0; i < rows.size(); ++i)
    out[i] = sigmoid(forward(model, rows[i], model.arch == Arch::mlp ? &scratch : nullptr));
  return out;
}

double bce_loss(const ModelParams& model, const LabeledDataset& data) {
  if (data.size() == 0) throw std::invalid_argument("empty local dataset");
  double loss = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double p = predict_proba(model, data.features[i]);
    const double y = data.labels[i];
    loss -= y * std::log(std::max(p, kProbFloor)) +
            (1.0 - y) * std::log(std::max(1.0 - p, kProbFloor));
  }
  return loss / static_cast<double>(data.size());
}

Vec bce_gradient(const ModelParams& model, const LabeledDataset& data) {
  if (data.size() == 0) throw std::invalid_argument("empty local dataset");
  Vec grad(model.dim(), 0.0);
  Vec scratch(model.arch == Arch::mlp ? model.hidden : 0);
  for (std::size_t i = 0; i < data.size(); ++i)
    accumulate_gradient(model, data.features[i], data.labels[i], grad, scratch);
  const double inv_n = 1.0 / static_cast<double>(data.size());
  for (double& g : grad) g *= inv_n;
  return grad;
}

UpdateDelta local_train(const ModelParams& model, const LabeledDataset& data,
                        double lr, int epochs, std::uint64_t seed, int batch_size) {
  if (data.size() == 0) throw std::invalid_argument("empty local dataset");
  if (lr <= 0.0) throw std::invalid_argument("train: lr must be positive");
  if (epochs < 0) throw std::invalid_argument("train: negative epochs");
  if (batch_size <= 0) throw std::invalid_argument("train: batch size must be positive");
  model.validate();

  ModelParams work = model;
  Rng rng(seed);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Vec grad(work.dim());
  Vec scratch(work.arch == Arch::mlp ? work.hidden : 0);

  for (int e = 0; e < epochs; ++e) {
    rng.shuffle(order);
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t end = std::min(order.size(), start + batch_size);
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t k = start; k < end; ++k)
        accumulate_gradient(work, data.features[order[k]], data.labels[order[k]],
                            grad, scratch);
      const double scale = lr / static_cast<double>(end - start);
      for (std::size_t j = 0; j < work.weights.size(); ++j)
        work.weights[j] -= scale * grad[j];
    }
    if (!all_finite(work.weights)) throw std::runtime_error("diverged");
  }

  UpdateDelta out;
  out.delta.resize(work.dim());
  for (std::size_t j = 0; j < work.dim(); ++j)
    out.delta[j] = work.weights[j] - model.weights[j];
  return out;
}

UpdateDelta clip_update(const UpdateDelta& delta, double clip_bound) {
  if (clip_bound <= 0.0) throw std::invalid_argument("clip: bound must be positive");
  if (!all_finite(delta.delta)) throw std::invalid_argument("clip: non-finite update");
  UpdateDelta out = delta;
  const double norm = l2_norm(out.delta);
  // Relative slack keeps clipping exactly idempotent under re-application.
  if (norm > clip_bound * (1.0 + 1e-12)) {
    const double scale = clip_bound / norm;
    for (double& x : out.delta) x *= scale;
  }
  out.clipped = true;
  return out;
}

UpdateDelta gaussianize(const UpdateDelta& delta, double sigma, std::uint64_t seed) {
  if (sigma < 0.0) throw std::invalid_argument("noise: sigma must be non-negative");
  if (!delta.clipped) throw std::invalid_argument("noise before clip");
  UpdateDelta out = delta;
  if (sigma > 0.0) {
    Rng rng(seed);
    for (double& x : out.delta) x += rng.normal(0.0, sigma);
  }
  out.noised = true;
  return out;
}

double dp_sigma(double clip_bound, double epsilon, double delta_dp) {
  // Calibrated for l2 sensitivity C under add/remove adjacency; replacement
  // adjacency moves a clipped update by up to 2C and needs sigma doubled.
  if (clip_bound <= 0.0) throw std::invalid_argument("dp_sigma: C must be positive");
  if (epsilon <= 0.0) throw std::invalid_argument("dp_sigma: epsilon must be positive");
  if (delta_dp <= 0.0 || delta_dp >= 1.0)
    throw std::invalid_argument("dp_sigma: delta must lie in (0,1)");
  return clip_bound * std::sqrt(2.0 * std::log(1.25 / delta_dp)) / epsilon;
}

std::pair<double, double> dp_account(
    const std::vector<std::pair<double, double>>& rounds, DpMode mode) {
  if (rounds.empty()) throw std::invalid_argument("dp_account: empty sequence");
  for (const auto& [eps, del] : rounds) {
    if (eps <= 0.0 || del <= 0.0)
      throw std::invalid_argument("dp_account: entries must be positive");
  }
  if (mode == DpMode::per_client_sequential) {
    double eps = 0.0, del = 0.0;
    for (const auto& [e, d] : rounds) {
      eps += e;
      del += d;
    }
    return {eps, del};
  }
  double eps = 0.0, del = 0.0;
  for (const auto& [e, d] : rounds) {
    eps = std::max(eps, e);
    del = std::max(del, d);
  }
  return {eps, del};
}

ModelParams apply_update(const ModelParams& model, const Vec& agg_delta, double eta) {
  if (agg_delta.size() != model.dim())
    throw std::invalid_argument("apply_update: dimension mismatch");
  ModelParams out = model;
  axpy(eta, agg_delta, out.weights);
  return out;
}

}  // namespace sichainfl
