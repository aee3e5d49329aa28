// Flat-vector differentiable models (logistic regression and a one-hidden-
// layer tanh MLP), local SGD training, l2 clipping, the Gaussian noise
// mechanism and basic (eps, delta) composition accounting.
#pragma once

#include <cstdint>
#include <utility>
#include <vector>

#include "sichainfl/common.hpp"
#include "sichainfl/dataset.hpp"

namespace sichainfl {

enum class Arch { logistic, mlp };

struct ModelParams {
  Vec weights;
  Arch arch = Arch::logistic;
  int input_dim = 0;
  int hidden = 0;  // used when arch == mlp

  std::size_t dim() const { return weights.size(); }
  void validate() const;

  // logistic: d + 1 (weights, bias)
  // mlp:      h*d + h (hidden layer) + h + 1 (output layer)
  static std::size_t param_count(Arch arch, int input_dim, int hidden);
  static ModelParams zeros(Arch arch, int input_dim, int hidden = 0);
};

struct UpdateDelta {
  Vec delta;
  int client_id = -1;
  int round = 0;
  bool clipped = false;
  bool noised = false;
};

// Gaussian-mechanism parameters. sigma is noise_multiplier * clip_bound
// unless a per-round epsilon is given, in which case sigma is calibrated
// from (clip_bound, per_round_epsilon, delta_dp).
struct DpConfig {
  double clip_bound = 1.0;
  double noise_multiplier = 8.0;  // mu = sigma / C
  double delta_dp = 1e-5;
  double per_round_epsilon = 0.0;  // 0 means "configure by multiplier"

  double sigma() const;
  // Epsilon implied by the active sigma under the classical calibration,
  // logged so runs configured by multiplier still report a budget.
  double implied_epsilon() const;
  void validate() const;
};

double sigmoid(double z);
double predict_proba(const ModelParams& model, const Vec& features);
Vec predict_proba_batch(const ModelParams& model, const std::vector<Vec>& rows);

// Mean binary cross-entropy over the dataset.
double bce_loss(const ModelParams& model, const LabeledDataset& data);
// Analytic gradient of bce_loss with respect to the flat weight vector.
Vec bce_gradient(const ModelParams& model, const LabeledDataset& data);

// Runs `epochs` passes of mini-batch SGD from `model` and returns
// trained_weights - initial_weights. Deterministic for a fixed seed: the
// batch order is a pure function of the seed.
UpdateDelta local_train(const ModelParams& model, const LabeledDataset& data,
                        double lr, int epochs, std::uint64_t seed,
                        int batch_size = 32);

// Rescales delta so its l2 norm is at most C; direction preserved.
UpdateDelta clip_update(const UpdateDelta& delta, double clip_bound);

// Adds N(0, sigma^2 I); requires the input to be clipped first.
UpdateDelta gaussianize(const UpdateDelta& delta, double sigma, std::uint64_t seed);

// Classical Gaussian-mechanism calibration sigma = C*sqrt(2 ln(1.25/delta))/eps.
double dp_sigma(double clip_bound, double epsilon, double delta_dp);

enum class DpMode { per_client_sequential, across_disjoint_clients };

// sequential: (sum eps, sum delta); disjoint: (max eps, max delta).
std::pair<double, double> dp_account(
    const std::vector<std::pair<double, double>>& rounds, DpMode mode);

ModelParams apply_update(const ModelParams& model, const Vec& agg_delta, double eta);

}  // namespace sichainfl
