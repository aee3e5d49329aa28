// Multi-objective coalition value: rare-event utility (normalized AUPRC
// blended with FPR-budgeted MCC), diversity, data quality, their weighted
// fusion, exact Shapley over all subsets, and time-decay weighting.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <utility>
#include <vector>

#include "sichainfl/dataset.hpp"
#include "sichainfl/model.hpp"

namespace sichainfl {

struct ValuationConfig {
  double alpha_blend = 0.5;       // exponent blending AUPRC vs MCC
  Vec beta_r;                     // per-scenario weights; empty = uniform
  double eps_stab = 1e-8;         // geometric-mean stabilizer
  double rho_fpr = 0.1;           // false-positive-rate budget
  double gamma1 = 1.0, gamma2 = 1.0, gamma3 = 1.0;  // cleanliness rates
  double gamma4 = 1.0;            // label-credibility rate
  double lambda_acc = 0.6, lambda_div = 0.2, lambda_qua = 0.2;
  double lambda_decay = 0.1;
  Vec threshold_grid;             // empty = default 0.01..0.99

  enum class EvalMode { full, additive };
  // full re-aggregates the coalition model; additive uses clipped score sums.
  EvalMode eval_mode = EvalMode::full;

  static Vec default_threshold_grid();
  Vec effective_grid() const;
  Vec effective_beta(std::size_t scenario_count) const;
  void validate() const;
};

struct CoalitionContext {
  ModelParams base_model;
  std::map<int, UpdateDelta> client_updates;
  ScenarioSet scenarios;
  std::map<int, Vec> feature_summaries;             // unit vectors z_i
  std::map<int, std::pair<double, double>> quality; // (C_i, L_i), each in (0,1]

  void validate() const;
};

// Area under the precision-recall curve: thresholds at the distinct scores
// (ties collapse into one threshold), trapezoids between successive
// recall-change vertices, anchored at (recall 0, precision 1).
double auprc(const Vec& scores, const std::vector<std::uint8_t>& labels);

// (a - pi) / (1 - pi); may be negative for worse-than-chance rankings.
double normalized_auprc(double a, double pi_r);

// Max MCC over grid thresholds with FPR <= rho_fpr, mapped to [0,1] via
// (MCC+1)/2. No feasible threshold means MCC := -1, i.e. result 0.
double mcc_budgeted(const Vec& scores, const std::vector<std::uint8_t>& labels,
                    const Vec& grid, double rho_fpr);

// clamp(a,0,1)^alpha * clamp(m,0,1)^(1-alpha), with 0^0 := 1.
double rare_event_utility(double a_tilde, double m_tilde, double alpha_blend);

// exp(sum_r beta_r * ln(v_r + eps)) — stabilized weighted geometric mean.
double acc_utility(const Vec& v_r, const Vec& beta_r, double eps_stab);

// 1 - mean pairwise (1 + cos)/2 over the coalition; below two members -> 0.
double diversity(const std::vector<int>& coalition,
                 const std::map<int, Vec>& feature_summaries);

double cleanliness(const QualityRates& rates, double gamma1, double gamma2,
                   double gamma3);

// exp(-gamma4 * mean squared (y - p(x))) under the given model.
double label_credibility(const LabeledDataset& dataset, const ModelParams& model,
                         double gamma4);

// 1 - prod_{i in S} (1 - C_i * L_i); empty coalition -> 0.
double data_quality(const std::vector<int>& coalition,
                    const std::map<int, std::pair<double, double>>& quality);

// lambda_acc * v_Acc(S) + lambda_div * v_Div(S) + lambda_qua * DQ(S).
// The empty coalition scores the base model for v_Acc and 0 elsewhere.
double coalition_value(const std::vector<int>& coalition,
                       const CoalitionContext& ctx, const ValuationConfig& cfg);

// Exact Shapley values by weighted subset enumeration (2^n evaluations,
// memoized). Guarded at 20 players.
std::map<int, double> exact_shapley(
    const std::function<double(const std::vector<int>&)>& value_fn,
    const std::vector<int>& players);

// omega_t proportional to exp(-lambda*(T-t)) for t = 1..T, normalized.
Vec time_decay_weights(int T, double lambda_decay);

}  // namespace sichainfl
