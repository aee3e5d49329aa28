// Positive-example-driven fast Shapley: additive score deltas, impact
// scoring on hard positives / critical negatives, similarity-based client
// merging, permutation-sampled group Shapley, redistribution and
// time-decayed accumulation.
#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "sichainfl/dataset.hpp"
#include "sichainfl/model.hpp"

namespace sichainfl {

struct ApproxConfig {
  int k_top = 5;           // head clients kept as singletons
  int m_hard = 20;         // hard positives per scenario
  int h_crit = 20;         // critical negatives per scenario
  double delta_q = 0.05;   // tau is the (1-delta_q) quantile of negatives
  double lambda_fp = 1.0;  // false-positive penalty
  double kappa = 0.85;     // merge threshold on cosine similarity
  int k_perm = 50;         // sampled permutations
  double gamma_ema = 0.9;  // accumulation decay
  double eps_share = 1e-8; // redistribution stabilizer
  double rho_neg = 3.0;    // negative retention ratio for stratification

  void validate() const;
};

struct ImpactProfile {
  int client_id = -1;
  Vec per_scenario_imp;  // Imp_i^(r)
  double eta = 0.0;      // sum_r omega_r * [Imp]_+
  Vec impact_vector;     // score deltas on hard/critical samples, concatenated
};

struct Grouping {
  std::vector<int> top_clients;                 // heads, descending eta
  std::vector<std::vector<int>> merged_groups;  // disjoint, creation order
  double kappa = 0.0;

  // Game units: each head as a singleton, then each merged group.
  std::vector<std::vector<int>> units() const;
};

// clamp(base + sum(deltas), 0, 1) elementwise.
Vec coalition_score(const Vec& base_scores, const std::vector<const Vec*>& deltas);

// Per-sample probability change caused by one update: p(base+delta) - p(base).
Vec score_deltas(const ModelParams& base_model, const UpdateDelta& update,
                 const std::vector<Vec>& rows);

struct HardCritSelection {
  std::vector<std::size_t> hard_pos;  // bottom-M positives by base score
  std::vector<std::size_t> crit_neg;  // top-H negatives by base score
  double tau = 0.0;                   // (1-delta)-quantile of negative scores
};

// Quantile convention: sorted ascending, index floor(q*n) clamped to n-1.
HardCritSelection select_hard_and_critical(const Vec& base_scores,
                                           const std::vector<std::uint8_t>& labels,
                                           int m_hard, int h_crit, double delta_q);

// Hinge-mean influence of a singleton coalition in one scenario.
double impact_score(const Vec& singleton_scores, double tau,
                    const std::vector<std::size_t>& hard_pos,
                    const std::vector<std::size_t>& crit_neg, double lambda_fp);

// Top-K by eta become heads; the rest join greedily: first existing group
// whose representative has cosine >= kappa, else a new group. Zero-norm
// impact vectors collect in one inert group. Ties in eta break by id.
Grouping merge_clients(const std::vector<ImpactProfile>& profiles, int k_top,
                       double kappa);

// The grouped utility game of the approximation: per scenario a hinge mean
// over hard positives minus a penalized hinge mean over critical negatives,
// with coalition scores formed additively from per-client score deltas.
// Values are memoized; eval_count tallies per-sample score evaluations on
// cache misses (the empty coalition is precomputed and free).
class GroupGame {
 public:
  struct Scenario {
    Vec base_hard, base_crit;                // s_0 restricted to the selections
    std::vector<Vec> unit_delta_hard;        // per unit, summed member deltas
    std::vector<Vec> unit_delta_crit;
    double tau = 0.0;
  };

  GroupGame(std::vector<Scenario> scenarios, Vec omega, double lambda_fp);

  std::size_t unit_count() const { return n_units_; }
  double value(const std::vector<int>& unit_indices) const;
  std::uint64_t eval_count() const { return evals_; }

 private:
  std::vector<Scenario> scenarios_;
  Vec omega_;
  double lambda_fp_;
  std::size_t n_units_;
  double empty_value_;
  mutable std::map<std::string, double> memo_;
  mutable std::uint64_t evals_ = 0;
};

// Average marginal contribution over k_perm random permutations of the
// units; deterministic under the seed.
Vec perm_shapley(std::size_t n_units,
                 const std::function<double(const std::vector<int>&)>& value_fn,
                 int k_perm, std::uint64_t seed);

// Enumerates all permutations (n_units <= 8); the mean marginal equals the
// exact Shapley value of the unit game.
Vec perm_shapley_enumerate(
    std::size_t n_units,
    const std::function<double(const std::vector<int>&)>& value_fn);

// Splits unit values among members proportionally to eta_i/(sum eta + eps).
// A unit whose denominator is exactly zero splits uniformly.
std::map<int, double> redistribute(const Vec& unit_values, const Grouping& grouping,
                                   const std::vector<ImpactProfile>& profiles,
                                   double eps_share);

// EMA accumulation: present clients get gamma*Phi + (1-gamma)*phi, absent
// clients keep gamma*Phi.
std::map<int, double> accumulate(const std::map<int, double>& prev,
                                 const std::map<int, double>& round_values,
                                 double gamma_ema);

// One full approximation round over the stratified scenario set.
struct RoundShapleyResult {
  std::vector<ImpactProfile> profiles;  // ascending client id
  Grouping grouping;
  Vec unit_values;                      // per unit, grouping.units() order
  std::map<int, double> phi_hat;        // per client
  std::uint64_t eval_count = 0;
  std::uint64_t grouped_bound = 0;      // perms * units * sum_r (M+H)
};

RoundShapleyResult round_shapley(const ModelParams& base_model,
                                 const std::map<int, UpdateDelta>& uploads,
                                 const ScenarioSet& stratified,
                                 const ApproxConfig& cfg, std::uint64_t seed,
                                 bool enumerate_perms = false);

}  // namespace sichainfl
