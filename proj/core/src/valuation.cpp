#include "sichainfl/valuation.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sichainfl {

namespace {

double clamp01(double x) { return std::min(1.0, std::max(0.0, x)); }

// pow with the 0^0 := 1 convention used by the blended utility.
double pow_or_one(double base, double expo) {
  if (expo == 0.0) return 1.0;
  return std::pow(base, expo);
}

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
};

Confusion confusion_at(const Vec& scores, const std::vector<std::uint8_t>& labels,
                       double threshold) {
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (labels[i] == 1) {
      pred ? ++c.tp : ++c.fn;
    } else {
      pred ? ++c.fp : ++c.tn;
    }
  }
  return c;
}

double mcc_of(const Confusion& c) {
  const double tp = static_cast<double>(c.tp), fp = static_cast<double>(c.fp);
  const double tn = static_cast<double>(c.tn), fn = static_cast<double>(c.fn);
  const double denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn);
  if (denom <= 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(denom);
}

void check_binary_inputs(const Vec& scores, const std::vector<std::uint8_t>& labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("metric: score/label length mismatch");
  if (scores.empty()) throw std::invalid_argument("metric: empty input");
  if (!all_finite(scores)) throw std::invalid_argument("metric: non-finite score");
}

}  // namespace

Vec ValuationConfig::default_threshold_grid() {
  Vec grid(99);
  for (int i = 0; i < 99; ++i) grid[i] = (i + 1) / 100.0;
  return grid;
}

Vec ValuationConfig::effective_grid() const {
  return threshold_grid.empty() ? default_threshold_grid() : threshold_grid;
}

Vec ValuationConfig::effective_beta(std::size_t scenario_count) const {
  if (beta_r.empty())
    return Vec(scenario_count, 1.0 / static_cast<double>(scenario_count));
  if (beta_r.size() != scenario_count)
    throw std::invalid_argument("valuation: beta_r length mismatch");
  return beta_r;
}

void ValuationConfig::validate() const {
  if (alpha_blend < 0.0 || alpha_blend > 1.0)
    throw std::invalid_argument("valuation: alpha_blend outside [0,1]");
  if (eps_stab <= 0.0) throw std::invalid_argument("valuation: eps_stab must be positive");
  if (rho_fpr <= 0.0 || rho_fpr >= 1.0)
    throw std::invalid_argument("valuation: rho_fpr outside (0,1)");
  if (gamma1 < 0 || gamma2 < 0 || gamma3 < 0 || gamma4 < 0)
    throw std::invalid_argument("valuation: negative gamma");
  if (lambda_acc < 0 || lambda_div < 0 || lambda_qua < 0)
    throw std::invalid_argument("valuation: negative lambda");
  if (std::abs(lambda_acc + lambda_div + lambda_qua - 1.0) > 1e-12)
    throw std::invalid_argument("valuation: lambdas must sum to 1");
  if (lambda_decay < 0.0)
    throw std::invalid_argument("valuation: negative decay rate");
  if (!beta_r.empty()) {
    const double s = std::accumulate(beta_r.begin(), beta_r.end(), 0.0);
    if (std::abs(s - 1.0) > 1e-12)
      throw std::invalid_argument("valuation: beta_r must sum to 1");
  }
  const Vec grid = effective_grid();
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] <= 0.0 || grid[i] >= 1.0)
      throw std::invalid_argument("valuation: grid threshold outside (0,1)");
    if (i > 0 && grid[i] <= grid[i - 1])
      throw std::invalid_argument("valuation: grid not strictly increasing");
  }
}

void CoalitionContext::validate() const {
  base_model.validate();
  scenarios.validate();
  for (const auto& [id, upd] : client_updates) {
    if (upd.delta.size() != base_model.dim())
      throw std::invalid_argument("context: update dimension mismatch");
    if (!feature_summaries.count(id))
      throw std::invalid_argument("context: missing feature summary");
    if (!quality.count(id)) throw std::invalid_argument("context: missing quality");
    const auto& [ci, li] = quality.at(id);
    if (ci <= 0.0 || ci > 1.0 || li <= 0.0 || li > 1.0)
      throw std::invalid_argument("context: quality outside (0,1]");
  }
}

double auprc(const Vec& scores, const std::vector<std::uint8_t>& labels) {
  check_binary_inputs(scores, labels);
  const std::size_t n_pos =
      static_cast<std::size_t>(std::count(labels.begin(), labels.end(), std::uint8_t{1}));
  if (n_pos == 0) throw std::invalid_argument("undefined AUPRC");
  const std::size_t n_neg = labels.size() - n_pos;
  if (n_neg == 0) throw std::invalid_argument("metric: no negatives");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  double area = 0.0;
  double prev_recall = 0.0, prev_precision = 1.0;
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    // One threshold per distinct score; ties enter together.
    const double s = scores[order[i]];
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == s) {
      labels[order[j]] == 1 ? ++tp : ++fp;
      ++j;
    }
    const double recall = static_cast<double>(tp) / static_cast<double>(n_pos);
    if (recall > prev_recall) {
      const double precision = static_cast<double>(tp) / static_cast<double>(tp + fp);
      area += (recall - prev_recall) * (precision + prev_precision) / 2.0;
      prev_recall = recall;
      prev_precision = precision;
    }
    i = j;
  }
  return area;
}

double normalized_auprc(double a, double pi_r) {
  if (pi_r <= 0.0 || pi_r >= 1.0)
    throw std::invalid_argument("normalized_auprc: pi outside (0,1)");
  return (a - pi_r) / (1.0 - pi_r);
}

double mcc_budgeted(const Vec& scores, const std::vector<std::uint8_t>& labels,
                    const Vec& grid, double rho_fpr) {
  check_binary_inputs(scores, labels);
  if (grid.empty()) throw std::invalid_argument("mcc: empty threshold grid");
  const auto n_pos = std::count(labels.begin(), labels.end(), std::uint8_t{1});
  if (n_pos == 0 || n_pos == static_cast<std::ptrdiff_t>(labels.size()))
    throw std::invalid_argument("mcc: need one positive and one negative");

  double best = -1.0;  // worst-case floor when no threshold is feasible
  for (double tau : grid) {
    const Confusion c = confusion_at(scores, labels, tau);
    const double fpr = static_cast<double>(c.fp) / static_cast<double>(c.fp + c.tn);
    if (fpr > rho_fpr) continue;
    best = std::max(best, mcc_of(c));
  }
  return (best + 1.0) / 2.0;
}

double rare_event_utility(double a_tilde, double m_tilde, double alpha_blend) {
  if (alpha_blend < 0.0 || alpha_blend > 1.0)
    throw std::invalid_argument("rare_event_utility: alpha outside [0,1]");
  const double a = clamp01(a_tilde);
  const double m = clamp01(m_tilde);
  return pow_or_one(a, alpha_blend) * pow_or_one(m, 1.0 - alpha_blend);
}

double acc_utility(const Vec& v_r, const Vec& beta_r, double eps_stab) {
  if (v_r.empty() || v_r.size() != beta_r.size())
    throw std::invalid_argument("acc_utility: length mismatch");
  if (eps_stab < 0.0) throw std::invalid_argument("acc_utility: negative eps");
  double log_sum = 0.0;
  for (std::size_t r = 0; r < v_r.size(); ++r)
    log_sum += beta_r[r] * std::log(v_r[r] + eps_stab);
  return std::exp(log_sum);
}

double diversity(const std::vector<int>& coalition,
                 const std::map<int, Vec>& feature_summaries) {
  if (coalition.size() < 2) return 0.0;
  double sim_sum = 0.0;
  std::size_t pairs = 0;
  for (std::size_t a = 0; a < coalition.size(); ++a) {
    const auto it_a = feature_summaries.find(coalition[a]);
    if (it_a == feature_summaries.end())
      throw std::invalid_argument("diversity: missing summary vector");
    if (l2_norm(it_a->second) == 0.0) throw std::invalid_argument("degenerate summary");
    for (std::size_t b = a + 1; b < coalition.size(); ++b) {
      const auto it_b = feature_summaries.find(coalition[b]);
      if (it_b == feature_summaries.end())
        throw std::invalid_argument("diversity: missing summary vector");
      if (l2_norm(it_b->second) == 0.0) throw std::invalid_argument("degenerate summary");
      sim_sum += (1.0 + cosine_similarity(it_a->second, it_b->second)) / 2.0;
      ++pairs;
    }
  }
  return 1.0 - sim_sum / static_cast<double>(pairs);
}

double cleanliness(const QualityRates& rates, double gamma1, double gamma2,
                   double gamma3) {
  return std::exp(-gamma1 * rates.miss_rate - gamma2 * rates.outlier_rate -
                  gamma3 * rates.sync_rate);
}

double label_credibility(const LabeledDataset& dataset, const ModelParams& model,
                         double gamma4) {
  if (dataset.size() == 0) throw std::invalid_argument("empty local dataset");
  double err = 0.0;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const double p = predict_proba(model, dataset.features[i]);
    const double d = static_cast<double>(dataset.labels[i]) - p;
    err += d * d;
  }
  err /= static_cast<double>(dataset.size());
  return std::exp(-gamma4 * err);
}

double data_quality(const std::vector<int>& coalition,
                    const std::map<int, std::pair<double, double>>& quality) {
  double prod = 1.0;
  for (int id : coalition) {
    const auto it = quality.find(id);
    if (it == quality.end()) throw std::invalid_argument("data_quality: missing client");
    prod *= 1.0 - it->second.first * it->second.second;
  }
  return 1.0 - prod;
}

double coalition_value(const std::vector<int>& coalition,
                       const CoalitionContext& ctx, const ValuationConfig& cfg) {
  cfg.validate();
  const std::size_t R = ctx.scenarios.count();
  const Vec beta = cfg.effective_beta(R);
  const Vec grid = cfg.effective_grid();

  // Coalition scores per scenario: either full model re-aggregation or the
  // clipped additive score approximation.
  Vec v_r(R);
  if (cfg.eval_mode == ValuationConfig::EvalMode::full || coalition.empty()) {
    ModelParams coal_model = ctx.base_model;
    for (int id : coalition) {
      const auto it = ctx.client_updates.find(id);
      if (it == ctx.client_updates.end())
        throw std::invalid_argument("coalition_value: unknown client");
      axpy(1.0, it->second.delta, coal_model.weights);
    }
    for (std::size_t r = 0; r < R; ++r) {
      const auto& sc = ctx.scenarios.scenarios[r];
      const Vec scores = predict_proba_batch(coal_model, sc.features);
      const double a = normalized_auprc(auprc(scores, sc.labels), ctx.scenarios.pi[r]);
      const double m = mcc_budgeted(scores, sc.labels, grid, cfg.rho_fpr);
      v_r[r] = rare_event_utility(a, m, cfg.alpha_blend);
    }
  } else {
    for (std::size_t r = 0; r < R; ++r) {
      const auto& sc = ctx.scenarios.scenarios[r];
      const Vec base = predict_proba_batch(ctx.base_model, sc.features);
      Vec scores = base;
      for (int id : coalition) {
        const auto it = ctx.client_updates.find(id);
        if (it == ctx.client_updates.end())
          throw std::invalid_argument("coalition_value: unknown client");
        ModelParams shifted = ctx.base_model;
        axpy(1.0, it->second.delta, shifted.weights);
        const Vec single = predict_proba_batch(shifted, sc.features);
        for (std::size_t i = 0; i < scores.size(); ++i) scores[i] += single[i] - base[i];
      }
      for (double& s : scores) s = clamp01(s);
      const double a = normalized_auprc(auprc(scores, sc.labels), ctx.scenarios.pi[r]);
      const double m = mcc_budgeted(scores, sc.labels, grid, cfg.rho_fpr);
      v_r[r] = rare_event_utility(a, m, cfg.alpha_blend);
    }
  }
  const double v_acc = acc_utility(v_r, beta, cfg.eps_stab);
  if (coalition.empty()) return cfg.lambda_acc * v_acc;
  const double v_div = diversity(coalition, ctx.feature_summaries);
  const double dq = data_quality(coalition, ctx.quality);
  return cfg.lambda_acc * v_acc + cfg.lambda_div * v_div + cfg.lambda_qua * dq;
}

std::map<int, double> exact_shapley(
    const std::function<double(const std::vector<int>&)>& value_fn,
    const std::vector<int>& players) {
  const std::size_t n = players.size();
  if (n == 0) return {};
  if (n > 20) throw std::invalid_argument("use approximation");

  const std::size_t n_subsets = std::size_t{1} << n;
  Vec values(n_subsets);
  std::vector<int> members;
  members.reserve(n);
  for (std::size_t mask = 0; mask < n_subsets; ++mask) {
    members.clear();
    for (std::size_t i = 0; i < n; ++i)
      if (mask & (std::size_t{1} << i)) members.push_back(players[i]);
    values[mask] = value_fn(members);
  }

  // weight(s) = s! (n-1-s)! / n!
  Vec weight(n);
  for (std::size_t s = 0; s < n; ++s) {
    double w = 1.0 / static_cast<double>(n);
    for (std::size_t k = 1; k <= s; ++k)
      w *= static_cast<double>(k) / static_cast<double>(n - k);
    weight[s] = w;
  }

  std::map<int, double> phi;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    double acc = 0.0;
    for (std::size_t mask = 0; mask < n_subsets; ++mask) {
      if (mask & bit) continue;
      const std::size_t s = static_cast<std::size_t>(std::popcount(mask));
      acc += weight[s] * (values[mask | bit] - values[mask]);
    }
    phi[players[i]] = acc;
  }
  return phi;
}

Vec time_decay_weights(int T, double lambda_decay) {
  if (T < 1) throw std::invalid_argument("time_decay: T must be at least 1");
  if (lambda_decay < 0.0) throw std::invalid_argument("time_decay: negative lambda");
  Vec w(T);
  double sum = 0.0;
  for (int t = 1; t <= T; ++t) {
    w[t - 1] = std::exp(-lambda_decay * static_cast<double>(T - t));
    sum += w[t - 1];
  }
  for (double& x : w) x /= sum;
  return w;
}

}  // namespace sichainfl
