#include "sichainfl/approx_shapley.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sichainfl {

namespace {

double hinge(double x) { return x > 0.0 ? x : 0.0; }

std::string membership_key(const std::vector<int>& unit_indices, std::size_t n_units) {
  std::string key(n_units, '0');
  for (int u : unit_indices) {
    if (u < 0 || static_cast<std::size_t>(u) >= n_units)
      throw std::invalid_argument("group game: unit index out of range");
    key[static_cast<std::size_t>(u)] = '1';
  }
  return key;
}

}  // namespace

void ApproxConfig::validate() const {
  if (k_top < 1) throw std::invalid_argument("approx: k_top must be positive");
  if (m_hard < 1 || h_crit < 1)
    throw std::invalid_argument("approx: m_hard/h_crit must be positive");
  if (delta_q <= 0.0 || delta_q >= 1.0)
    throw std::invalid_argument("approx: delta_q outside (0,1)");
  if (lambda_fp <= 0.0) throw std::invalid_argument("approx: lambda_fp must be positive");
  if (k_perm < 1) throw std::invalid_argument("approx: k_perm must be positive");
  if (gamma_ema <= 0.0 || gamma_ema > 1.0)
    throw std::invalid_argument("approx: gamma_ema outside (0,1]");
  if (eps_share < 0.0) throw std::invalid_argument("approx: negative eps_share");
  if (rho_neg <= 0.0) throw std::invalid_argument("approx: rho_neg must be positive");
}

std::vector<std::vector<int>> Grouping::units() const {
  std::vector<std::vector<int>> out;
  out.reserve(top_clients.size() + merged_groups.size());
  for (int id : top_clients) out.push_back({id});
  for (const auto& g : merged_groups) out.push_back(g);
  return out;
}

Vec coalition_score(const Vec& base_scores, const std::vector<const Vec*>& deltas) {
  Vec out = base_scores;
  for (const Vec* d : deltas) {
    if (d->size() != out.size())
      throw std::invalid_argument("coalition_score: length mismatch");
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += (*d)[i];
  }
  for (double& s : out) s = std::min(1.0, std::max(0.0, s));
  return out;
}

Vec score_deltas(const ModelParams& base_model, const UpdateDelta& update,
                 const std::vector<Vec>& rows) {
  if (update.delta.size() != base_model.dim())
    throw std::invalid_argument("score_deltas: dimension mismatch");
  ModelParams shifted = base_model;
  axpy(1.0, update.delta, shifted.weights);
  const Vec base = predict_proba_batch(base_model, rows);
  const Vec moved = predict_proba_batch(shifted, rows);
  Vec out(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out[i] = moved[i] - base[i];
  return out;
}

HardCritSelection select_hard_and_critical(const Vec& base_scores,
                                           const std::vector<std::uint8_t>& labels,
                                           int m_hard, int h_crit, double delta_q) {
  if (base_scores.size() != labels.size())
    throw std::invalid_argument("selection: length mismatch");
  if (m_hard < 1 || h_crit < 1)
    throw std::invalid_argument("selection: m_hard/h_crit must be positive");
  if (delta_q <= 0.0 || delta_q >= 1.0)
    throw std::invalid_argument("selection: delta_q outside (0,1)");

  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i)
    (labels[i] == 1 ? pos : neg).push_back(i);
  if (pos.empty()) throw std::invalid_argument("selection: scenario has no positives");
  if (neg.empty()) throw std::invalid_argument("selection: scenario has no negatives");

  HardCritSelection sel;
  std::stable_sort(pos.begin(), pos.end(), [&](std::size_t a, std::size_t b) {
    return base_scores[a] < base_scores[b];
  });
  pos.resize(std::min<std::size_t>(pos.size(), static_cast<std::size_t>(m_hard)));
  sel.hard_pos = std::move(pos);

  std::vector<std::size_t> neg_sorted = neg;
  std::stable_sort(neg_sorted.begin(), neg_sorted.end(),
                   [&](std::size_t a, std::size_t b) {
                     return base_scores[a] > base_scores[b];
                   });
  neg_sorted.resize(
      std::min<std::size_t>(neg_sorted.size(), static_cast<std::size_t>(h_crit)));
  sel.crit_neg = std::move(neg_sorted);

  // tau: empirical (1-delta)-quantile of negative baseline scores, taken as
  // sorted[floor(q*n)] clamped to the last element.
  Vec neg_scores;
  neg_scores.reserve(neg.size());
  for (std::size_t i : neg) neg_scores.push_back(base_scores[i]);
  std::sort(neg_scores.begin(), neg_scores.end());
  const double q = 1.0 - delta_q;
  std::size_t idx = static_cast<std::size_t>(
      std::floor(q * static_cast<double>(neg_scores.size())));
  idx = std::min(idx, neg_scores.size() - 1);
  sel.tau = neg_scores[idx];
  return sel;
}

double impact_score(const Vec& singleton_scores, double tau,
                    const std::vector<std::size_t>& hard_pos,
                    const std::vector<std::size_t>& crit_neg, double lambda_fp) {
  if (hard_pos.empty() || crit_neg.empty())
    throw std::invalid_argument("impact: empty hard/critical selection");
  double gain = 0.0;
  for (std::size_t i : hard_pos) gain += hinge(singleton_scores[i] - tau);
  gain /= static_cast<double>(hard_pos.size());
  double alarm = 0.0;
  for (std::size_t i : crit_neg) alarm += hinge(singleton_scores[i] - tau);
  alarm /= static_cast<double>(crit_neg.size());
  return gain - lambda_fp * alarm;
}

Grouping merge_clients(const std::vector<ImpactProfile>& profiles, int k_top,
                       double kappa) {
  if (profiles.empty()) throw std::invalid_argument("merge: no profiles");
  if (k_top < 0) throw std::invalid_argument("merge: negative k_top");

  std::vector<std::size_t> order(profiles.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (profiles[a].eta != profiles[b].eta) return profiles[a].eta > profiles[b].eta;
    return profiles[a].client_id < profiles[b].client_id;
  });

  Grouping g;
  g.kappa = kappa;
  const std::size_t heads =
      std::min<std::size_t>(static_cast<std::size_t>(k_top), profiles.size());
  for (std::size_t k = 0; k < heads; ++k)
    g.top_clients.push_back(profiles[order[k]].client_id);

  std::vector<std::size_t> group_reps;  // profile index of each group's representative
  std::vector<int> inert;
  for (std::size_t k = heads; k < order.size(); ++k) {
    const auto& p = profiles[order[k]];
    if (l2_norm(p.impact_vector) == 0.0) {
      inert.push_back(p.client_id);
      continue;
    }
    bool placed = false;
    for (std::size_t gi = 0; gi < group_reps.size(); ++gi) {
      const auto& rep = profiles[group_reps[gi]];
      if (cosine_similarity(p.impact_vector, rep.impact_vector) >= kappa) {
        g.merged_groups[gi].push_back(p.client_id);
        placed = true;
        break;
      }
    }
    if (!placed) {
      g.merged_groups.push_back({p.client_id});
      group_reps.push_back(order[k]);
    }
  }
  if (!inert.empty()) g.merged_groups.push_back(std::move(inert));
  return g;
}

GroupGame::GroupGame(std::vector<Scenario> scenarios, Vec omega, double lambda_fp)
    : scenarios_(std::move(scenarios)),
      omega_(std::move(omega)),
      lambda_fp_(lambda_fp) {
  if (scenarios_.empty()) throw std::invalid_argument("group game: no scenarios");
  if (omega_.size() != scenarios_.size())
    throw std::invalid_argument("group game: omega length mismatch");
  n_units_ = scenarios_.front().unit_delta_hard.size();
  for (const auto& sc : scenarios_) {
    if (sc.unit_delta_hard.size() != n_units_ || sc.unit_delta_crit.size() != n_units_)
      throw std::invalid_argument("group game: inconsistent unit count");
  }
  // The empty coalition reuses the baseline scores computed upstream, so it
  // costs no fresh score evaluations.
  empty_value_ = 0.0;
  for (std::size_t r = 0; r < scenarios_.size(); ++r) {
    const auto& sc = scenarios_[r];
    double gain = 0.0;
    for (double s : sc.base_hard) gain += hinge(s - sc.tau);
    gain /= static_cast<double>(sc.base_hard.size());
    double alarm = 0.0;
    for (double s : sc.base_crit) alarm += hinge(s - sc.tau);
    alarm /= static_cast<double>(sc.base_crit.size());
    empty_value_ += omega_[r] * (gain - lambda_fp_ * alarm);
  }
  memo_[std::string(n_units_, '0')] = empty_value_;
}

double GroupGame::value(const std::vector<int>& unit_indices) const {
  const std::string key = membership_key(unit_indices, n_units_);
  const auto it = memo_.find(key);
  if (it != memo_.end()) return it->second;

  double total = 0.0;
  for (std::size_t r = 0; r < scenarios_.size(); ++r) {
    const auto& sc = scenarios_[r];
    Vec s_hard = sc.base_hard;
    Vec s_crit = sc.base_crit;
    for (std::size_t u = 0; u < n_units_; ++u) {
      if (key[u] != '1') continue;
      for (std::size_t i = 0; i < s_hard.size(); ++i) s_hard[i] += sc.unit_delta_hard[u][i];
      for (std::size_t i = 0; i < s_crit.size(); ++i) s_crit[i] += sc.unit_delta_crit[u][i];
    }
    double gain = 0.0;
    for (double s : s_hard) gain += hinge(std::min(1.0, std::max(0.0, s)) - sc.tau);
    gain /= static_cast<double>(s_hard.size());
    double alarm = 0.0;
    for (double s : s_crit) alarm += hinge(std::min(1.0, std::max(0.0, s)) - sc.tau);
    alarm /= static_cast<double>(s_crit.size());
    total += omega_[r] * (gain - lambda_fp_ * alarm);
    evals_ += s_hard.size() + s_crit.size();
  }
  memo_[key] = total;
  return total;
}

Vec perm_shapley(std::size_t n_units,
                 const std::function<double(const std::vector<int>&)>& value_fn,
                 int k_perm, std::uint64_t seed) {
  if (n_units == 0) return {};
  if (k_perm < 1) throw std::invalid_argument("perm_shapley: k_perm must be positive");
  Rng rng(seed);
  std::vector<int> perm(n_units);
  std::iota(perm.begin(), perm.end(), 0);
  Vec phi(n_units, 0.0);
  std::vector<int> prefix;
  for (int k = 0; k < k_perm; ++k) {
    rng.shuffle(perm);
    prefix.clear();
    double prev = value_fn(prefix);
    for (int u : perm) {
      prefix.push_back(u);
      const double cur = value_fn(prefix);
      phi[static_cast<std::size_t>(u)] += cur - prev;
      prev = cur;
    }
  }
  for (double& p : phi) p /= static_cast<double>(k_perm);
  return phi;
}

Vec perm_shapley_enumerate(
    std::size_t n_units,
    const std::function<double(const std::vector<int>&)>& value_fn) {
  if (n_units == 0) return {};
  if (n_units > 8) throw std::invalid_argument("use sampled permutations");
  std::vector<int> perm(n_units);
  std::iota(perm.begin(), perm.end(), 0);
  Vec phi(n_units, 0.0);
  std::size_t count = 0;
  std::vector<int> prefix;
  do {
    prefix.clear();
    double prev = value_fn(prefix);
    for (int u : perm) {
      prefix.push_back(u);
      const double cur = value_fn(prefix);
      phi[static_cast<std::size_t>(u)] += cur - prev;
      prev = cur;
    }
    ++count;
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (double& p : phi) p /= static_cast<double>(count);
  return phi;
}

std::map<int, double> redistribute(const Vec& unit_values, const Grouping& grouping,
                                   const std::vector<ImpactProfile>& profiles,
                                   double eps_share) {
  if (eps_share < 0.0) throw std::invalid_argument("redistribute: negative eps");
  std::map<int, double> eta;
  for (const auto& p : profiles) eta[p.client_id] = p.eta;

  const auto units = grouping.units();
  if (units.size() != unit_values.size())
    throw std::invalid_argument("redistribute: unit count mismatch");

  std::map<int, double> phi;
  for (std::size_t u = 0; u < units.size(); ++u) {
    double eta_sum = 0.0;
    for (int id : units[u]) {
      const auto it = eta.find(id);
      if (it == eta.end()) throw std::invalid_argument("redistribute: unknown client");
      eta_sum += it->second;
    }
    const double denom = eta_sum + eps_share;
    for (int id : units[u]) {
      const double share = denom > 0.0 ? eta.at(id) / denom
                                       : 1.0 / static_cast<double>(units[u].size());
      phi[id] = share * unit_values[u];
    }
  }
  return phi;
}

std::map<int, double> accumulate(const std::map<int, double>& prev,
                                 const std::map<int, double>& round_values,
                                 double gamma_ema) {
  if (gamma_ema <= 0.0 || gamma_ema > 1.0)
    throw std::invalid_argument("accumulate: gamma outside (0,1]");
  std::map<int, double> out;
  for (const auto& [id, value] : prev) out[id] = gamma_ema * value;
  for (const auto& [id, value] : round_values) {
    double base = 0.0;
    if (const auto it = prev.find(id); it != prev.end()) base = gamma_ema * it->second;
    out[id] = base + (1.0 - gamma_ema) * value;
  }
  return out;
}

RoundShapleyResult round_shapley(const ModelParams& base_model,
                                 const std::map<int, UpdateDelta>& uploads,
                                 const ScenarioSet& stratified,
                                 const ApproxConfig& cfg, std::uint64_t seed,
                                 bool enumerate_perms) {
  cfg.validate();
  if (uploads.empty()) throw std::invalid_argument("round_shapley: no uploads");
  const std::size_t R = stratified.count();

  // Per-scenario baseline scores and hard/critical selections.
  std::vector<Vec> base_scores(R);
  std::vector<HardCritSelection> sel(R);
  for (std::size_t r = 0; r < R; ++r) {
    const auto& sc = stratified.scenarios[r];
    base_scores[r] = predict_proba_batch(base_model, sc.features);
    sel[r] = select_hard_and_critical(base_scores[r], sc.labels, cfg.m_hard,
                                      cfg.h_crit, cfg.delta_q);
  }

  std::vector<int> client_ids;
  client_ids.reserve(uploads.size());
  for (const auto& [id, _] : uploads) client_ids.push_back(id);

  // Per-client score deltas across scenarios, fanned out in parallel.
  std::vector<std::vector<Vec>> deltas(client_ids.size());
  parallel_for(client_ids.size(), [&](std::size_t c) {
    const auto& upd = uploads.at(client_ids[c]);
    deltas[c].resize(R);
    for (std::size_t r = 0; r < R; ++r)
      deltas[c][r] = score_deltas(base_model, upd, stratified.scenarios[r].features);
  });

  std::vector<ImpactProfile> profiles(client_ids.size());
  for (std::size_t c = 0; c < client_ids.size(); ++c) {
    ImpactProfile p;
    p.client_id = client_ids[c];
    p.per_scenario_imp.resize(R);
    for (std::size_t r = 0; r < R; ++r) {
      Vec singleton = base_scores[r];
      for (std::size_t i = 0; i < singleton.size(); ++i) {
        singleton[i] = std::min(1.0, std::max(0.0, singleton[i] + deltas[c][r][i]));
      }
      p.per_scenario_imp[r] = impact_score(singleton, sel[r].tau, sel[r].hard_pos,
                                           sel[r].crit_neg, cfg.lambda_fp);
      p.eta += stratified.omega[r] * hinge(p.per_scenario_imp[r]);
      for (std::size_t i : sel[r].hard_pos) p.impact_vector.push_back(deltas[c][r][i]);
      for (std::size_t i : sel[r].crit_neg) p.impact_vector.push_back(deltas[c][r][i]);
    }
    profiles[c] = std::move(p);
  }

  RoundShapleyResult res;
  res.profiles = profiles;
  res.grouping = merge_clients(profiles, cfg.k_top, cfg.kappa);

  // Assemble the unit game: summed member deltas restricted to selections.
  const auto units = res.grouping.units();
  std::map<int, std::size_t> client_slot;
  for (std::size_t c = 0; c < client_ids.size(); ++c) client_slot[client_ids[c]] = c;

  std::vector<GroupGame::Scenario> game_scenarios(R);
  for (std::size_t r = 0; r < R; ++r) {
    auto& gs = game_scenarios[r];
    gs.tau = sel[r].tau;
    for (std::size_t i : sel[r].hard_pos) gs.base_hard.push_back(base_scores[r][i]);
    for (std::size_t i : sel[r].crit_neg) gs.base_crit.push_back(base_scores[r][i]);
    gs.unit_delta_hard.assign(units.size(), Vec(sel[r].hard_pos.size(), 0.0));
    gs.unit_delta_crit.assign(units.size(), Vec(sel[r].crit_neg.size(), 0.0));
    for (std::size_t u = 0; u < units.size(); ++u) {
      for (int id : units[u]) {
        const auto& d = deltas[client_slot.at(id)][r];
        for (std::size_t k = 0; k < sel[r].hard_pos.size(); ++k)
          gs.unit_delta_hard[u][k] += d[sel[r].hard_pos[k]];
        for (std::size_t k = 0; k < sel[r].crit_neg.size(); ++k)
          gs.unit_delta_crit[u][k] += d[sel[r].crit_neg[k]];
      }
    }
  }

  GroupGame game(std::move(game_scenarios), stratified.omega, cfg.lambda_fp);
  const auto value_fn = [&game](const std::vector<int>& s) { return game.value(s); };

  std::uint64_t perms_used;
  if (enumerate_perms) {
    res.unit_values = perm_shapley_enumerate(units.size(), value_fn);
    perms_used = 1;
    for (std::size_t k = 2; k <= units.size(); ++k) perms_used *= k;
  } else {
    res.unit_values = perm_shapley(units.size(), value_fn, cfg.k_perm,
                                   derive_seed(seed, 0x5eed, 1));
    perms_used = static_cast<std::uint64_t>(cfg.k_perm);
  }
  res.phi_hat = redistribute(res.unit_values, res.grouping, profiles, cfg.eps_share);
  res.eval_count = game.eval_count();
  res.grouped_bound = perms_used * units.size() * R *
                      static_cast<std::uint64_t>(cfg.m_hard + cfg.h_crit);
  return res;
}

}  // namespace sichainfl
