#include "sichainfl/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

namespace sichainfl {

namespace {

// Integer counts proportional to weights summing exactly to total
// (largest-remainder rounding; ties resolved by index).
std::vector<std::size_t> apportion(const Vec& weights, std::size_t total) {
  const double wsum = std::accumulate(weights.begin(), weights.end(), 0.0);
  const std::size_t n = weights.size();
  std::vector<std::size_t> counts(n, 0);
  if (wsum <= 0.0 || total == 0) return counts;
  std::vector<double> remainders(n);
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double exact = weights[i] / wsum * static_cast<double>(total);
    counts[i] = static_cast<std::size_t>(std::floor(exact));
    remainders[i] = exact - static_cast<double>(counts[i]);
    assigned += counts[i];
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return remainders[a] > remainders[b];
  });
  for (std::size_t k = 0; assigned < total; ++k) {
    counts[order[k % n]] += 1;
    ++assigned;
  }
  return counts;
}

std::vector<std::size_t> indices_of_label(const LabeledDataset& ds, std::uint8_t y) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < ds.size(); ++i)
    if (ds.labels[i] == y) idx.push_back(i);
  return idx;
}

LabeledDataset subset(const LabeledDataset& ds, const std::vector<std::size_t>& idx) {
  LabeledDataset out;
  out.features.reserve(idx.size());
  out.labels.reserve(idx.size());
  for (std::size_t i : idx) {
    out.features.push_back(ds.features[i]);
    out.labels.push_back(ds.labels[i]);
  }
  return out;
}

}  // namespace

LabeledDataset gen_rare_event_dataset(int n, int d, double positive_rate,
                                      double noise, std::uint64_t seed) {
  if (n <= 0 || d <= 0) throw std::invalid_argument("datagen: n and d must be positive");
  if (positive_rate <= 0.0 || positive_rate >= 0.5)
    throw std::invalid_argument("datagen: positive_rate must lie in (0, 0.5)");
  if (noise < 0.0) throw std::invalid_argument("datagen: negative noise");
  const std::size_t n_pos =
      static_cast<std::size_t>(std::llround(n * positive_rate));
  if (n_pos < 1 || n_pos >= static_cast<std::size_t>(n))
    throw std::invalid_argument("datagen: infeasible positive count");

  const double center = 1.5 / std::sqrt(static_cast<double>(d));
  Rng rng(seed);
  LabeledDataset ds;
  ds.features.resize(n);
  ds.labels.resize(n);
  for (std::size_t i = 0; i < static_cast<std::size_t>(n); ++i) {
    const bool pos = i < n_pos;
    Vec row(d);
    for (int j = 0; j < d; ++j)
      row[j] = (pos ? center : -center) + (noise > 0.0 ? rng.normal(0.0, noise) : 0.0);
    ds.features[i] = std::move(row);
    ds.labels[i] = pos ? 1 : 0;
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  rng.shuffle(order);
  LabeledDataset shuffled = subset(ds, order);
  return shuffled;
}

std::vector<LabeledDataset> dirichlet_partition(const LabeledDataset& dataset,
                                                int n_clients, double alpha,
                                                double lognormal_sigma,
                                                std::uint64_t seed) {
  dataset.validate();
  if (n_clients < 1) throw std::invalid_argument("partition: need at least one client");
  if (alpha <= 0.0) throw std::invalid_argument("partition: alpha must be positive");
  if (lognormal_sigma < 0.0) throw std::invalid_argument("partition: negative sigma");
  if (dataset.size() < static_cast<std::size_t>(n_clients))
    throw std::runtime_error("partition infeasible");

  if (n_clients == 1) return {dataset};

  Rng rng(seed);
  Vec sizes(n_clients);
  for (auto& s : sizes)
    s = lognormal_sigma > 0.0 ? rng.lognormal(0.0, lognormal_sigma) : 1.0;

  std::vector<std::vector<std::size_t>> client_indices(n_clients);
  for (std::uint8_t cls : {std::uint8_t{0}, std::uint8_t{1}}) {
    auto pool = indices_of_label(dataset, cls);
    if (pool.empty()) continue;
    rng.shuffle(pool);
    Vec weights(n_clients);
    for (int i = 0; i < n_clients; ++i) {
      double g = rng.gamma(alpha);
      // Guard against underflow for very small alpha draws.
      weights[i] = sizes[i] * std::max(g, 1e-300);
    }
    const auto counts = apportion(weights, pool.size());
    std::size_t cursor = 0;
    for (int i = 0; i < n_clients; ++i) {
      for (std::size_t k = 0; k < counts[i]; ++k)
        client_indices[i].push_back(pool[cursor++]);
    }
  }

  std::vector<LabeledDataset> shards;
  shards.reserve(n_clients);
  for (int i = 0; i < n_clients; ++i) {
    if (client_indices[i].empty()) throw std::runtime_error("partition infeasible");
    std::sort(client_indices[i].begin(), client_indices[i].end());
    shards.push_back(subset(dataset, client_indices[i]));
  }
  return shards;
}

ScenarioSet build_scenarios(const LabeledDataset& dataset, int R, Vec omega,
                            std::uint64_t seed) {
  dataset.validate();
  if (R < 1) throw std::invalid_argument("scenarios: R must be at least 1");
  if (omega.empty()) omega.assign(R, 1.0);
  if (static_cast<int>(omega.size()) != R)
    throw std::invalid_argument("scenarios: omega length mismatch");
  const double wsum = std::accumulate(omega.begin(), omega.end(), 0.0);
  if (wsum <= 0.0) throw std::invalid_argument("scenarios: omega must be positive");
  for (auto& w : omega) w /= wsum;

  Rng rng(seed);
  auto pos = indices_of_label(dataset, 1);
  auto neg = indices_of_label(dataset, 0);
  if (pos.size() < static_cast<std::size_t>(R))
    throw std::runtime_error("scenarios: a scenario would have no positives");
  if (neg.size() < static_cast<std::size_t>(R))
    throw std::runtime_error("scenarios: a scenario would have no negatives");
  rng.shuffle(pos);
  rng.shuffle(neg);

  std::vector<std::vector<std::size_t>> per_scenario(R);
  for (std::size_t i = 0; i < pos.size(); ++i) per_scenario[i % R].push_back(pos[i]);
  for (std::size_t i = 0; i < neg.size(); ++i) per_scenario[i % R].push_back(neg[i]);

  ScenarioSet out;
  out.omega = std::move(omega);
  for (int r = 0; r < R; ++r) {
    std::sort(per_scenario[r].begin(), per_scenario[r].end());
    out.scenarios.push_back(subset(dataset, per_scenario[r]));
    out.pi.push_back(out.scenarios.back().positive_rate());
  }
  out.validate();
  return out;
}

ScenarioSet stratify_validation(const ScenarioSet& scenarios, double rho_neg,
                                std::uint64_t seed) {
  scenarios.validate();
  if (rho_neg <= 0.0) throw std::invalid_argument("stratify: rho_neg must be positive");
  Rng rng(seed);
  ScenarioSet out;
  out.omega = scenarios.omega;
  for (const auto& sc : scenarios.scenarios) {
    auto pos = indices_of_label(sc, 1);
    auto neg = indices_of_label(sc, 0);
    const std::size_t keep_neg = std::min(
        static_cast<std::size_t>(std::floor(rho_neg * static_cast<double>(pos.size()))),
        neg.size());
    rng.shuffle(neg);
    neg.resize(keep_neg);
    std::vector<std::size_t> keep = pos;
    keep.insert(keep.end(), neg.begin(), neg.end());
    std::sort(keep.begin(), keep.end());
    LabeledDataset reduced = subset(sc, keep);
    out.pi.push_back(reduced.size() > 0 ? reduced.positive_rate() : 0.0);
    out.scenarios.push_back(std::move(reduced));
  }
  return out;
}

LabeledDataset corrupt_labels(const LabeledDataset& dataset, double flip_frac,
                              std::uint64_t seed) {
  if (flip_frac < 0.0 || flip_frac > 1.0)
    throw std::invalid_argument("corrupt: flip_frac must lie in [0,1]");
  LabeledDataset out = dataset;
  const std::size_t k =
      static_cast<std::size_t>(std::llround(flip_frac * static_cast<double>(out.size())));
  if (k == 0) return out;
  std::vector<std::size_t> order(out.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(seed);
  rng.shuffle(order);
  for (std::size_t i = 0; i < k; ++i) out.labels[order[i]] ^= 1;
  return out;
}

QualityRates assign_quality(BehaviorKind kind, std::uint64_t seed,
                            double adversarial_lo, double adversarial_hi) {
  Rng rng(seed);
  double lo = adversarial_lo, hi = adversarial_hi;
  switch (kind) {
    case BehaviorKind::honest_high: lo = 0.0; hi = 0.05; break;
    case BehaviorKind::honest_low: lo = 0.2; hi = 0.6; break;
    default: break;
  }
  QualityRates q;
  q.miss_rate = rng.uniform(lo, hi);
  q.outlier_rate = rng.uniform(lo, hi);
  q.sync_rate = rng.uniform(lo, hi);
  return q;
}

}  // namespace sichainfl
