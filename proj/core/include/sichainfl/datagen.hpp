// Synthetic rare-event data, non-IID client partitioning, scenario splits
// with positive-preserving stratification, and label corruption.
#pragma once

#include <cstdint>
#include <vector>

#include "sichainfl/dataset.hpp"

namespace sichainfl {

// Two Gaussian clusters at +/- mean with per-coordinate std `noise`;
// exactly round(n * positive_rate) positives. Row order is shuffled.
LabeledDataset gen_rare_event_dataset(int n, int d, double positive_rate,
                                      double noise, std::uint64_t seed);

// Disjoint client shards whose union is the input. Shard sizes follow
// log-normal(0, lognormal_sigma) draws; each class is spread over clients
// with Dirichlet(alpha) proportions. Throws "partition infeasible" if any
// client ends up empty.
std::vector<LabeledDataset> dirichlet_partition(const LabeledDataset& dataset,
                                                int n_clients, double alpha,
                                                double lognormal_sigma,
                                                std::uint64_t seed);

// Splits the dataset into R disjoint scenario subsets, each with at least
// one positive and one negative. omega may be empty (uniform) or any
// positive vector (normalized to sum 1).
ScenarioSet build_scenarios(const LabeledDataset& dataset, int R, Vec omega,
                            std::uint64_t seed);

// Keeps every positive; per scenario keeps min(floor(rho_neg*|P|), |N|)
// negatives sampled uniformly without replacement.
ScenarioSet stratify_validation(const ScenarioSet& scenarios, double rho_neg,
                                std::uint64_t seed);

// Flips round(flip_frac * n) uniformly chosen labels 0 <-> 1.
LabeledDataset corrupt_labels(const LabeledDataset& dataset, double flip_frac,
                              std::uint64_t seed);

// Draws quality rates for a behavior kind: honest_high in [0, 0.05],
// honest_low in [0.2, 0.6], adversarial kinds from the given band.
QualityRates assign_quality(BehaviorKind kind, std::uint64_t seed,
                            double adversarial_lo = 0.0,
                            double adversarial_hi = 0.05);

}  // namespace sichainfl
