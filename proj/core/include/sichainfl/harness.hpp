// Experiment orchestration: the full per-round pipeline (local training,
// clipping and noising, impact-driven grouped Shapley, committee voting,
// threshold signing, Shapley-weighted aggregation, ledger append), the
// FedAvg baseline sharing data and seeds, bound monitors, complexity
// counters and report emission.
#pragma once

#include <filesystem>
#include <map>
#include <vector>

#include "sichainfl/adversary.hpp"
#include "sichainfl/config.hpp"
#include "sichainfl/consensus.hpp"

namespace sichainfl {

// Deterministic world built from the config seed; run_experiment and
// run_fedavg construct identical worlds so comparisons are paired.
struct World {
  LabeledDataset test_set;
  ScenarioSet scenarios;
  std::size_t val_pool_size = 0;
  std::vector<ClientProfile> clients;  // index == client id
  std::vector<Validator> validators;
  ModelParams initial_model;
  std::map<int, BehaviorKind> behaviors;
};

World build_world(const ExperimentConfig& cfg);

struct RoundMetrics {
  int round = 0;
  double accuracy = 0.0;
  double mae = 0.0;
  double auprc = 0.0;
  double update_norm = 0.0;
  double alpha_t = 0.0;
  double deviation = 0.0;
  double deviation_bound = 0.0;
  bool deviation_ok = true;
  bool weights_ok = true;      // w_i >= 0 and sum w_i <= 1
  bool norm_ok = true;         // ||Delta|| <= clip bound
  std::uint64_t eval_count = 0;
  std::uint64_t grouped_bound = 0;
  std::uint64_t naive_bound = 0;
  int participants = 0;
  int admitted = 0;
  bool aborted = false;
};

struct ShapleyRow {
  int round = 0;
  int client_id = 0;
  double eta = 0.0;
  double phi_hat = 0.0;
  double phi_accum = 0.0;
};

struct MetricsReport {
  std::vector<RoundMetrics> rounds;
  std::vector<ShapleyRow> shapley_rows;
  std::map<int, double> final_phi;       // EMA accumulator after the last round
  std::map<int, double> phi_round_sum;   // plain sum of per-round phi_hat
  std::map<int, double> phi_eq16;        // normalized time-decay re-weighting
  std::map<int, double> phi_eq26;        // geometric-sum re-weighting
  std::map<int, BehaviorKind> behaviors;
  Ledger ledger;
  double epsilon_total = 0.0;
  double delta_total = 0.0;
  double per_round_epsilon = 0.0;        // implied when configured by multiplier
  bool monitors_ok = true;

  double final_accuracy() const { return rounds.empty() ? 0.0 : rounds.back().accuracy; }
};

MetricsReport run_experiment(const ExperimentConfig& cfg);
MetricsReport run_fedavg(const ExperimentConfig& cfg);

// Writes metrics.csv, shapley.csv, ledger.ndjson and manifest.json.
void emit_report(const MetricsReport& report, const ExperimentConfig& cfg,
                 const std::filesystem::path& out_dir);

struct EvalCounters {
  std::uint64_t naive_bound = 0;
  std::uint64_t grouped_bound = 0;
  std::uint64_t actual = 0;
  bool within_bound() const { return actual <= grouped_bound; }
};

EvalCounters count_evaluations(const MetricsReport& report);

extern const char* kVersionString;

}  // namespace sichainfl
