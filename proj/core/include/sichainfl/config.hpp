// Experiment configuration: a strict TOML-style document (unknown keys are
// hard errors) and a JSON form used by the run manifest.
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "sichainfl/approx_shapley.hpp"
#include "sichainfl/consensus.hpp"
#include "sichainfl/model.hpp"
#include "sichainfl/valuation.hpp"

namespace sichainfl {

struct DataSpec {
  int n_samples = 4000;
  int n_features = 8;
  double positive_rate = 0.2;
  double cluster_noise = 0.3;
  double dirichlet_alpha = 0.5;
  double lognormal_sigma = 0.5;
  int scenario_count = 4;
  double val_fraction = 0.25;            // share of the master set for scenarios
  double test_fraction = 0.2;            // held-out metrics split
  double validator_pool_fraction = 0.1;  // held-out validator shards

  void validate() const;
};

struct TrainSpec {
  double lr = 0.01;
  int local_epochs = 5;
  int batch_size = 32;
  Arch arch = Arch::logistic;
  int mlp_hidden = 8;
  double eta_server = 1.0;

  void validate() const;
};

enum class AttackKind { none, fr, pa };

const char* to_string(AttackKind a);
AttackKind attack_from_string(const std::string& s);

struct ExperimentConfig {
  std::uint64_t seed = 42;
  int rounds = 30;
  int n_clients = 20;
  double participation_frac = 0.7;
  double malicious_frac = 0.1;
  AttackKind attack = AttackKind::none;
  int validator_count = 10;
  int byzantine_validators = 0;
  double honest_low_frac = 0.2;
  double flip_frac = 1.0;

  DataSpec data;
  TrainSpec train;
  DpConfig dp;
  ValuationConfig valuation;
  ApproxConfig approx;
  ConsensusConfig consensus;

  void validate() const;
};

// Parses the documented key/value schema; any unknown section or key, any
// type mismatch, and any malformed line is a hard error.
ExperimentConfig load_config_toml(const std::filesystem::path& path);
ExperimentConfig parse_config_toml(const std::string& text);

std::string config_to_json_string(const ExperimentConfig& cfg);
ExperimentConfig config_from_json_string(const std::string& json_text);

}  // namespace sichainfl
