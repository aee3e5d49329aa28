// Command-line front end: simulation runs, the FedAvg baseline, exact-vs-
// sampled Shapley comparison on a game file, ledger verification and
// evaluation-count reporting.
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "sichainfl/approx_shapley.hpp"
#include "sichainfl/harness.hpp"
#include "sichainfl/valuation.hpp"

namespace {

using namespace sichainfl;

struct RunFlags {
  std::string config_path;
  std::string out_dir = "out";
  std::int64_t seed = -1;
  std::string attack;
  double malicious_frac = -1.0;
};

ExperimentConfig load_with_overrides(const RunFlags& flags) {
  ExperimentConfig cfg = load_config_toml(flags.config_path);
  if (flags.seed >= 0) cfg.seed = static_cast<std::uint64_t>(flags.seed);
  if (!flags.attack.empty()) cfg.attack = attack_from_string(flags.attack);
  if (flags.malicious_frac >= 0.0) cfg.malicious_frac = flags.malicious_frac;
  cfg.validate();
  return cfg;
}

void print_summary(const MetricsReport& report, const std::string& label) {
  std::cout << label << ": rounds=" << report.rounds.size()
            << " final_accuracy=" << format_double(report.final_accuracy())
            << " final_mae="
            << format_double(report.rounds.empty() ? 0.0 : report.rounds.back().mae)
            << " ledger_length=" << report.ledger.size()
            << " monitors_ok=" << (report.monitors_ok ? "yes" : "no") << '\n';
  if (report.per_round_epsilon > 0.0) {
    std::cout << "  dp: per_round_epsilon=" << format_double(report.per_round_epsilon)
              << " epsilon_total=" << format_double(report.epsilon_total)
              << " delta_total=" << format_double(report.delta_total) << '\n';
  }
}

int cmd_run(const RunFlags& flags, bool fedavg) {
  const ExperimentConfig cfg = load_with_overrides(flags);
  const MetricsReport report = fedavg ? run_fedavg(cfg) : run_experiment(cfg);
  emit_report(report, cfg, flags.out_dir);
  print_summary(report, fedavg ? "fedavg" : "si-chainfl");
  std::cout << "wrote " << flags.out_dir << "/{metrics.csv,shapley.csv,ledger.ndjson,manifest.json}\n";
  return report.monitors_ok ? 0 : 1;
}

// Game file: {"players": N, "values": {"": v0, "0": v1, "0,2": v2, ...}}
// with subsets keyed by comma-joined ascending player indices. Missing
// subsets default to 0.
int cmd_shapley_oracle(const std::string& game_path, int players, int k_perm,
                       std::uint64_t seed) {
  std::ifstream in(game_path);
  if (!in) {
    std::cerr << "cannot open game file: " << game_path << '\n';
    return 2;
  }
  nlohmann::json j;
  in >> j;
  if (j.contains("players")) players = j.at("players").get<int>();
  if (players < 1 || players > 20) {
    std::cerr << "players must lie in [1, 20]\n";
    return 2;
  }
  std::map<std::string, double> values;
  for (const auto& [key, v] : j.at("values").items()) values[key] = v.get<double>();

  const auto value_fn = [&values](const std::vector<int>& subset) {
    std::ostringstream key;
    for (std::size_t i = 0; i < subset.size(); ++i) {
      if (i) key << ',';
      key << subset[i];
    }
    const auto it = values.find(key.str());
    return it == values.end() ? 0.0 : it->second;
  };

  std::vector<int> ids(players);
  for (int i = 0; i < players; ++i) ids[i] = i;
  const auto exact = exact_shapley(value_fn, ids);

  const auto mask_fn = [&](const std::vector<int>& unit_idx) {
    std::vector<int> subset(unit_idx.begin(), unit_idx.end());
    std::sort(subset.begin(), subset.end());
    return value_fn(subset);
  };
  const Vec approx = perm_shapley(static_cast<std::size_t>(players), mask_fn,
                                  k_perm, seed);

  std::cout << "player,exact,approx,abs_diff\n";
  double max_diff = 0.0;
  for (int i = 0; i < players; ++i) {
    const double diff = std::abs(exact.at(i) - approx[i]);
    max_diff = std::max(max_diff, diff);
    std::cout << i << ',' << format_double(exact.at(i)) << ','
              << format_double(approx[i]) << ',' << format_double(diff) << '\n';
  }
  std::cout << "max_abs_diff," << format_double(max_diff) << ",k_perm," << k_perm
            << '\n';
  return 0;
}

int cmd_verify_chain(const std::string& ledger_path) {
  try {
    const Ledger ledger = Ledger::load(ledger_path);
    ledger.verify();
    std::cout << "chain ok: " << ledger.size() << " blocks\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "chain verification failed: " << e.what() << '\n';
    return 1;
  }
}

int cmd_bench_evals(const RunFlags& flags) {
  const ExperimentConfig cfg = load_with_overrides(flags);
  const MetricsReport report = run_experiment(cfg);
  const EvalCounters counters = count_evaluations(report);
  std::cout << "actual_evaluations=" << counters.actual << '\n'
            << "grouped_bound=" << counters.grouped_bound << '\n'
            << "naive_bound=" << counters.naive_bound << '\n';
  if (counters.actual > 0) {
    std::cout << "naive_over_actual="
              << format_double(static_cast<double>(counters.naive_bound) /
                               static_cast<double>(counters.actual))
              << '\n';
  }
  std::cout << "within_bound=" << (counters.within_bound() ? "yes" : "no") << '\n';
  return counters.within_bound() && report.monitors_ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"SI-ChainFL simulator"};
  app.require_subcommand(1);

  RunFlags run_flags;
  auto add_run_flags = [&run_flags](CLI::App* cmd) {
    cmd->add_option("--config", run_flags.config_path, "TOML config path")->required();
    cmd->add_option("--seed", run_flags.seed, "override seed");
    cmd->add_option("--attack", run_flags.attack, "override attack: none|fr|pa");
    cmd->add_option("--malicious-frac", run_flags.malicious_frac,
                    "override malicious fraction");
    cmd->add_option("--out", run_flags.out_dir, "output directory");
  };

  CLI::App* run = app.add_subcommand("run", "run the SI-ChainFL pipeline");
  add_run_flags(run);
  CLI::App* baseline = app.add_subcommand("baseline", "run the FedAvg baseline");
  add_run_flags(baseline);

  std::string game_path;
  int players = 0;
  int k_perm = 200;
  std::uint64_t oracle_seed = 7;
  CLI::App* oracle =
      app.add_subcommand("shapley-oracle", "exact vs permutation-sampled Shapley");
  oracle->add_option("--game", game_path, "game JSON file")->required();
  oracle->add_option("--players", players, "player count (overridden by file)");
  oracle->add_option("--k-perm", k_perm, "sampled permutations");
  oracle->add_option("--seed", oracle_seed, "sampling seed");

  std::string ledger_path;
  CLI::App* verify = app.add_subcommand("verify-chain", "re-check a persisted ledger");
  verify->add_option("--ledger", ledger_path, "ledger.ndjson path")->required();

  CLI::App* bench =
      app.add_subcommand("bench-evals", "run and report evaluation counters");
  add_run_flags(bench);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) return cmd_run(run_flags, false);
    if (baseline->parsed()) return cmd_run(run_flags, true);
    if (oracle->parsed()) return cmd_shapley_oracle(game_path, players, k_perm, oracle_seed);
    if (verify->parsed()) return cmd_verify_chain(ledger_path);
    if (bench->parsed()) return cmd_bench_evals(run_flags);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
