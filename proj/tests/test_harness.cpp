#include <filesystem>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "doctest.h"
#include "sichainfl/adversary.hpp"
#include "sichainfl/harness.hpp"

using namespace sichainfl;

namespace {

// Small fast configuration shared by the harness tests.
ExperimentConfig tiny_config() {
  ExperimentConfig cfg;
  cfg.seed = 42;
  cfg.rounds = 3;
  cfg.n_clients = 6;
  cfg.participation_frac = 1.0;
  cfg.malicious_frac = 0.0;
  cfg.validator_count = 3;
  cfg.data.n_samples = 800;
  cfg.data.n_features = 4;
  cfg.data.scenario_count = 2;
  cfg.data.dirichlet_alpha = 5.0;
  cfg.data.lognormal_sigma = 0.2;
  cfg.train.lr = 0.2;
  cfg.train.local_epochs = 2;
  cfg.dp.noise_multiplier = 0.0;
  cfg.approx.m_hard = 5;
  cfg.approx.h_crit = 5;
  cfg.approx.k_perm = 10;
  cfg.consensus.zeta = 1e-4;
  return cfg;
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("toml config parsing") {
  SUBCASE("full document with sections") {
    const std::string text = R"(
# experiment
seed = 7
rounds = 12
n_clients = 10
attack = "pa"
malicious_frac = 0.5

[data]
n_samples = 1200
positive_rate = 0.25
scenario_count = 2

[dp]
noise_multiplier = 0.0

[consensus]
psi = "softplus"
allow_byzantine_excess = true

[valuation]
beta_r = [0.25, 0.75]
)";
    ExperimentConfig cfg = parse_config_toml(text);
    CHECK(cfg.seed == 7);
    CHECK(cfg.rounds == 12);
    CHECK(cfg.attack == AttackKind::pa);
    CHECK(cfg.malicious_frac == 0.5);
    CHECK(cfg.data.n_samples == 1200);
    CHECK(cfg.dp.noise_multiplier == 0.0);
    CHECK(cfg.consensus.psi == ConsensusConfig::Psi::softplus);
    CHECK(cfg.consensus.allow_byzantine_excess);
    CHECK(cfg.valuation.beta_r == Vec{0.25, 0.75});
  }
  SUBCASE("unknown keys are hard errors") {
    CHECK_THROWS_WITH_AS(parse_config_toml("surprise = 1\n"),
                         "config: unknown key 'surprise'", std::runtime_error);
    CHECK_THROWS(parse_config_toml("[data]\nn_sample = 5\n"));
    CHECK_THROWS(parse_config_toml("[datenbank]\nx = 1\n"));
  }
  SUBCASE("type errors are hard errors") {
    CHECK_THROWS(parse_config_toml("rounds = \"ten\"\n"));
    CHECK_THROWS(parse_config_toml("rounds = 1.5\n"));
  }
  SUBCASE("beta_r must match the scenario count") {
    ExperimentConfig cfg = tiny_config();
    cfg.valuation.beta_r = {0.5, 0.5, 0.0};  // scenario_count is 2
    CHECK_THROWS(run_experiment(cfg));
  }
}

TEST_CASE("config JSON round trip") {
  ExperimentConfig cfg = tiny_config();
  cfg.attack = AttackKind::fr;
  cfg.malicious_frac = 0.3;
  cfg.valuation.beta_r = {0.25, 0.75};
  const std::string json = config_to_json_string(cfg);
  const ExperimentConfig back = config_from_json_string(json);
  CHECK(config_to_json_string(back) == json);
}

TEST_CASE("paired-seed discipline: identical worlds for a given seed") {
  const ExperimentConfig cfg = tiny_config();
  const World a = build_world(cfg);
  const World b = build_world(cfg);
  REQUIRE(a.clients.size() == b.clients.size());
  for (std::size_t i = 0; i < a.clients.size(); ++i) {
    CHECK(a.clients[i].kind == b.clients[i].kind);
    CHECK(a.clients[i].data.features == b.clients[i].data.features);
    CHECK(a.clients[i].data.labels == b.clients[i].data.labels);
  }
  CHECK(a.test_set.features == b.test_set.features);
  CHECK(a.behaviors == b.behaviors);
}

TEST_CASE("single-client fedavg aggregate equals that client's own update") {
  ExperimentConfig cfg = tiny_config();
  cfg.n_clients = 1;
  cfg.rounds = 1;
  const World w = build_world(cfg);
  // Reproduce the round-0 upload with the harness seed discipline: FedAvg
  // trains without clipping or noise.
  DpConfig raw = cfg.dp;
  raw.noise_multiplier = 0.0;
  raw.clip_bound = 1e30;
  const TrainParams tp{cfg.train.lr, cfg.train.local_epochs, cfg.train.batch_size};
  const UpdateDelta expected = behave(w.clients[0], w.initial_model, 0, {}, tp, raw,
                                      cfg.seed);
  const MetricsReport report = run_fedavg(cfg);
  REQUIRE(report.rounds.size() == 1);
  CHECK(report.rounds[0].update_norm ==
        doctest::Approx(l2_norm(expected.delta)).epsilon(1e-12));
}

TEST_CASE("run_experiment basics") {
  const ExperimentConfig cfg = tiny_config();
  const MetricsReport report = run_experiment(cfg);
  SUBCASE("one metrics row per round and a block per non-aborted round") {
    CHECK(report.rounds.size() == static_cast<std::size_t>(cfg.rounds));
    std::size_t aborted = 0;
    for (const auto& r : report.rounds) aborted += r.aborted ? 1 : 0;
    CHECK(report.ledger.size() == cfg.rounds - aborted);
    CHECK_NOTHROW(report.ledger.verify());
  }
  SUBCASE("monitors hold on an attack-free run") {
    CHECK(report.monitors_ok);
    for (const auto& r : report.rounds) {
      CHECK(r.deviation_ok);
      CHECK(r.weights_ok);
      CHECK(r.norm_ok);
      CHECK(r.eval_count <= r.grouped_bound);
    }
  }
  SUBCASE("accuracy improves over the zero-initialized model") {
    CHECK(report.rounds.back().accuracy > 0.6);
  }
  SUBCASE("DP is not spent when noise is disabled") {
    CHECK(report.epsilon_total == 0.0);
    CHECK(report.delta_total == 0.0);
  }
}

TEST_CASE("pipeline variants run clean") {
  SUBCASE("mlp arch") {
    ExperimentConfig cfg = tiny_config();
    cfg.rounds = 2;
    cfg.train.arch = Arch::mlp;
    cfg.train.mlp_hidden = 4;
    const MetricsReport rep = run_experiment(cfg);
    CHECK(rep.monitors_ok);
    CHECK(rep.rounds.size() == 2);
  }
  SUBCASE("softplus psi keeps the weight bounds") {
    ExperimentConfig cfg = tiny_config();
    cfg.rounds = 2;
    cfg.consensus.psi = ConsensusConfig::Psi::softplus;
    const MetricsReport rep = run_experiment(cfg);
    CHECK(rep.monitors_ok);
  }
  SUBCASE("additive coalition evaluation mode is accepted") {
    ExperimentConfig cfg = tiny_config();
    cfg.rounds = 2;
    cfg.valuation.eval_mode = ValuationConfig::EvalMode::additive;
    CHECK(run_experiment(cfg).monitors_ok);
  }
}

TEST_CASE("dp accounting is reported when noise is on") {
  ExperimentConfig cfg = tiny_config();
  cfg.rounds = 2;
  cfg.dp.noise_multiplier = 2.0;
  // dp noise makes validator norms overshoot; runs still complete.
  const MetricsReport report = run_experiment(cfg);
  CHECK(report.per_round_epsilon > 0.0);
  // Every client participates in both rounds: totals are 2x the per-round
  // budget under sequential composition, identical across clients.
  CHECK(report.epsilon_total ==
        doctest::Approx(2.0 * report.per_round_epsilon).epsilon(1e-12));
  CHECK(report.delta_total == doctest::Approx(2.0 * cfg.dp.delta_dp).epsilon(1e-12));
}

TEST_CASE("emit_report round trip") {
  const ExperimentConfig cfg = tiny_config();
  const MetricsReport report = run_experiment(cfg);
  const auto dir = std::filesystem::temp_directory_path() / "sichainfl_emit_test";
  std::filesystem::remove_all(dir);
  emit_report(report, cfg, dir);

  SUBCASE("metrics.csv has one row per round") {
    std::ifstream in(dir / "metrics.csv");
    std::string line;
    int rows = -1;  // header
    while (std::getline(in, line))
      if (!line.empty()) ++rows;
    CHECK(rows == cfg.rounds);
  }
  SUBCASE("manifest reloads to an identical config") {
    std::ifstream in(dir / "manifest.json");
    std::stringstream ss;
    ss << in.rdbuf();
    const auto manifest = nlohmann::json::parse(ss.str());
    const ExperimentConfig back =
        config_from_json_string(manifest.at("config").dump());
    CHECK(config_to_json_string(back) == config_to_json_string(cfg));
  }
  SUBCASE("shapley.csv per-client sums match the in-memory round sums") {
    std::ifstream in(dir / "shapley.csv");
    std::string line;
    std::getline(in, line);  // header
    std::map<int, double> sums;
    while (std::getline(in, line)) {
      std::stringstream ss(line);
      std::string cell;
      std::vector<std::string> cells;
      while (std::getline(ss, cell, ',')) cells.push_back(cell);
      REQUIRE(cells.size() == 5);
      sums[std::stoi(cells[1])] += std::stod(cells[3]);
    }
    for (const auto& [id, total] : report.phi_round_sum)
      CHECK(std::abs(sums[id] - total) < 1e-9);
  }
  std::filesystem::remove_all(dir);
}

TEST_CASE("byte-identical outputs across two identical runs") {
  const ExperimentConfig cfg = tiny_config();
  const auto dir_a = std::filesystem::temp_directory_path() / "sichainfl_det_a";
  const auto dir_b = std::filesystem::temp_directory_path() / "sichainfl_det_b";
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
  emit_report(run_experiment(cfg), cfg, dir_a);
  emit_report(run_experiment(cfg), cfg, dir_b);
  for (const char* name : {"metrics.csv", "shapley.csv", "ledger.ndjson"})
    CHECK(slurp(dir_a / name) == slurp(dir_b / name));
  std::filesystem::remove_all(dir_a);
  std::filesystem::remove_all(dir_b);
}

TEST_CASE("count_evaluations sums the per-round counters") {
  const ExperimentConfig cfg = tiny_config();
  const MetricsReport report = run_experiment(cfg);
  const EvalCounters c = count_evaluations(report);
  std::uint64_t actual = 0, grouped = 0, naive = 0;
  for (const auto& r : report.rounds) {
    actual += r.eval_count;
    grouped += r.grouped_bound;
    naive += r.naive_bound;
  }
  CHECK(c.actual == actual);
  CHECK(c.grouped_bound == grouped);
  CHECK(c.naive_bound == naive);
  CHECK(c.within_bound());
}

namespace {

// Desk-scale configuration mirroring configs/desk.toml.
ExperimentConfig desk_config() {
  ExperimentConfig cfg;
  cfg.seed = 42;
  cfg.rounds = 30;
  cfg.n_clients = 20;
  cfg.participation_frac = 0.7;
  cfg.validator_count = 10;
  cfg.data.n_samples = 2500;
  cfg.data.n_features = 8;
  cfg.data.dirichlet_alpha = 1.0;
  cfg.data.lognormal_sigma = 0.3;
  cfg.data.scenario_count = 2;
  cfg.train.lr = 0.25;
  cfg.train.batch_size = 16;
  cfg.dp.noise_multiplier = 0.0;
  cfg.approx.m_hard = 10;
  cfg.approx.h_crit = 10;
  cfg.approx.delta_q = 0.1;
  cfg.approx.k_perm = 30;
  cfg.consensus.zeta = 0.0005;
  return cfg;
}

}  // namespace

TEST_CASE("attack-free run clears 95% and stays under the centralized ceiling") {
  const ExperimentConfig cfg = desk_config();
  const World w = build_world(cfg);
  // Centralized oracle: train one model on the pooled client data.
  LabeledDataset pooled;
  for (const auto& c : w.clients) {
    pooled.features.insert(pooled.features.end(), c.data.features.begin(),
                           c.data.features.end());
    pooled.labels.insert(pooled.labels.end(), c.data.labels.begin(),
                         c.data.labels.end());
  }
  ModelParams central = w.initial_model;
  const UpdateDelta d = local_train(central, pooled, 0.25, 30, 4242, 32);
  for (std::size_t j = 0; j < d.delta.size(); ++j) central.weights[j] += d.delta[j];
  std::size_t correct = 0;
  for (std::size_t i = 0; i < w.test_set.size(); ++i) {
    const int pred = predict_proba(central, w.test_set.features[i]) >= 0.5 ? 1 : 0;
    if (pred == w.test_set.labels[i]) ++correct;
  }
  const double ceiling = static_cast<double>(correct) / w.test_set.size();

  const MetricsReport rep = run_experiment(cfg);
  CHECK(ceiling >= 0.95);  // the task is learnable at all
  CHECK(rep.final_accuracy() >= 0.95);
  CHECK(rep.final_accuracy() <= ceiling + 0.03);
}

TEST_CASE("attack-free FedAvg and SI-ChainFL land within 3 points") {
  const ExperimentConfig cfg = desk_config();
  const double si = run_experiment(cfg).final_accuracy();
  const double fedavg = run_fedavg(cfg).final_accuracy();
  CHECK(std::abs(si - fedavg) <= 0.03);
}

TEST_CASE("poisoning at 50% leaves SI-ChainFL ahead of FedAvg on paired seeds") {
  ExperimentConfig cfg = desk_config();
  cfg.attack = AttackKind::pa;
  cfg.malicious_frac = 0.5;
  const double si = run_experiment(cfg).final_accuracy();
  const double fedavg = run_fedavg(cfg).final_accuracy();
  CHECK(si > fedavg);
}

TEST_CASE("complexity bound formulas at the documented operating point") {
  // 50 permutations, 6 game units, 4 scenarios, M = H = 20 per scenario,
  // against 100 participants scored on a 4000-sample validation pool.
  const std::uint64_t grouped = 50ULL * 6 * 4 * (20 + 20);
  const std::uint64_t naive = 50ULL * 100 * 4000;
  CHECK(grouped == 48000);
  CHECK(naive == 20000000);
  CHECK(naive / grouped >= 100);
}
