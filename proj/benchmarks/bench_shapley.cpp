// Shapley machinery: exact subset enumeration vs the grouped permutation
// estimator, and a full round of the approximation pipeline.
#include <benchmark/benchmark.h>

#include <map>

#include "sichainfl/approx_shapley.hpp"
#include "sichainfl/datagen.hpp"
#include "sichainfl/valuation.hpp"

using namespace sichainfl;

namespace {

struct RoundFixture {
  ModelParams base = ModelParams::zeros(Arch::logistic, 6);
  ScenarioSet stratified;
  std::map<int, UpdateDelta> uploads;

  explicit RoundFixture(int n_clients) {
    const LabeledDataset pool = gen_rare_event_dataset(2000, 6, 0.2, 0.5, 7);
    stratified = stratify_validation(build_scenarios(pool, 4, {}, 8), 3.0, 9);
    const auto shards = dirichlet_partition(pool, n_clients, 5.0, 0.3, 10);
    for (int id = 0; id < n_clients; ++id) {
      UpdateDelta d = local_train(base, shards[id], 0.2, 2, 11 + id);
      d.client_id = id;
      uploads[id] = clip_update(d, 1.0);
    }
  }
};

void BM_ExactShapley(benchmark::State& state) {
  const int n = static_cast<int>(state.range(0));
  Rng rng(3);
  std::vector<double> table(std::size_t{1} << n);
  for (auto& v : table) v = rng.uniform();
  const auto value = [&table, n](const std::vector<int>& s) {
    std::size_t mask = 0;
    for (int id : s) mask |= std::size_t{1} << id;
    return table[mask];
  };
  std::vector<int> players(n);
  std::iota(players.begin(), players.end(), 0);
  for (auto _ : state) {
    benchmark::DoNotOptimize(exact_shapley(value, players));
  }
}
BENCHMARK(BM_ExactShapley)->Arg(8)->Arg(12)->Arg(16);

void BM_GroupedRoundShapley(benchmark::State& state) {
  const int n_clients = static_cast<int>(state.range(0));
  RoundFixture fx(n_clients);
  ApproxConfig cfg;
  cfg.k_top = 5;
  cfg.m_hard = 20;
  cfg.h_crit = 20;
  cfg.k_perm = 50;
  std::uint64_t evals = 0;
  for (auto _ : state) {
    const RoundShapleyResult rs =
        round_shapley(fx.base, fx.uploads, fx.stratified, cfg, 21);
    evals = rs.eval_count;
    benchmark::DoNotOptimize(rs.phi_hat);
  }
  state.counters["score_evals"] = static_cast<double>(evals);
}
BENCHMARK(BM_GroupedRoundShapley)->Arg(20)->Arg(50)->Arg(100);

void BM_UngroupedRoundShapley(benchmark::State& state) {
  const int n_clients = static_cast<int>(state.range(0));
  RoundFixture fx(n_clients);
  ApproxConfig cfg;
  cfg.k_top = n_clients;  // merging disabled
  cfg.m_hard = 20;
  cfg.h_crit = 20;
  cfg.k_perm = 50;
  std::uint64_t evals = 0;
  for (auto _ : state) {
    const RoundShapleyResult rs =
        round_shapley(fx.base, fx.uploads, fx.stratified, cfg, 21);
    evals = rs.eval_count;
    benchmark::DoNotOptimize(rs.phi_hat);
  }
  state.counters["score_evals"] = static_cast<double>(evals);
}
BENCHMARK(BM_UngroupedRoundShapley)->Arg(20)->Arg(50);

}  // namespace
