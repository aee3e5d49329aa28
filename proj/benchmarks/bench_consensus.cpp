// Digesting, signing and chain verification throughput.
#include <benchmark/benchmark.h>

#include "sichainfl/consensus.hpp"
#include "sichainfl/datagen.hpp"

using namespace sichainfl;

namespace {

Block make_block(std::uint64_t round, const Hash32& prev, int dim) {
  Block b;
  b.round = round;
  b.admitted = {1, 2, 3};
  Rng rng(round + 100);
  for (int i = 0; i < 3; ++i) {
    Vec u(dim);
    for (double& x : u) x = rng.normal();
    b.updates.push_back(std::move(u));
  }
  std::vector<const Vec*> ups;
  for (const auto& u : b.updates) ups.push_back(&u);
  b.msg_digest = block_digest(round, b.admitted, ups);
  b.prev_hash = prev;
  b.model_hash = sha256_bytes({static_cast<std::uint8_t>(round & 0xff)});
  b.block_hash = b.compute_hash();
  return b;
}

void BM_BlockDigest(benchmark::State& state) {
  const int dim = static_cast<int>(state.range(0));
  Rng rng(5);
  std::vector<Vec> updates(8, Vec(dim));
  for (auto& u : updates)
    for (double& x : u) x = rng.normal();
  std::vector<const Vec*> ups;
  for (const auto& u : updates) ups.push_back(&u);
  std::vector<int> admitted = {0, 1, 2, 3, 4, 5, 6, 7};
  for (auto _ : state) {
    benchmark::DoNotOptimize(block_digest(1, admitted, ups));
  }
}
BENCHMARK(BM_BlockDigest)->Arg(16)->Arg(1024);

void BM_LedgerVerify(benchmark::State& state) {
  const int blocks = static_cast<int>(state.range(0));
  Ledger ledger;
  Hash32 prev{};
  for (int i = 0; i < blocks; ++i) {
    Block b = make_block(static_cast<std::uint64_t>(i), prev, 32);
    prev = b.block_hash;
    ledger.append(std::move(b));
  }
  for (auto _ : state) {
    ledger.verify();
  }
}
BENCHMARK(BM_LedgerVerify)->Arg(10)->Arg(100);

void BM_ThresholdSign(benchmark::State& state) {
  ConsensusConfig cfg;
  std::vector<Validator> vals;
  for (int i = 0; i < 10; ++i) {
    Validator v;
    v.id = i;
    v.stake = 1.0;
    v.shard = gen_rare_event_dataset(40, 2, 0.3, 0.4, 60 + i);
    vals.push_back(std::move(v));
  }
  const Committee committee(vals, 99, cfg);
  const Hash32 msg = sha256_bytes({1, 2, 3, 4});
  for (auto _ : state) {
    benchmark::DoNotOptimize(threshold_sign(committee, msg, 2.0 / 3.0));
  }
}
BENCHMARK(BM_ThresholdSign);

}  // namespace
