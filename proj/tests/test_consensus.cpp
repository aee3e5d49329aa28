#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "oracles.hpp"
#include "sichainfl/consensus.hpp"
#include "sichainfl/datagen.hpp"

using namespace sichainfl;

namespace {

Validator make_validator(int id, double stake, bool byzantine, std::uint64_t seed) {
  Validator v;
  v.id = id;
  v.stake = stake;
  v.byzantine = byzantine;
  v.shard = gen_rare_event_dataset(60, 2, 0.3, 0.4, seed);
  return v;
}

UpdateDelta delta_of(Vec v, bool clipped = true) {
  UpdateDelta d;
  d.delta = std::move(v);
  d.clipped = clipped;
  return d;
}

}  // namespace

TEST_CASE("validator_vote") {
  const Validator honest = make_validator(0, 1.0, false, 7);
  const Validator byz = make_validator(1, 1.0, true, 7);
  const ModelParams base = ModelParams::zeros(Arch::logistic, 2);
  const UpdateDelta zero = delta_of({0.0, 0.0, 0.0});
  SUBCASE("zero update passes the honest rule") {
    CHECK(validator_vote(honest, zero, base, 1.0, 0.01) == 1);
  }
  SUBCASE("norm violation fails the honest rule") {
    CHECK(validator_vote(honest, delta_of({2.0, 0.0, 0.0}), base, 1.0, 0.01) == 0);
  }
  SUBCASE("byzantine validators negate the honest rule") {
    CHECK(validator_vote(byz, zero, base, 1.0, 0.01) == 0);
  }
  SUBCASE("loss-degrading update within the norm bound fails the honest rule") {
    // Train a model on the shard, then vote on its negation.
    UpdateDelta good = local_train(base, honest.shard, 0.5, 5, 8);
    good = clip_update(good, 1.0);
    UpdateDelta bad = good;
    for (double& x : bad.delta) x = -x;
    CHECK(validator_vote(honest, good, base, 1.0, 0.01) == 1);
    CHECK(validator_vote(honest, bad, base, 1.0, 0.01) == 0);
  }
}

TEST_CASE("weighted_votes") {
  std::map<int, double> stakes = {{0, 2.0}, {1, 1.0}};
  SUBCASE("all bits zero give zero weight") {
    const auto w = weighted_votes({{5, {{0, 0}, {1, 0}}}}, stakes, {{5, 3.0}},
                                  ConsensusConfig::Psi::identity);
    CHECK(w.at(5) == 0.0);
  }
  SUBCASE("non-positive scores zero out the vote under identity psi") {
    const auto w = weighted_votes({{5, {{0, 1}, {1, 1}}}}, stakes, {{5, -2.0}},
                                  ConsensusConfig::Psi::identity);
    CHECK(w.at(5) == 0.0);
  }
  SUBCASE("stake arithmetic: stakes (2,1), both approve, psi value 2") {
    const auto w = weighted_votes({{5, {{0, 1}, {1, 1}}}}, stakes, {{5, 2.0}},
                                  ConsensusConfig::Psi::identity);
    CHECK(w.at(5) == doctest::Approx(6.0).epsilon(1e-12));
  }
}

TEST_CASE("admission") {
  SUBCASE("exact threshold is admitted (>=)") {
    const auto a = admission({{3, 0.5}}, 1.0, 0.5);
    CHECK(a == std::vector<int>{3});
  }
  SUBCASE("any positive weight passes an arbitrarily small zeta") {
    const auto a = admission({{3, 1e-9}}, 1.0, 1e-12);
    CHECK(a == std::vector<int>{3});
  }
  SUBCASE("zero weight is excluded") {
    const auto a = admission({{3, 0.0}}, 1.0, 0.5);
    CHECK(a.empty());
  }
  SUBCASE("result is ordered by ascending client id") {
    const auto a = admission({{9, 1.0}, {2, 1.0}, {5, 1.0}}, 1.0, 0.1);
    CHECK(a == std::vector<int>{2, 5, 9});
  }
}

TEST_CASE("block_digest") {
  const Vec u1 = {0.25, -1.5};
  const Vec u2 = {0.0, 3.25};
  SUBCASE("identical inputs give identical digests") {
    CHECK(block_digest(3, {1, 2}, {&u1, &u2}) == block_digest(3, {1, 2}, {&u1, &u2}));
  }
  SUBCASE("flipping one low-order bit of one coordinate changes the digest") {
    Vec tweaked = u1;
    std::uint64_t bits;
    std::memcpy(&bits, &tweaked[0], sizeof(bits));
    bits ^= 1ULL;
    std::memcpy(&tweaked[0], &bits, sizeof(bits));
    CHECK(block_digest(3, {1, 2}, {&u1, &u2}) != block_digest(3, {1, 2}, {&tweaked, &u2}));
  }
  SUBCASE("empty serialization equals reference SHA-256 of the round encoding") {
    const std::uint64_t round = 0x0102030405060708ULL;
    std::vector<std::uint8_t> encoded;
    for (int shift = 56; shift >= 0; shift -= 8)
      encoded.push_back(static_cast<std::uint8_t>((round >> shift) & 0xff));
    const auto expected = oracles::ref_sha256(encoded);
    const Hash32 got = block_digest(round, {}, {});
    CHECK(std::equal(got.begin(), got.end(), expected.begin()));
  }
}

TEST_CASE("threshold signatures") {
  ConsensusConfig cfg;
  SUBCASE("all honest validators sign for any tau <= 1") {
    std::vector<Validator> vals;
    for (int i = 0; i < 4; ++i) vals.push_back(make_validator(i, 1.0, false, 10 + i));
    const Committee committee(vals, 42, cfg);
    const Hash32 msg = sha256_bytes({1, 2, 3});
    const auto sig = threshold_sign(committee, msg, 1.0);
    REQUIRE(sig.has_value());
    CHECK(threshold_verify(committee, msg, *sig, 1.0));
    SUBCASE("a tampered tag fails verification") {
      ThresholdSignature bad = *sig;
      bad.signer_tags[0].second[0] ^= 0xff;
      CHECK_FALSE(threshold_verify(committee, msg, bad, 1.0));
    }
  }
  SUBCASE("fully byzantine committee refuses to sign") {
    cfg.allow_byzantine_excess = true;
    std::vector<Validator> vals;
    for (int i = 0; i < 3; ++i) vals.push_back(make_validator(i, 1.0, true, 20 + i));
    const Committee committee(vals, 42, cfg);
    CHECK_FALSE(threshold_sign(committee, sha256_bytes({9}), 0.5).has_value());
  }
  SUBCASE("honest stake 0.6 misses a 2/3 threshold") {
    cfg.allow_byzantine_excess = true;
    std::vector<Validator> vals;
    for (int i = 0; i < 3; ++i) vals.push_back(make_validator(i, 1.0, false, 30 + i));
    for (int i = 3; i < 5; ++i) vals.push_back(make_validator(i, 1.0, true, 30 + i));
    const Committee committee(vals, 42, cfg);
    CHECK_FALSE(threshold_sign(committee, sha256_bytes({9}), 2.0 / 3.0).has_value());
  }
}

TEST_CASE("committee enforces the byzantine stake bound") {
  ConsensusConfig cfg;  // slack 0.01
  std::vector<Validator> vals;
  for (int i = 0; i < 2; ++i) vals.push_back(make_validator(i, 1.0, false, 40 + i));
  vals.push_back(make_validator(2, 1.0, true, 45));  // share 1/3 > 1/3 - xi
  CHECK_THROWS(Committee(vals, 1, cfg));
  cfg.allow_byzantine_excess = true;
  CHECK_NOTHROW(Committee(vals, 1, cfg));
}

TEST_CASE("shapley_aggregate") {
  std::map<int, UpdateDelta> updates;
  updates[1] = delta_of({0.3, 0.4});
  updates[2] = delta_of({-0.3, 0.4});
  SUBCASE("single client with positive score and eps = 0 passes through clipped") {
    const auto out = shapley_aggregate({1}, updates, {{1, 0.8}},
                                       ConsensusConfig::Psi::identity, 0.0, 1.0, 2);
    CHECK(out.delta == updates[1].delta);
    CHECK(out.weights.at(1) == doctest::Approx(1.0));
  }
  SUBCASE("equal scores average the clipped updates") {
    const auto out = shapley_aggregate({1, 2}, updates, {{1, 0.5}, {2, 0.5}},
                                       ConsensusConfig::Psi::identity, 0.0, 1.0, 2);
    CHECK(out.delta[0] == doctest::Approx(0.0).epsilon(1e-12));
    CHECK(out.delta[1] == doctest::Approx(0.4).epsilon(1e-12));
  }
  SUBCASE("empty admitted set gives the zero vector") {
    const auto out = shapley_aggregate({}, updates, {}, ConsensusConfig::Psi::identity,
                                       1e-8, 1.0, 2);
    CHECK(out.delta == Vec{0.0, 0.0});
  }
  SUBCASE("weights are non-negative and sum to at most 1") {
    Rng rng(12);
    for (int trial = 0; trial < 200; ++trial) {
      std::map<int, UpdateDelta> ups;
      std::map<int, double> phi;
      std::vector<int> admitted;
      const int n = 1 + static_cast<int>(rng.uniform_int(0, 6));
      for (int i = 0; i < n; ++i) {
        ups[i] = delta_of({rng.normal(), rng.normal()});
        phi[i] = rng.normal(0.2, 1.0);  // may be negative
        admitted.push_back(i);
      }
      const auto out = shapley_aggregate(admitted, ups, phi,
                                         ConsensusConfig::Psi::identity, 1e-8, 1.0, 2);
      double sum = 0.0;
      for (const auto& [id, w] : out.weights) {
        CHECK(w >= 0.0);
        sum += w;
      }
      CHECK(sum <= 1.0 + 1e-12);
      CHECK(l2_norm(out.delta) <= 1.0 + 1e-9);  // aggregate stays inside the clip ball
    }
  }
}

TEST_CASE("ledger") {
  const auto make_block = [](std::uint64_t round, const Hash32& prev) {
    Block b;
    b.round = round;
    b.admitted = {1, 4};
    b.updates = {{0.1 * (round + 1), -0.2}, {0.3, 0.4}};
    std::vector<const Vec*> ups = {&b.updates[0], &b.updates[1]};
    b.msg_digest = block_digest(round, b.admitted, ups);
    b.prev_hash = prev;
    b.model_hash = sha256_bytes({static_cast<std::uint8_t>(round)});
    b.block_hash = b.compute_hash();
    return b;
  };

  SUBCASE("genesis append requires the all-zero previous hash") {
    Ledger ledger;
    ledger.append(make_block(0, Hash32{}));
    CHECK(ledger.size() == 1);
    Ledger bad;
    Hash32 nz{};
    nz[0] = 1;
    CHECK_THROWS(bad.append(make_block(0, nz)));
  }
  SUBCASE("two linked appends verify") {
    Ledger ledger;
    ledger.append(make_block(0, Hash32{}));
    ledger.append(make_block(1, ledger.blocks().back().block_hash));
    CHECK_NOTHROW(ledger.verify());
    CHECK(ledger.size() == 2);
  }
  SUBCASE("tampering a stored update is detected on re-verification") {
    Ledger ledger;
    ledger.append(make_block(0, Hash32{}));
    const auto dir = std::filesystem::temp_directory_path() / "sichainfl_ledger_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "ledger.ndjson";
    ledger.save(path);
    // Corrupt one hex digit of the first update in place.
    std::ifstream in(path);
    std::string text((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());
    in.close();
    const auto pos = text.find("\"updates\":[\"");
    REQUIRE(pos != std::string::npos);
    text[pos + 12] = text[pos + 12] == '0' ? '1' : '0';
    std::ofstream out(path);
    out << text;
    out.close();
    const Ledger loaded = Ledger::load(path);
    CHECK_THROWS(loaded.verify());
    std::filesystem::remove_all(dir);
  }
  SUBCASE("save/load round trip verifies") {
    Ledger ledger;
    ledger.append(make_block(0, Hash32{}));
    ledger.append(make_block(1, ledger.blocks().back().block_hash));
    const auto dir = std::filesystem::temp_directory_path() / "sichainfl_ledger_rt";
    std::filesystem::create_directories(dir);
    ledger.save(dir / "ledger.ndjson");
    const Ledger loaded = Ledger::load(dir / "ledger.ndjson");
    CHECK(loaded.size() == 2);
    CHECK_NOTHROW(loaded.verify());
    std::filesystem::remove_all(dir);
  }
}

TEST_CASE("deviation_report") {
  SUBCASE("no malicious weight means zero deviation and a zero bound") {
    const auto rep = deviation_report({0.1, 0.2}, {0.1, 0.2}, 0.0, 1.0);
    CHECK(rep.measured == 0.0);
    CHECK(rep.bound == 0.0);
    CHECK(rep.ok);
  }
  SUBCASE("bound arithmetic: weight 0.2 at C = 1") {
    const auto rep = deviation_report({0.0, 0.0}, {0.0, 0.0}, 0.2, 1.0);
    CHECK(rep.bound == doctest::Approx(0.2));
  }
  SUBCASE("Monte Carlo: removing malicious mass never exceeds alpha*C") {
    // The honest aggregate drops the malicious contributions entirely.
    Rng rng(77);
    for (int trial = 0; trial < 1000; ++trial) {
      const int n = 1 + static_cast<int>(rng.uniform_int(0, 7));
      Vec actual(3, 0.0), honest(3, 0.0);
      double alpha = 0.0, wsum = 0.0;
      for (int i = 0; i < n; ++i) {
        Vec u = {rng.normal(), rng.normal(), rng.normal()};
        const double norm = l2_norm(u);
        if (norm > 1.0)
          for (double& x : u) x /= norm;  // clip to C = 1
        double w = rng.uniform(0.0, 1.0 - wsum);
        wsum += w;
        const bool malicious = rng.uniform() < 0.4;
        axpy(w, u, actual);
        if (!malicious)
          axpy(w, u, honest);
        else
          alpha += w;
      }
      const auto rep = deviation_report(actual, honest, alpha, 1.0);
      CHECK(rep.ok);
    }
  }
}
