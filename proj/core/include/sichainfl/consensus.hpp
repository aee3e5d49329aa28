// Simulated validator committee: per-update voting, stake- and Shapley-
// weighted admission, block digests, simulation-grade threshold signatures
// (keyed tags, NOT cryptographically secure), Shapley-weighted clipped
// aggregation and a hash-chained ledger.
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <vector>

#include "sichainfl/dataset.hpp"
#include "sichainfl/model.hpp"

namespace sichainfl {

using Hash32 = std::array<std::uint8_t, 32>;

Hash32 sha256_bytes(const std::vector<std::uint8_t>& bytes);
std::string hex_encode(const Hash32& h);
Hash32 hex_decode(const std::string& s);

struct Validator {
  int id = -1;
  double stake = 1.0;
  bool byzantine = false;
  LabeledDataset shard;
};

struct ConsensusConfig {
  double zeta = 0.001;          // admission fraction of total stake
  double tau_sign = 2.0 / 3.0;  // signing stake threshold
  enum class Psi { identity, softplus };
  Psi psi = Psi::identity;
  double eps_agg = 1e-8;
  double loss_margin = 0.05;    // validator accept slack on shard loss
  double byzantine_slack = 0.01;  // xi: byzantine stake must stay below 1/3 - xi
  bool allow_byzantine_excess = false;  // stress-test override

  void validate() const;
};

double psi_apply(ConsensusConfig::Psi psi, double x);

class Committee {
 public:
  Committee(std::vector<Validator> validators, std::uint64_t run_secret,
            const ConsensusConfig& cfg);

  const std::vector<Validator>& validators() const { return validators_; }
  double total_stake() const { return total_stake_; }
  double byzantine_stake() const { return byzantine_stake_; }
  Hash32 sign_tag(int validator_id, const Hash32& msg) const;

 private:
  std::vector<Validator> validators_;
  std::uint64_t run_secret_;
  double total_stake_ = 0.0;
  double byzantine_stake_ = 0.0;
};

// Honest rule: accept iff the update norm is within C (+1e-9) and applying
// it does not raise the shard loss by more than loss_margin. Byzantine
// validators return the negation.
int validator_vote(const Validator& v, const UpdateDelta& update,
                   const ModelParams& base_model, double clip_bound,
                   double loss_margin);

// B_i = sum_v stake_v * bit_{v,i} * psi(max(Phi_i, 0)).
std::map<int, double> weighted_votes(
    const std::map<int, std::map<int, int>>& bits_by_client,
    const std::map<int, double>& stakes, const std::map<int, double>& phi,
    ConsensusConfig::Psi psi);

// Clients with B_i >= zeta * W_t, ascending id.
std::vector<int> admission(const std::map<int, double>& weighted, double total_stake,
                           double zeta);

// SHA-256 over: round (8-byte big-endian), each admitted id (8-byte BE),
// then every update coordinate as its IEEE-754 bit pattern in BE order.
Hash32 block_digest(std::uint64_t round, const std::vector<int>& admitted,
                    const std::vector<const Vec*>& updates);

struct ThresholdSignature {
  std::vector<std::pair<int, Hash32>> signer_tags;  // ascending validator id
  double affirmative_stake = 0.0;
};

// Non-Byzantine validators tag the message; succeeds iff their stake
// reaches tau_sign * W_t, otherwise nullopt (the round must abort).
std::optional<ThresholdSignature> threshold_sign(const Committee& committee,
                                                 const Hash32& msg, double tau_sign);
bool threshold_verify(const Committee& committee, const Hash32& msg,
                      const ThresholdSignature& sig, double tau_sign);

struct AggregateResult {
  Vec delta;
  std::map<int, double> weights;  // admitted client -> w_i
};

// w_i = psi(max(Phi_i,0)) / (sum_j psi(max(Phi_j,0)) + eps);
// delta = sum w_i * clip(update_i, C). Empty admitted set -> zero vector.
AggregateResult shapley_aggregate(const std::vector<int>& admitted,
                                  const std::map<int, UpdateDelta>& updates,
                                  const std::map<int, double>& phi,
                                  ConsensusConfig::Psi psi, double eps_agg,
                                  double clip_bound, std::size_t dim);

struct Block {
  std::uint64_t round = 0;
  std::vector<int> admitted;
  Hash32 msg_digest{};
  ThresholdSignature signature;
  Hash32 prev_hash{};
  Hash32 model_hash{};
  std::vector<Vec> updates;  // admitted order, as received
  Hash32 block_hash{};       // hash over all fields above

  // Hash of the canonical serialization excluding block_hash itself.
  Hash32 compute_hash() const;
  std::string to_ndjson_line() const;
  static Block from_ndjson_line(const std::string& line);
};

Hash32 model_digest(const ModelParams& model);

class Ledger {
 public:
  void append(Block block);
  // Recomputes every digest and link; throws "chain integrity" on failure.
  void verify() const;
  std::size_t size() const { return blocks_.size(); }
  const std::vector<Block>& blocks() const { return blocks_; }

  void save(const std::filesystem::path& path) const;
  static Ledger load(const std::filesystem::path& path);

 private:
  std::vector<Block> blocks_;
};

struct DeviationReport {
  double measured = 0.0;
  double bound = 0.0;
  bool ok = true;
};

// Deviation monitor: ||delta - delta_honest|| against alpha_t * C.
DeviationReport deviation_report(const Vec& delta, const Vec& delta_honest,
                                 double alpha_t, double clip_bound);

}  // namespace sichainfl
