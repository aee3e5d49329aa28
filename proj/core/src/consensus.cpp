#include "sichainfl/consensus.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace sichainfl {

namespace {

void push_u64_be(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int shift = 56; shift >= 0; shift -= 8)
    out.push_back(static_cast<std::uint8_t>((v >> shift) & 0xff));
}

void push_double_be(std::vector<std::uint8_t>& out, double x) {
  std::uint64_t bits;
  static_assert(sizeof(bits) == sizeof(x));
  std::memcpy(&bits, &x, sizeof(bits));
  push_u64_be(out, bits);
}

double pop_double_be(const std::uint8_t* p) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits = (bits << 8) | p[i];
  double x;
  std::memcpy(&x, &bits, sizeof(x));
  return x;
}

std::string hex_of_vec(const Vec& v) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(v.size() * 8);
  for (double x : v) push_double_be(bytes, x);
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(bytes.size() * 2);
  for (auto b : bytes) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xf]);
  }
  return s;
}

std::uint8_t nibble(char c) {
  if (c >= '0' && c <= '9') return static_cast<std::uint8_t>(c - '0');
  if (c >= 'a' && c <= 'f') return static_cast<std::uint8_t>(c - 'a' + 10);
  if (c >= 'A' && c <= 'F') return static_cast<std::uint8_t>(c - 'A' + 10);
  throw std::invalid_argument("hex: bad digit");
}

Vec vec_of_hex(const std::string& s) {
  if (s.size() % 16 != 0) throw std::invalid_argument("hex: bad update length");
  Vec v(s.size() / 16);
  std::uint8_t buf[8];
  for (std::size_t i = 0; i < v.size(); ++i) {
    for (int b = 0; b < 8; ++b)
      buf[b] = static_cast<std::uint8_t>((nibble(s[i * 16 + 2 * b]) << 4) |
                                         nibble(s[i * 16 + 2 * b + 1]));
    v[i] = pop_double_be(buf);
  }
  return v;
}

}  // namespace

Hash32 sha256_bytes(const std::vector<std::uint8_t>& bytes) {
  Hash32 out{};
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), out.data(), &len, EVP_sha256(),
                 nullptr) != 1 ||
      len != out.size())
    throw std::runtime_error("sha256 failed");
  return out;
}

std::string hex_encode(const Hash32& h) {
  static const char* digits = "0123456789abcdef";
  std::string s;
  s.reserve(64);
  for (auto b : h) {
    s.push_back(digits[b >> 4]);
    s.push_back(digits[b & 0xf]);
  }
  return s;
}

Hash32 hex_decode(const std::string& s) {
  if (s.size() != 64) throw std::invalid_argument("hex: bad hash length");
  Hash32 h{};
  for (std::size_t i = 0; i < 32; ++i)
    h[i] = static_cast<std::uint8_t>((nibble(s[2 * i]) << 4) | nibble(s[2 * i + 1]));
  return h;
}

void ConsensusConfig::validate() const {
  if (zeta <= 0.0 || zeta > 1.0) throw std::invalid_argument("consensus: zeta outside (0,1]");
  if (tau_sign <= 0.0 || tau_sign > 1.0)
    throw std::invalid_argument("consensus: tau_sign outside (0,1]");
  if (eps_agg < 0.0) throw std::invalid_argument("consensus: negative eps_agg");
  if (loss_margin < 0.0) throw std::invalid_argument("consensus: negative loss_margin");
  if (byzantine_slack <= 0.0 || byzantine_slack >= 1.0 / 3.0)
    throw std::invalid_argument("consensus: byzantine slack outside (0, 1/3)");
}

double psi_apply(ConsensusConfig::Psi psi, double x) {
  switch (psi) {
    case ConsensusConfig::Psi::identity: return x;
    case ConsensusConfig::Psi::softplus: return std::log1p(std::exp(-std::abs(x))) +
                                               std::max(x, 0.0);
  }
  return x;
}

Committee::Committee(std::vector<Validator> validators, std::uint64_t run_secret,
                     const ConsensusConfig& cfg)
    : validators_(std::move(validators)), run_secret_(run_secret) {
  cfg.validate();
  if (validators_.empty()) throw std::invalid_argument("committee: empty");
  for (const auto& v : validators_) {
    if (v.stake <= 0.0) throw std::invalid_argument("committee: stake must be positive");
    total_stake_ += v.stake;
    if (v.byzantine) byzantine_stake_ += v.stake;
  }
  const double share = byzantine_stake_ / total_stake_;
  if (!cfg.allow_byzantine_excess && share > 1.0 / 3.0 - cfg.byzantine_slack)
    throw std::invalid_argument("committee: byzantine stake share exceeds 1/3 - xi");
}

Hash32 Committee::sign_tag(int validator_id, const Hash32& msg) const {
  std::vector<std::uint8_t> key;
  push_u64_be(key, run_secret_);
  push_u64_be(key, static_cast<std::uint64_t>(validator_id));
  Hash32 out{};
  unsigned int len = 0;
  if (HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), msg.data(),
           msg.size(), out.data(), &len) == nullptr ||
      len != out.size())
    throw std::runtime_error("hmac failed");
  return out;
}

int validator_vote(const Validator& v, const UpdateDelta& update,
                   const ModelParams& base_model, double clip_bound,
                   double loss_margin) {
  if (v.shard.size() == 0) throw std::invalid_argument("validator: empty shard");
  bool accept = l2_norm(update.delta) <= clip_bound + 1e-9;
  if (accept) {
    const ModelParams moved = apply_update(base_model, update.delta, 1.0);
    accept = bce_loss(moved, v.shard) <= bce_loss(base_model, v.shard) + loss_margin;
  }
  const bool bit = v.byzantine ? !accept : accept;
  return bit ? 1 : 0;
}

std::map<int, double> weighted_votes(
    const std::map<int, std::map<int, int>>& bits_by_client,
    const std::map<int, double>& stakes, const std::map<int, double>& phi,
    ConsensusConfig::Psi psi) {
  std::map<int, double> weighted;
  for (const auto& [client, votes] : bits_by_client) {
    double stake_sum = 0.0;
    for (const auto& [validator, bit] : votes) {
      if (bit == 0) continue;
      const auto it = stakes.find(validator);
      if (it == stakes.end()) throw std::invalid_argument("votes: unknown validator");
      stake_sum += it->second;
    }
    double phi_clamped = 0.0;
    if (const auto it = phi.find(client); it != phi.end())
      phi_clamped = std::max(it->second, 0.0);
    const double scaled = psi_apply(psi, phi_clamped);
    if (scaled < 0.0) throw std::invalid_argument("votes: psi must be non-negative");
    weighted[client] = stake_sum * scaled;
  }
  return weighted;
}

std::vector<int> admission(const std::map<int, double>& weighted, double total_stake,
                           double zeta) {
  if (total_stake <= 0.0) throw std::invalid_argument("admission: no stake");
  std::vector<int> admitted;
  for (const auto& [client, b] : weighted) {
    if (b >= zeta * total_stake) admitted.push_back(client);
  }
  return admitted;  // std::map iteration is already ascending by id
}

Hash32 block_digest(std::uint64_t round, const std::vector<int>& admitted,
                    const std::vector<const Vec*>& updates) {
  if (admitted.size() != updates.size())
    throw std::invalid_argument("digest: admitted/update count mismatch");
  std::vector<std::uint8_t> bytes;
  push_u64_be(bytes, round);
  for (int id : admitted) push_u64_be(bytes, static_cast<std::uint64_t>(id));
  for (const Vec* u : updates)
    for (double x : *u) push_double_be(bytes, x);
  return sha256_bytes(bytes);
}

std::optional<ThresholdSignature> threshold_sign(const Committee& committee,
                                                 const Hash32& msg, double tau_sign) {
  ThresholdSignature sig;
  for (const auto& v : committee.validators()) {
    if (v.byzantine) continue;
    sig.signer_tags.emplace_back(v.id, committee.sign_tag(v.id, msg));
    sig.affirmative_stake += v.stake;
  }
  std::sort(sig.signer_tags.begin(), sig.signer_tags.end(),
            [](const auto& a, const auto& b) { return a.first < b.first; });
  if (sig.affirmative_stake + 1e-12 < tau_sign * committee.total_stake())
    return std::nullopt;
  return sig;
}

bool threshold_verify(const Committee& committee, const Hash32& msg,
                      const ThresholdSignature& sig, double tau_sign) {
  std::map<int, double> stakes;
  for (const auto& v : committee.validators()) stakes[v.id] = v.stake;
  double stake_sum = 0.0;
  for (const auto& [id, tag] : sig.signer_tags) {
    const auto it = stakes.find(id);
    if (it == stakes.end()) return false;
    if (committee.sign_tag(id, msg) != tag) return false;
    stake_sum += it->second;
  }
  return stake_sum + 1e-12 >= tau_sign * committee.total_stake();
}

AggregateResult shapley_aggregate(const std::vector<int>& admitted,
                                  const std::map<int, UpdateDelta>& updates,
                                  const std::map<int, double>& phi,
                                  ConsensusConfig::Psi psi, double eps_agg,
                                  double clip_bound, std::size_t dim) {
  AggregateResult out;
  out.delta.assign(dim, 0.0);
  if (admitted.empty()) return out;

  double psi_sum = 0.0;
  std::map<int, double> psi_val;
  for (int id : admitted) {
    const auto it = phi.find(id);
    const double clamped = it != phi.end() ? std::max(it->second, 0.0) : 0.0;
    const double p = psi_apply(psi, clamped);
    if (p < 0.0) throw std::invalid_argument("aggregate: psi must be non-negative");
    psi_val[id] = p;
    psi_sum += p;
  }
  const double denom = psi_sum + eps_agg;
  for (int id : admitted) {
    const auto it = updates.find(id);
    if (it == updates.end()) throw std::invalid_argument("aggregate: missing update");
    const double w = denom > 0.0 ? psi_val[id] / denom : 0.0;
    out.weights[id] = w;
    const UpdateDelta clipped = clip_update(it->second, clip_bound);
    if (clipped.delta.size() != dim)
      throw std::invalid_argument("aggregate: dimension mismatch");
    axpy(w, clipped.delta, out.delta);
  }
  return out;
}

namespace {

nlohmann::json block_core_json(const Block& b) {
  nlohmann::json j;
  j["round"] = b.round;
  j["admitted"] = b.admitted;
  j["msg_digest"] = hex_encode(b.msg_digest);
  nlohmann::json signers = nlohmann::json::array();
  for (const auto& [id, tag] : b.signature.signer_tags)
    signers.push_back({{"id", id}, {"tag", hex_encode(tag)}});
  j["signers"] = signers;
  j["prev_hash"] = hex_encode(b.prev_hash);
  j["model_hash"] = hex_encode(b.model_hash);
  nlohmann::json ups = nlohmann::json::array();
  for (const auto& u : b.updates) ups.push_back(hex_of_vec(u));
  j["updates"] = ups;
  return j;
}

}  // namespace

Hash32 Block::compute_hash() const {
  const std::string s = block_core_json(*this).dump();
  return sha256_bytes(std::vector<std::uint8_t>(s.begin(), s.end()));
}

std::string Block::to_ndjson_line() const {
  nlohmann::json j = block_core_json(*this);
  j["block_hash"] = hex_encode(block_hash);
  return j.dump();
}

Block Block::from_ndjson_line(const std::string& line) {
  const nlohmann::json j = nlohmann::json::parse(line);
  static const char* required[] = {"round",      "admitted",  "msg_digest", "signers",
                                   "prev_hash",  "model_hash", "updates",   "block_hash"};
  for (const char* key : required)
    if (!j.contains(key)) throw std::runtime_error(std::string("block: missing ") + key);
  if (j.size() != 8) throw std::runtime_error("block: unexpected field");

  Block b;
  b.round = j.at("round").get<std::uint64_t>();
  b.admitted = j.at("admitted").get<std::vector<int>>();
  b.msg_digest = hex_decode(j.at("msg_digest").get<std::string>());
  for (const auto& s : j.at("signers")) {
    b.signature.signer_tags.emplace_back(s.at("id").get<int>(),
                                         hex_decode(s.at("tag").get<std::string>()));
  }
  b.prev_hash = hex_decode(j.at("prev_hash").get<std::string>());
  b.model_hash = hex_decode(j.at("model_hash").get<std::string>());
  for (const auto& u : j.at("updates")) b.updates.push_back(vec_of_hex(u.get<std::string>()));
  b.block_hash = hex_decode(j.at("block_hash").get<std::string>());
  return b;
}

Hash32 model_digest(const ModelParams& model) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(model.weights.size() * 8);
  for (double x : model.weights) push_double_be(bytes, x);
  return sha256_bytes(bytes);
}

void Ledger::append(Block block) {
  const Hash32 expected_prev = blocks_.empty() ? Hash32{} : blocks_.back().block_hash;
  if (block.prev_hash != expected_prev) throw std::runtime_error("chain integrity: bad link");
  std::vector<const Vec*> ups;
  ups.reserve(block.updates.size());
  for (const auto& u : block.updates) ups.push_back(&u);
  if (block_digest(block.round, block.admitted, ups) != block.msg_digest)
    throw std::runtime_error("chain integrity: digest mismatch");
  if (block.compute_hash() != block.block_hash)
    throw std::runtime_error("chain integrity: block hash mismatch");
  blocks_.push_back(std::move(block));
}

void Ledger::verify() const {
  Hash32 prev{};
  for (const auto& b : blocks_) {
    if (b.prev_hash != prev) throw std::runtime_error("chain integrity: bad link");
    std::vector<const Vec*> ups;
    ups.reserve(b.updates.size());
    for (const auto& u : b.updates) ups.push_back(&u);
    if (b.admitted.size() != b.updates.size())
      throw std::runtime_error("chain integrity: update count mismatch");
    if (block_digest(b.round, b.admitted, ups) != b.msg_digest)
      throw std::runtime_error("chain integrity: digest mismatch");
    if (b.compute_hash() != b.block_hash)
      throw std::runtime_error("chain integrity: block hash mismatch");
    prev = b.block_hash;
  }
}

void Ledger::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot open for write: " + path.string());
  for (const auto& b : blocks_) out << b.to_ndjson_line() << '\n';
}

Ledger Ledger::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open for read: " + path.string());
  Ledger ledger;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) throw std::runtime_error("chain integrity: blank line");
    ledger.blocks_.push_back(Block::from_ndjson_line(line));
  }
  return ledger;
}

DeviationReport deviation_report(const Vec& delta, const Vec& delta_honest,
                                 double alpha_t, double clip_bound) {
  if (delta.size() != delta_honest.size())
    throw std::invalid_argument("deviation: dimension mismatch");
  DeviationReport rep;
  double s = 0.0;
  for (std::size_t i = 0; i < delta.size(); ++i) {
    const double d = delta[i] - delta_honest[i];
    s += d * d;
  }
  rep.measured = std::sqrt(s);
  rep.bound = alpha_t * clip_bound;
  rep.ok = rep.measured <= rep.bound + 1e-9;
  return rep;
}

}  // namespace sichainfl
