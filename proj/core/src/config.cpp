#include "sichainfl/config.hpp"

#include <cctype>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <variant>

#include "json.hpp"

namespace sichainfl {

namespace {

using TomlValue = std::variant<bool, double, std::string, Vec>;

std::string trim(const std::string& s) {
  std::size_t a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  std::size_t b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

// Strips a trailing comment that is not inside a quoted string.
std::string strip_comment(const std::string& s) {
  bool in_str = false;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] == '"') in_str = !in_str;
    if (s[i] == '#' && !in_str) return s.substr(0, i);
  }
  return s;
}

double parse_number(const std::string& tok, const std::string& where) {
  std::size_t pos = 0;
  double v;
  try {
    v = std::stod(tok, &pos);
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad number for '" + where + "'");
  }
  if (pos != tok.size()) throw std::runtime_error("config: bad number for '" + where + "'");
  return v;
}

TomlValue parse_value(const std::string& raw, const std::string& where) {
  const std::string tok = trim(raw);
  if (tok.empty()) throw std::runtime_error("config: empty value for '" + where + "'");
  if (tok == "true") return true;
  if (tok == "false") return false;
  if (tok.front() == '"') {
    if (tok.size() < 2 || tok.back() != '"')
      throw std::runtime_error("config: unterminated string for '" + where + "'");
    return tok.substr(1, tok.size() - 2);
  }
  if (tok.front() == '[') {
    if (tok.back() != ']')
      throw std::runtime_error("config: unterminated array for '" + where + "'");
    Vec arr;
    std::stringstream ss(tok.substr(1, tok.size() - 2));
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      const std::string c = trim(cell);
      if (c.empty()) continue;
      arr.push_back(parse_number(c, where));
    }
    return arr;
  }
  return parse_number(tok, where);
}

class KeyTable {
 public:
  void insert(const std::string& key, TomlValue value) {
    if (values_.count(key)) throw std::runtime_error("config: duplicate key '" + key + "'");
    values_.emplace(key, std::move(value));
  }

  bool take_bool(const std::string& key, bool fallback) {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (const bool* b = std::get_if<bool>(&it->second)) {
      const bool v = *b;
      values_.erase(it);
      return v;
    }
    throw std::runtime_error("config: '" + key + "' must be a boolean");
  }

  double take_number(const std::string& key, double fallback) {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (const double* d = std::get_if<double>(&it->second)) {
      const double v = *d;
      values_.erase(it);
      return v;
    }
    throw std::runtime_error("config: '" + key + "' must be a number");
  }

  int take_int(const std::string& key, int fallback) {
    const double v = take_number(key, static_cast<double>(fallback));
    if (v != std::floor(v)) throw std::runtime_error("config: '" + key + "' must be an integer");
    return static_cast<int>(v);
  }

  std::string take_string(const std::string& key, const std::string& fallback) {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (const std::string* s = std::get_if<std::string>(&it->second)) {
      const std::string v = *s;
      values_.erase(it);
      return v;
    }
    throw std::runtime_error("config: '" + key + "' must be a string");
  }

  Vec take_array(const std::string& key, Vec fallback) {
    const auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    if (const Vec* a = std::get_if<Vec>(&it->second)) {
      const Vec v = *a;
      values_.erase(it);
      return v;
    }
    throw std::runtime_error("config: '" + key + "' must be an array");
  }

  void reject_leftovers() const {
    if (!values_.empty())
      throw std::runtime_error("config: unknown key '" + values_.begin()->first + "'");
  }

 private:
  std::map<std::string, TomlValue> values_;
};

Arch arch_from_string(const std::string& s) {
  if (s == "logistic") return Arch::logistic;
  if (s == "mlp") return Arch::mlp;
  throw std::runtime_error("config: unknown arch '" + s + "'");
}

const char* arch_to_string(Arch a) { return a == Arch::logistic ? "logistic" : "mlp"; }

ConsensusConfig::Psi psi_from_string(const std::string& s) {
  if (s == "identity") return ConsensusConfig::Psi::identity;
  if (s == "softplus") return ConsensusConfig::Psi::softplus;
  throw std::runtime_error("config: unknown psi '" + s + "'");
}

const char* psi_to_string(ConsensusConfig::Psi p) {
  return p == ConsensusConfig::Psi::identity ? "identity" : "softplus";
}

ValuationConfig::EvalMode eval_mode_from_string(const std::string& s) {
  if (s == "full") return ValuationConfig::EvalMode::full;
  if (s == "additive") return ValuationConfig::EvalMode::additive;
  throw std::runtime_error("config: unknown eval_mode '" + s + "'");
}

const char* eval_mode_to_string(ValuationConfig::EvalMode m) {
  return m == ValuationConfig::EvalMode::full ? "full" : "additive";
}

}  // namespace

void DataSpec::validate() const {
  if (n_samples < 10) throw std::invalid_argument("data: too few samples");
  if (n_features < 1) throw std::invalid_argument("data: n_features must be positive");
  if (positive_rate <= 0.0 || positive_rate >= 0.5)
    throw std::invalid_argument("data: positive_rate outside (0, 0.5)");
  if (cluster_noise < 0.0) throw std::invalid_argument("data: negative noise");
  if (dirichlet_alpha <= 0.0) throw std::invalid_argument("data: alpha must be positive");
  if (lognormal_sigma < 0.0) throw std::invalid_argument("data: negative sigma");
  if (scenario_count < 1) throw std::invalid_argument("data: scenario_count must be >= 1");
  const double held = val_fraction + test_fraction + validator_pool_fraction;
  if (val_fraction <= 0.0 || test_fraction <= 0.0 || validator_pool_fraction <= 0.0 ||
      held >= 0.9)
    throw std::invalid_argument("data: invalid split fractions");
}

void TrainSpec::validate() const {
  if (lr <= 0.0) throw std::invalid_argument("train: lr must be positive");
  if (local_epochs < 0) throw std::invalid_argument("train: negative epochs");
  if (batch_size < 1) throw std::invalid_argument("train: batch_size must be positive");
  if (arch == Arch::mlp && mlp_hidden < 1)
    throw std::invalid_argument("train: mlp_hidden must be positive");
  if (eta_server <= 0.0) throw std::invalid_argument("train: eta_server must be positive");
}

const char* to_string(AttackKind a) {
  switch (a) {
    case AttackKind::none: return "none";
    case AttackKind::fr: return "fr";
    case AttackKind::pa: return "pa";
  }
  return "none";
}

AttackKind attack_from_string(const std::string& s) {
  if (s == "none") return AttackKind::none;
  if (s == "fr") return AttackKind::fr;
  if (s == "pa") return AttackKind::pa;
  throw std::runtime_error("config: unknown attack '" + s + "'");
}

void ExperimentConfig::validate() const {
  if (rounds < 1) throw std::invalid_argument("config: rounds must be >= 1");
  if (n_clients < 1) throw std::invalid_argument("config: n_clients must be >= 1");
  if (participation_frac <= 0.0 || participation_frac > 1.0)
    throw std::invalid_argument("config: participation_frac outside (0,1]");
  if (malicious_frac < 0.0 || malicious_frac > 1.0)
    throw std::invalid_argument("config: malicious_frac outside [0,1]");
  if (validator_count < 1) throw std::invalid_argument("config: need validators");
  if (byzantine_validators < 0 || byzantine_validators > validator_count)
    throw std::invalid_argument("config: bad byzantine_validators");
  if (honest_low_frac < 0.0 || honest_low_frac > 1.0)
    throw std::invalid_argument("config: honest_low_frac outside [0,1]");
  if (flip_frac <= 0.0 || flip_frac > 1.0)
    throw std::invalid_argument("config: flip_frac outside (0,1]");
  data.validate();
  train.validate();
  dp.validate();
  valuation.validate();
  approx.validate();
  consensus.validate();
  if (!valuation.beta_r.empty() &&
      valuation.beta_r.size() != static_cast<std::size_t>(data.scenario_count))
    throw std::invalid_argument("config: beta_r length must equal scenario_count");
}

ExperimentConfig parse_config_toml(const std::string& text) {
  std::map<std::string, KeyTable> tables;
  std::string section;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(strip_comment(line));
    if (t.empty()) continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw std::runtime_error("config: malformed section at line " + std::to_string(lineno));
      section = trim(t.substr(1, t.size() - 2));
      if (section.empty())
        throw std::runtime_error("config: empty section at line " + std::to_string(lineno));
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: expected key = value at line " + std::to_string(lineno));
    const std::string key = trim(t.substr(0, eq));
    if (key.empty())
      throw std::runtime_error("config: empty key at line " + std::to_string(lineno));
    const std::string where = section.empty() ? key : section + "." + key;
    tables[section].insert(key, parse_value(t.substr(eq + 1), where));
  }

  static const char* known_sections[] = {"",       "data",      "train",
                                         "dp",     "valuation", "approx",
                                         "consensus"};
  for (const auto& [name, _] : tables) {
    bool ok = false;
    for (const char* s : known_sections) ok = ok || name == s;
    if (!ok) throw std::runtime_error("config: unknown section '" + name + "'");
  }

  ExperimentConfig cfg;
  auto& root = tables[""];
  const double seed_raw = root.take_number("seed", static_cast<double>(cfg.seed));
  if (seed_raw < 0 || seed_raw != std::floor(seed_raw))
    throw std::runtime_error("config: 'seed' must be a non-negative integer");
  cfg.seed = static_cast<std::uint64_t>(seed_raw);
  cfg.rounds = root.take_int("rounds", cfg.rounds);
  cfg.n_clients = root.take_int("n_clients", cfg.n_clients);
  cfg.participation_frac = root.take_number("participation_frac", cfg.participation_frac);
  cfg.malicious_frac = root.take_number("malicious_frac", cfg.malicious_frac);
  cfg.attack = attack_from_string(root.take_string("attack", to_string(cfg.attack)));
  cfg.validator_count = root.take_int("validator_count", cfg.validator_count);
  cfg.byzantine_validators = root.take_int("byzantine_validators", cfg.byzantine_validators);
  cfg.honest_low_frac = root.take_number("honest_low_frac", cfg.honest_low_frac);
  cfg.flip_frac = root.take_number("flip_frac", cfg.flip_frac);
  root.reject_leftovers();

  auto& data = tables["data"];
  cfg.data.n_samples = data.take_int("n_samples", cfg.data.n_samples);
  cfg.data.n_features = data.take_int("n_features", cfg.data.n_features);
  cfg.data.positive_rate = data.take_number("positive_rate", cfg.data.positive_rate);
  cfg.data.cluster_noise = data.take_number("cluster_noise", cfg.data.cluster_noise);
  cfg.data.dirichlet_alpha = data.take_number("dirichlet_alpha", cfg.data.dirichlet_alpha);
  cfg.data.lognormal_sigma = data.take_number("lognormal_sigma", cfg.data.lognormal_sigma);
  cfg.data.scenario_count = data.take_int("scenario_count", cfg.data.scenario_count);
  cfg.data.val_fraction = data.take_number("val_fraction", cfg.data.val_fraction);
  cfg.data.test_fraction = data.take_number("test_fraction", cfg.data.test_fraction);
  cfg.data.validator_pool_fraction =
      data.take_number("validator_pool_fraction", cfg.data.validator_pool_fraction);
  data.reject_leftovers();

  auto& train = tables["train"];
  cfg.train.lr = train.take_number("lr", cfg.train.lr);
  cfg.train.local_epochs = train.take_int("local_epochs", cfg.train.local_epochs);
  cfg.train.batch_size = train.take_int("batch_size", cfg.train.batch_size);
  cfg.train.arch = arch_from_string(train.take_string("arch", arch_to_string(cfg.train.arch)));
  cfg.train.mlp_hidden = train.take_int("mlp_hidden", cfg.train.mlp_hidden);
  cfg.train.eta_server = train.take_number("eta_server", cfg.train.eta_server);
  train.reject_leftovers();

  auto& dp = tables["dp"];
  cfg.dp.clip_bound = dp.take_number("clip_bound", cfg.dp.clip_bound);
  cfg.dp.noise_multiplier = dp.take_number("noise_multiplier", cfg.dp.noise_multiplier);
  cfg.dp.delta_dp = dp.take_number("delta_dp", cfg.dp.delta_dp);
  cfg.dp.per_round_epsilon = dp.take_number("per_round_epsilon", cfg.dp.per_round_epsilon);
  dp.reject_leftovers();

  auto& val = tables["valuation"];
  cfg.valuation.alpha_blend = val.take_number("alpha_blend", cfg.valuation.alpha_blend);
  cfg.valuation.beta_r = val.take_array("beta_r", cfg.valuation.beta_r);
  cfg.valuation.eps_stab = val.take_number("eps_stab", cfg.valuation.eps_stab);
  cfg.valuation.rho_fpr = val.take_number("rho_fpr", cfg.valuation.rho_fpr);
  cfg.valuation.gamma1 = val.take_number("gamma1", cfg.valuation.gamma1);
  cfg.valuation.gamma2 = val.take_number("gamma2", cfg.valuation.gamma2);
  cfg.valuation.gamma3 = val.take_number("gamma3", cfg.valuation.gamma3);
  cfg.valuation.gamma4 = val.take_number("gamma4", cfg.valuation.gamma4);
  cfg.valuation.lambda_acc = val.take_number("lambda_acc", cfg.valuation.lambda_acc);
  cfg.valuation.lambda_div = val.take_number("lambda_div", cfg.valuation.lambda_div);
  cfg.valuation.lambda_qua = val.take_number("lambda_qua", cfg.valuation.lambda_qua);
  cfg.valuation.lambda_decay = val.take_number("lambda_decay", cfg.valuation.lambda_decay);
  cfg.valuation.threshold_grid = val.take_array("threshold_grid", cfg.valuation.threshold_grid);
  cfg.valuation.eval_mode = eval_mode_from_string(
      val.take_string("eval_mode", eval_mode_to_string(cfg.valuation.eval_mode)));
  val.reject_leftovers();

  auto& approx = tables["approx"];
  cfg.approx.k_top = approx.take_int("k_top", cfg.approx.k_top);
  cfg.approx.m_hard = approx.take_int("m_hard", cfg.approx.m_hard);
  cfg.approx.h_crit = approx.take_int("h_crit", cfg.approx.h_crit);
  cfg.approx.delta_q = approx.take_number("delta_q", cfg.approx.delta_q);
  cfg.approx.lambda_fp = approx.take_number("lambda_fp", cfg.approx.lambda_fp);
  cfg.approx.kappa = approx.take_number("kappa", cfg.approx.kappa);
  cfg.approx.k_perm = approx.take_int("k_perm", cfg.approx.k_perm);
  cfg.approx.gamma_ema = approx.take_number("gamma_ema", cfg.approx.gamma_ema);
  cfg.approx.eps_share = approx.take_number("eps_share", cfg.approx.eps_share);
  cfg.approx.rho_neg = approx.take_number("rho_neg", cfg.approx.rho_neg);
  approx.reject_leftovers();

  auto& cons = tables["consensus"];
  cfg.consensus.zeta = cons.take_number("zeta", cfg.consensus.zeta);
  cfg.consensus.tau_sign = cons.take_number("tau_sign", cfg.consensus.tau_sign);
  cfg.consensus.psi = psi_from_string(cons.take_string("psi", psi_to_string(cfg.consensus.psi)));
  cfg.consensus.eps_agg = cons.take_number("eps_agg", cfg.consensus.eps_agg);
  cfg.consensus.loss_margin = cons.take_number("loss_margin", cfg.consensus.loss_margin);
  cfg.consensus.byzantine_slack =
      cons.take_number("byzantine_slack", cfg.consensus.byzantine_slack);
  cfg.consensus.allow_byzantine_excess =
      cons.take_bool("allow_byzantine_excess", cfg.consensus.allow_byzantine_excess);
  cons.reject_leftovers();

  cfg.validate();
  return cfg;
}

ExperimentConfig load_config_toml(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open config: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config_toml(buf.str());
}

std::string config_to_json_string(const ExperimentConfig& cfg) {
  nlohmann::json j;
  j["seed"] = cfg.seed;
  j["rounds"] = cfg.rounds;
  j["n_clients"] = cfg.n_clients;
  j["participation_frac"] = cfg.participation_frac;
  j["malicious_frac"] = cfg.malicious_frac;
  j["attack"] = to_string(cfg.attack);
  j["validator_count"] = cfg.validator_count;
  j["byzantine_validators"] = cfg.byzantine_validators;
  j["honest_low_frac"] = cfg.honest_low_frac;
  j["flip_frac"] = cfg.flip_frac;
  j["data"] = {{"n_samples", cfg.data.n_samples},
               {"n_features", cfg.data.n_features},
               {"positive_rate", cfg.data.positive_rate},
               {"cluster_noise", cfg.data.cluster_noise},
               {"dirichlet_alpha", cfg.data.dirichlet_alpha},
               {"lognormal_sigma", cfg.data.lognormal_sigma},
               {"scenario_count", cfg.data.scenario_count},
               {"val_fraction", cfg.data.val_fraction},
               {"test_fraction", cfg.data.test_fraction},
               {"validator_pool_fraction", cfg.data.validator_pool_fraction}};
  j["train"] = {{"lr", cfg.train.lr},
                {"local_epochs", cfg.train.local_epochs},
                {"batch_size", cfg.train.batch_size},
                {"arch", arch_to_string(cfg.train.arch)},
                {"mlp_hidden", cfg.train.mlp_hidden},
                {"eta_server", cfg.train.eta_server}};
  j["dp"] = {{"clip_bound", cfg.dp.clip_bound},
             {"noise_multiplier", cfg.dp.noise_multiplier},
             {"delta_dp", cfg.dp.delta_dp},
             {"per_round_epsilon", cfg.dp.per_round_epsilon}};
  j["valuation"] = {{"alpha_blend", cfg.valuation.alpha_blend},
                    {"beta_r", cfg.valuation.beta_r},
                    {"eps_stab", cfg.valuation.eps_stab},
                    {"rho_fpr", cfg.valuation.rho_fpr},
                    {"gamma1", cfg.valuation.gamma1},
                    {"gamma2", cfg.valuation.gamma2},
                    {"gamma3", cfg.valuation.gamma3},
                    {"gamma4", cfg.valuation.gamma4},
                    {"lambda_acc", cfg.valuation.lambda_acc},
                    {"lambda_div", cfg.valuation.lambda_div},
                    {"lambda_qua", cfg.valuation.lambda_qua},
                    {"lambda_decay", cfg.valuation.lambda_decay},
                    {"threshold_grid", cfg.valuation.threshold_grid},
                    {"eval_mode", eval_mode_to_string(cfg.valuation.eval_mode)}};
  j["approx"] = {{"k_top", cfg.approx.k_top},
                 {"m_hard", cfg.approx.m_hard},
                 {"h_crit", cfg.approx.h_crit},
                 {"delta_q", cfg.approx.delta_q},
                 {"lambda_fp", cfg.approx.lambda_fp},
                 {"kappa", cfg.approx.kappa},
                 {"k_perm", cfg.approx.k_perm},
                 {"gamma_ema", cfg.approx.gamma_ema},
                 {"eps_share", cfg.approx.eps_share},
                 {"rho_neg", cfg.approx.rho_neg}};
  j["consensus"] = {{"zeta", cfg.consensus.zeta},
                    {"tau_sign", cfg.consensus.tau_sign},
                    {"psi", psi_to_string(cfg.consensus.psi)},
                    {"eps_agg", cfg.consensus.eps_agg},
                    {"loss_margin", cfg.consensus.loss_margin},
                    {"byzantine_slack", cfg.consensus.byzantine_slack},
                    {"allow_byzantine_excess", cfg.consensus.allow_byzantine_excess}};
  return j.dump(2);
}

ExperimentConfig config_from_json_string(const std::string& json_text) {
  const nlohmann::json j = nlohmann::json::parse(json_text);
  ExperimentConfig cfg;
  cfg.seed = j.at("seed").get<std::uint64_t>();
  cfg.rounds = j.at("rounds").get<int>();
  cfg.n_clients = j.at("n_clients").get<int>();
  cfg.participation_frac = j.at("participation_frac").get<double>();
  cfg.malicious_frac = j.at("malicious_frac").get<double>();
  cfg.attack = attack_from_string(j.at("attack").get<std::string>());
  cfg.validator_count = j.at("validator_count").get<int>();
  cfg.byzantine_validators = j.at("byzantine_validators").get<int>();
  cfg.honest_low_frac = j.at("honest_low_frac").get<double>();
  cfg.flip_frac = j.at("flip_frac").get<double>();
  const auto& d = j.at("data");
  cfg.data.n_samples = d.at("n_samples").get<int>();
  cfg.data.n_features = d.at("n_features").get<int>();
  cfg.data.positive_rate = d.at("positive_rate").get<double>();
  cfg.data.cluster_noise = d.at("cluster_noise").get<double>();
  cfg.data.dirichlet_alpha = d.at("dirichlet_alpha").get<double>();
  cfg.data.lognormal_sigma = d.at("lognormal_sigma").get<double>();
  cfg.data.scenario_count = d.at("scenario_count").get<int>();
  cfg.data.val_fraction = d.at("val_fraction").get<double>();
  cfg.data.test_fraction = d.at("test_fraction").get<double>();
  cfg.data.validator_pool_fraction = d.at("validator_pool_fraction").get<double>();
  const auto& t = j.at("train");
  cfg.train.lr = t.at("lr").get<double>();
  cfg.train.local_epochs = t.at("local_epochs").get<int>();
  cfg.train.batch_size = t.at("batch_size").get<int>();
  cfg.train.arch = t.at("arch").get<std::string>() == "mlp" ? Arch::mlp : Arch::logistic;
  cfg.train.mlp_hidden = t.at("mlp_hidden").get<int>();
  cfg.train.eta_server = t.at("eta_server").get<double>();
  const auto& p = j.at("dp");
  cfg.dp.clip_bound = p.at("clip_bound").get<double>();
  cfg.dp.noise_multiplier = p.at("noise_multiplier").get<double>();
  cfg.dp.delta_dp = p.at("delta_dp").get<double>();
  cfg.dp.per_round_epsilon = p.at("per_round_epsilon").get<double>();
  const auto& v = j.at("valuation");
  cfg.valuation.alpha_blend = v.at("alpha_blend").get<double>();
  cfg.valuation.beta_r = v.at("beta_r").get<Vec>();
  cfg.valuation.eps_stab = v.at("eps_stab").get<double>();
  cfg.valuation.rho_fpr = v.at("rho_fpr").get<double>();
  cfg.valuation.gamma1 = v.at("gamma1").get<double>();
  cfg.valuation.gamma2 = v.at("gamma2").get<double>();
  cfg.valuation.gamma3 = v.at("gamma3").get<double>();
  cfg.valuation.gamma4 = v.at("gamma4").get<double>();
  cfg.valuation.lambda_acc = v.at("lambda_acc").get<double>();
  cfg.valuation.lambda_div = v.at("lambda_div").get<double>();
  cfg.valuation.lambda_qua = v.at("lambda_qua").get<double>();
  cfg.valuation.lambda_decay = v.at("lambda_decay").get<double>();
  cfg.valuation.threshold_grid = v.at("threshold_grid").get<Vec>();
  cfg.valuation.eval_mode = eval_mode_from_string(v.at("eval_mode").get<std::string>());
  const auto& a = j.at("approx");
  cfg.approx.k_top = a.at("k_top").get<int>();
  cfg.approx.m_hard = a.at("m_hard").get<int>();
  cfg.approx.h_crit = a.at("h_crit").get<int>();
  cfg.approx.delta_q = a.at("delta_q").get<double>();
  cfg.approx.lambda_fp = a.at("lambda_fp").get<double>();
  cfg.approx.kappa = a.at("kappa").get<double>();
  cfg.approx.k_perm = a.at("k_perm").get<int>();
  cfg.approx.gamma_ema = a.at("gamma_ema").get<double>();
  cfg.approx.eps_share = a.at("eps_share").get<double>();
  cfg.approx.rho_neg = a.at("rho_neg").get<double>();
  const auto& c = j.at("consensus");
  cfg.consensus.zeta = c.at("zeta").get<double>();
  cfg.consensus.tau_sign = c.at("tau_sign").get<double>();
  cfg.consensus.psi = psi_from_string(c.at("psi").get<std::string>());
  cfg.consensus.eps_agg = c.at("eps_agg").get<double>();
  cfg.consensus.loss_margin = c.at("loss_margin").get<double>();
  cfg.consensus.byzantine_slack = c.at("byzantine_slack").get<double>();
  cfg.consensus.allow_byzantine_excess = c.at("allow_byzantine_excess").get<bool>();
  cfg.validate();
  return cfg;
}

}  // namespace sichainfl
