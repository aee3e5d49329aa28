#include "sichainfl/harness.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "json.hpp"
#include "sichainfl/approx_shapley.hpp"
#include "sichainfl/datagen.hpp"
#include "sichainfl/valuation.hpp"

namespace sichainfl {

const char* kVersionString = "sichainfl-0.1.0";

namespace {

// Stream tags for deterministic sub-seed derivation.
constexpr std::uint64_t kSeedMaster = 1;
constexpr std::uint64_t kSeedPartition = 2;
constexpr std::uint64_t kSeedScenarios = 3;
constexpr std::uint64_t kSeedBehaviors = 4;
constexpr std::uint64_t kSeedQuality = 5;
constexpr std::uint64_t kSeedLowNoise = 6;
constexpr std::uint64_t kSeedParticipants = 7;
constexpr std::uint64_t kSeedStratify = 9;
constexpr std::uint64_t kSeedShapley = 10;
constexpr std::uint64_t kSeedSecret = 11;
constexpr std::uint64_t kSeedInit = 12;

LabeledDataset take_rows(const LabeledDataset& ds, std::size_t begin, std::size_t end) {
  LabeledDataset out;
  out.features.assign(ds.features.begin() + begin, ds.features.begin() + end);
  out.labels.assign(ds.labels.begin() + begin, ds.labels.begin() + end);
  return out;
}

Vec unit_mean_summary(const LabeledDataset& ds) {
  Vec mean(ds.feature_dim(), 0.0);
  for (const auto& row : ds.features) axpy(1.0, row, mean);
  for (double& x : mean) x /= static_cast<double>(ds.size());
  const double norm = l2_norm(mean);
  if (norm < 1e-15) {
    std::fill(mean.begin(), mean.end(), 0.0);
    mean[0] = 1.0;
    return mean;
  }
  for (double& x : mean) x /= norm;
  return mean;
}

bool is_malicious(BehaviorKind k) {
  return k == BehaviorKind::free_rider || k == BehaviorKind::poisoner;
}

std::vector<int> sample_participants(int n_clients, double frac, std::uint64_t seed) {
  const int k = std::max(1, static_cast<int>(std::llround(frac * n_clients)));
  std::vector<int> ids(n_clients);
  std::iota(ids.begin(), ids.end(), 0);
  Rng rng(seed);
  rng.shuffle(ids);
  ids.resize(std::min(k, n_clients));
  std::sort(ids.begin(), ids.end());
  return ids;
}

struct TestMetrics {
  double accuracy = 0.0;
  double mae = 0.0;
  double auprc_value = 0.0;
};

TestMetrics evaluate_model(const ModelParams& model, const LabeledDataset& test) {
  const Vec scores = predict_proba_batch(model, test.features);
  TestMetrics m;
  std::size_t correct = 0;
  double abs_err = 0.0;
  for (std::size_t i = 0; i < test.size(); ++i) {
    const int pred = scores[i] >= 0.5 ? 1 : 0;
    if (pred == test.labels[i]) ++correct;
    abs_err += std::abs(scores[i] - static_cast<double>(test.labels[i]));
  }
  m.accuracy = static_cast<double>(correct) / static_cast<double>(test.size());
  m.mae = abs_err / static_cast<double>(test.size());
  m.auprc_value = auprc(scores, test.labels);
  return m;
}

void finalize_dp(const ExperimentConfig& cfg, const std::map<int, int>& rounds_taken,
                 MetricsReport& report) {
  report.per_round_epsilon = cfg.dp.sigma() > 0.0 ? cfg.dp.implied_epsilon() : 0.0;
  if (report.per_round_epsilon <= 0.0) return;  // noise disabled: nothing spent
  std::vector<std::pair<double, double>> per_client_totals;
  for (const auto& [id, count] : rounds_taken) {
    if (count == 0) continue;
    const std::vector<std::pair<double, double>> spent(
        count, {report.per_round_epsilon, cfg.dp.delta_dp});
    per_client_totals.push_back(dp_account(spent, DpMode::per_client_sequential));
  }
  if (per_client_totals.empty()) return;
  const auto [eps, del] =
      dp_account(per_client_totals, DpMode::across_disjoint_clients);
  report.epsilon_total = eps;
  report.delta_total = del;
}

void finalize_phi_reweightings(int rounds, double gamma_ema, double lambda_decay,
                               const std::vector<std::map<int, double>>& phi_history,
                               MetricsReport& report) {
  const Vec omega = time_decay_weights(rounds, lambda_decay);
  for (int t = 0; t < rounds; ++t) {
    for (const auto& [id, phi] : phi_history[t]) {
      report.phi_round_sum[id] += phi;
      report.phi_eq16[id] += omega[t] * phi;
      report.phi_eq26[id] += std::pow(gamma_ema, rounds - 1 - t) * phi;
    }
  }
}

}  // namespace

World build_world(const ExperimentConfig& cfg) {
  cfg.validate();
  World w;
  const LabeledDataset master =
      gen_rare_event_dataset(cfg.data.n_samples, cfg.data.n_features,
                             cfg.data.positive_rate, cfg.data.cluster_noise,
                             derive_seed(cfg.seed, kSeedMaster));
  const std::size_t n = master.size();
  const std::size_t n_test =
      static_cast<std::size_t>(std::llround(cfg.data.test_fraction * n));
  const std::size_t n_val =
      static_cast<std::size_t>(std::llround(cfg.data.val_fraction * n));
  const std::size_t n_vpool =
      static_cast<std::size_t>(std::llround(cfg.data.validator_pool_fraction * n));
  if (n_test + n_val + n_vpool >= n)
    throw std::invalid_argument("harness: splits leave no client data");

  w.test_set = take_rows(master, 0, n_test);
  const LabeledDataset val_pool = take_rows(master, n_test, n_test + n_val);
  const LabeledDataset validator_pool =
      take_rows(master, n_test + n_val, n_test + n_val + n_vpool);
  const LabeledDataset client_pool = take_rows(master, n_test + n_val + n_vpool, n);

  if (w.test_set.positive_count() == 0 ||
      w.test_set.positive_count() == w.test_set.size())
    throw std::runtime_error("harness: degenerate test split, change seed");

  w.scenarios = build_scenarios(val_pool, cfg.data.scenario_count, {},
                                derive_seed(cfg.seed, kSeedScenarios));
  w.val_pool_size = w.scenarios.total_size();

  const auto shards =
      dirichlet_partition(client_pool, cfg.n_clients, cfg.data.dirichlet_alpha,
                          cfg.data.lognormal_sigma, derive_seed(cfg.seed, kSeedPartition));

  // Behavior assignment: malicious first, then honest-low among the rest.
  std::vector<int> ids(cfg.n_clients);
  std::iota(ids.begin(), ids.end(), 0);
  Rng brng(derive_seed(cfg.seed, kSeedBehaviors));
  brng.shuffle(ids);
  const int n_mal =
      cfg.attack == AttackKind::none
          ? 0
          : static_cast<int>(std::llround(cfg.malicious_frac * cfg.n_clients));
  const int n_low = static_cast<int>(
      std::llround(cfg.honest_low_frac * (cfg.n_clients - n_mal)));
  std::map<int, BehaviorKind> kinds;
  for (int i = 0; i < cfg.n_clients; ++i) {
    BehaviorKind kind = BehaviorKind::honest_high;
    if (i < n_mal)
      kind = cfg.attack == AttackKind::fr ? BehaviorKind::free_rider
                                          : BehaviorKind::poisoner;
    else if (i < n_mal + n_low)
      kind = BehaviorKind::honest_low;
    kinds[ids[i]] = kind;
  }

  w.clients.resize(cfg.n_clients);
  for (int id = 0; id < cfg.n_clients; ++id) {
    ClientProfile p;
    p.id = id;
    p.kind = kinds.at(id);
    p.data = shards[id];
    if (p.kind == BehaviorKind::honest_low)
      p.data = corrupt_labels(p.data, p.behavior.honest_low_label_noise,
                              derive_seed(cfg.seed, kSeedLowNoise, id));
    p.rates = assign_quality(p.kind, derive_seed(cfg.seed, kSeedQuality, id));
    p.feature_summary = unit_mean_summary(p.data);
    p.behavior.flip_frac = cfg.flip_frac;
    w.clients[id] = std::move(p);
    w.behaviors[id] = kinds.at(id);
  }

  if (validator_pool.size() < static_cast<std::size_t>(cfg.validator_count))
    throw std::invalid_argument("harness: validator pool too small");
  w.validators.resize(cfg.validator_count);
  for (int v = 0; v < cfg.validator_count; ++v) {
    Validator val;
    val.id = v;
    val.stake = 1.0;
    val.byzantine = v >= cfg.validator_count - cfg.byzantine_validators;
    for (std::size_t i = v; i < validator_pool.size();
         i += static_cast<std::size_t>(cfg.validator_count)) {
      val.shard.features.push_back(validator_pool.features[i]);
      val.shard.labels.push_back(validator_pool.labels[i]);
    }
    w.validators[v] = std::move(val);
  }

  w.initial_model = ModelParams::zeros(cfg.train.arch, cfg.data.n_features,
                                       cfg.train.arch == Arch::mlp ? cfg.train.mlp_hidden : 0);
  if (cfg.train.arch == Arch::mlp) {
    Rng irng(derive_seed(cfg.seed, kSeedInit));
    for (double& x : w.initial_model.weights) x = irng.normal(0.0, 0.1);
  }
  return w;
}

MetricsReport run_experiment(const ExperimentConfig& cfg) {
  World w = build_world(cfg);
  const Committee committee(w.validators, derive_seed(cfg.seed, kSeedSecret),
                            cfg.consensus);
  std::map<int, double> stakes;
  for (const auto& v : committee.validators()) stakes[v.id] = v.stake;
  const double total_stake = committee.total_stake();
  const std::size_t dim = w.initial_model.dim();
  const TrainParams tparams{cfg.train.lr, cfg.train.local_epochs, cfg.train.batch_size};

  MetricsReport report;
  report.behaviors = w.behaviors;

  ModelParams theta = w.initial_model;
  std::map<int, double> phi_accum;
  std::vector<std::vector<UpdateDelta>> histories(cfg.n_clients);
  std::vector<std::map<int, double>> phi_history(cfg.rounds);
  std::map<int, int> rounds_taken;

  for (int t = 0; t < cfg.rounds; ++t) {
    const std::vector<int> participants = sample_participants(
        cfg.n_clients, cfg.participation_frac,
        derive_seed(cfg.seed, kSeedParticipants, static_cast<std::uint64_t>(t)));

    // Client fan-out: actual uploads plus honest counterfactuals for the
    // ground-truth-malicious participants (needed by the deviation monitor).
    std::vector<UpdateDelta> upload_slots(participants.size());
    std::vector<UpdateDelta> honest_slots(participants.size());
    parallel_for(participants.size(), [&](std::size_t k) {
      const int id = participants[k];
      const ClientProfile& prof = w.clients[id];
      upload_slots[k] = behave(prof, theta, t, histories[id], tparams, cfg.dp, cfg.seed);
      if (is_malicious(prof.kind)) {
        ClientProfile honest = prof;
        honest.kind = BehaviorKind::honest_high;
        honest_slots[k] = behave(honest, theta, t, {}, tparams, cfg.dp, cfg.seed);
      }
    });
    std::map<int, UpdateDelta> uploads;
    std::map<int, UpdateDelta> honest_uploads;
    for (std::size_t k = 0; k < participants.size(); ++k) {
      const int id = participants[k];
      uploads[id] = upload_slots[k];
      histories[id].push_back(upload_slots[k]);
      rounds_taken[id] += 1;
      honest_uploads[id] = is_malicious(w.clients[id].kind) ? honest_slots[k]
                                                            : upload_slots[k];
    }

    // Stage 2: stratified validation and grouped Shapley.
    const ScenarioSet stratified = stratify_validation(
        w.scenarios, cfg.approx.rho_neg,
        derive_seed(cfg.seed, kSeedStratify, static_cast<std::uint64_t>(t)));
    const RoundShapleyResult rs = round_shapley(
        theta, uploads, stratified, cfg.approx,
        derive_seed(cfg.seed, kSeedShapley, static_cast<std::uint64_t>(t)));
    phi_accum = accumulate(phi_accum, rs.phi_hat, cfg.approx.gamma_ema);
    phi_history[t] = rs.phi_hat;
    for (const auto& p : rs.profiles) {
      report.shapley_rows.push_back({t, p.client_id, p.eta,
                                     rs.phi_hat.at(p.client_id),
                                     phi_accum.at(p.client_id)});
    }

    // Stage 3: votes, admission, signing, aggregation, ledger.
    std::vector<int> vote_slots(participants.size() * committee.validators().size());
    parallel_for(vote_slots.size(), [&](std::size_t k) {
      const std::size_t ci = k / committee.validators().size();
      const std::size_t vi = k % committee.validators().size();
      vote_slots[k] = validator_vote(committee.validators()[vi],
                                     uploads.at(participants[ci]), theta,
                                     cfg.dp.clip_bound, cfg.consensus.loss_margin);
    });
    std::map<int, std::map<int, int>> bits;
    for (std::size_t ci = 0; ci < participants.size(); ++ci)
      for (std::size_t vi = 0; vi < committee.validators().size(); ++vi)
        bits[participants[ci]][committee.validators()[vi].id] =
            vote_slots[ci * committee.validators().size() + vi];

    const std::map<int, double> weighted =
        weighted_votes(bits, stakes, phi_accum, cfg.consensus.psi);
    const std::vector<int> admitted =
        admission(weighted, total_stake, cfg.consensus.zeta);

    std::vector<const Vec*> admitted_updates;
    admitted_updates.reserve(admitted.size());
    for (int id : admitted) admitted_updates.push_back(&uploads.at(id).delta);
    const Hash32 digest = block_digest(static_cast<std::uint64_t>(t), admitted,
                                       admitted_updates);
    const auto sig = threshold_sign(committee, digest, cfg.consensus.tau_sign);

    RoundMetrics rm;
    rm.round = t;
    rm.participants = static_cast<int>(participants.size());
    rm.admitted = static_cast<int>(admitted.size());
    rm.eval_count = rs.eval_count;
    rm.grouped_bound = rs.grouped_bound;
    rm.naive_bound = static_cast<std::uint64_t>(cfg.approx.k_perm) *
                     participants.size() * w.val_pool_size;

    if (!sig.has_value()) {
      rm.aborted = true;  // signing quorum failed: model unchanged, no block
    } else {
      const AggregateResult agg =
          shapley_aggregate(admitted, uploads, phi_accum, cfg.consensus.psi,
                            cfg.consensus.eps_agg, cfg.dp.clip_bound, dim);
      double weight_sum = 0.0;
      for (const auto& [id, wgt] : agg.weights) {
        if (wgt < 0.0) rm.weights_ok = false;
        weight_sum += wgt;
      }
      if (weight_sum > 1.0 + 1e-12) rm.weights_ok = false;

      const AggregateResult agg_honest =
          shapley_aggregate(admitted, honest_uploads, phi_accum, cfg.consensus.psi,
                            cfg.consensus.eps_agg, cfg.dp.clip_bound, dim);
      double alpha_t = 0.0;
      for (int id : admitted)
        if (is_malicious(w.clients[id].kind)) alpha_t += agg.weights.at(id);
      const DeviationReport dev =
          deviation_report(agg.delta, agg_honest.delta, alpha_t, cfg.dp.clip_bound);

      rm.alpha_t = alpha_t;
      rm.deviation = dev.measured;
      rm.deviation_bound = dev.bound;
      rm.deviation_ok = dev.ok;
      rm.update_norm = l2_norm(agg.delta);
      rm.norm_ok = rm.update_norm <= cfg.dp.clip_bound + 1e-9;

      theta = apply_update(theta, agg.delta, cfg.train.eta_server);

      Block block;
      block.round = static_cast<std::uint64_t>(t);
      block.admitted = admitted;
      block.msg_digest = digest;
      block.signature = *sig;
      block.prev_hash = report.ledger.size() == 0 ? Hash32{}
                                                  : report.ledger.blocks().back().block_hash;
      block.model_hash = model_digest(theta);
      for (int id : admitted) block.updates.push_back(uploads.at(id).delta);
      block.block_hash = block.compute_hash();
      report.ledger.append(std::move(block));
    }

    const TestMetrics tm = evaluate_model(theta, w.test_set);
    rm.accuracy = tm.accuracy;
    rm.mae = tm.mae;
    rm.auprc = tm.auprc_value;

    if (!rm.deviation_ok || !rm.weights_ok || !rm.norm_ok ||
        rm.eval_count > rm.grouped_bound)
      report.monitors_ok = false;
    report.rounds.push_back(rm);
  }

  report.final_phi = phi_accum;
  finalize_phi_reweightings(cfg.rounds, cfg.approx.gamma_ema,
                            cfg.valuation.lambda_decay, phi_history, report);
  finalize_dp(cfg, rounds_taken, report);
  return report;
}

MetricsReport run_fedavg(const ExperimentConfig& cfg) {
  World w = build_world(cfg);
  const std::size_t dim = w.initial_model.dim();
  const TrainParams tparams{cfg.train.lr, cfg.train.local_epochs, cfg.train.batch_size};
  // FedAvg applies neither clipping nor noise; the huge bound makes the
  // shared client pipeline a no-op pass-through.
  DpConfig raw_dp = cfg.dp;
  raw_dp.noise_multiplier = 0.0;
  raw_dp.per_round_epsilon = 0.0;
  raw_dp.clip_bound = 1e30;

  MetricsReport report;
  report.behaviors = w.behaviors;
  ModelParams theta = w.initial_model;
  std::vector<std::vector<UpdateDelta>> histories(cfg.n_clients);

  for (int t = 0; t < cfg.rounds; ++t) {
    const std::vector<int> participants = sample_participants(
        cfg.n_clients, cfg.participation_frac,
        derive_seed(cfg.seed, kSeedParticipants, static_cast<std::uint64_t>(t)));

    std::vector<UpdateDelta> upload_slots(participants.size());
    parallel_for(participants.size(), [&](std::size_t k) {
      const int id = participants[k];
      upload_slots[k] = behave(w.clients[id], theta, t, histories[id], tparams,
                               raw_dp, cfg.seed);
    });

    double n_total = 0.0;
    for (int id : participants) n_total += static_cast<double>(w.clients[id].data.size());
    Vec delta(dim, 0.0);
    for (std::size_t k = 0; k < participants.size(); ++k) {
      const int id = participants[k];
      histories[id].push_back(upload_slots[k]);
      const double wgt = static_cast<double>(w.clients[id].data.size()) / n_total;
      axpy(wgt, upload_slots[k].delta, delta);
    }
    theta = apply_update(theta, delta, cfg.train.eta_server);

    RoundMetrics rm;
    rm.round = t;
    rm.participants = static_cast<int>(participants.size());
    rm.admitted = static_cast<int>(participants.size());
    rm.update_norm = l2_norm(delta);
    const TestMetrics tm = evaluate_model(theta, w.test_set);
    rm.accuracy = tm.accuracy;
    rm.mae = tm.mae;
    rm.auprc = tm.auprc_value;
    report.rounds.push_back(rm);
  }
  return report;
}

void emit_report(const MetricsReport& report, const ExperimentConfig& cfg,
                 const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);

  {
    std::ofstream out(out_dir / "metrics.csv");
    if (!out) throw std::runtime_error("cannot write metrics.csv");
    out << "round,accuracy,mae,auprc,update_norm,alpha_t,deviation,deviation_bound,"
           "deviation_ok,eval_count,grouped_bound,naive_bound,participants,admitted,"
           "aborted\n";
    for (const auto& r : report.rounds) {
      out << r.round << ',' << format_double(r.accuracy) << ',' << format_double(r.mae)
          << ',' << format_double(r.auprc) << ',' << format_double(r.update_norm) << ','
          << format_double(r.alpha_t) << ',' << format_double(r.deviation) << ','
          << format_double(r.deviation_bound) << ',' << (r.deviation_ok ? 1 : 0) << ','
          << r.eval_count << ',' << r.grouped_bound << ',' << r.naive_bound << ','
          << r.participants << ',' << r.admitted << ',' << (r.aborted ? 1 : 0) << '\n';
    }
  }

  {
    std::ofstream out(out_dir / "shapley.csv");
    if (!out) throw std::runtime_error("cannot write shapley.csv");
    out << "round,client_id,eta,phi_hat,phi_accum\n";
    for (const auto& row : report.shapley_rows) {
      out << row.round << ',' << row.client_id << ',' << format_double(row.eta) << ','
          << format_double(row.phi_hat) << ',' << format_double(row.phi_accum) << '\n';
    }
  }

  report.ledger.save(out_dir / "ledger.ndjson");

  {
    nlohmann::json manifest;
    manifest["version"] = kVersionString;
    manifest["config"] = nlohmann::json::parse(config_to_json_string(cfg));
    nlohmann::json behaviors;
    for (const auto& [id, kind] : report.behaviors)
      behaviors[std::to_string(id)] = to_string(kind);
    manifest["behaviors"] = behaviors;
    manifest["dp"] = {{"epsilon_total", report.epsilon_total},
                      {"delta_total", report.delta_total},
                      {"per_round_epsilon", report.per_round_epsilon},
                      {"sigma", cfg.dp.sigma()}};
    manifest["monitors_ok"] = report.monitors_ok;
    manifest["ledger_length"] = report.ledger.size();
    // Offline re-weightings of the per-round values, alongside the EMA.
    nlohmann::json phi;
    for (const auto& [id, v] : report.final_phi) phi["ema"][std::to_string(id)] = v;
    for (const auto& [id, v] : report.phi_round_sum)
      phi["round_sum"][std::to_string(id)] = v;
    for (const auto& [id, v] : report.phi_eq16)
      phi["time_decay"][std::to_string(id)] = v;
    for (const auto& [id, v] : report.phi_eq26)
      phi["geometric"][std::to_string(id)] = v;
    manifest["phi"] = phi;
    // Empirical Shapley mass reaching ground-truth-malicious clients; the
    // analysis assumes this stays small but the run only measures it.
    double mal_max = 0.0;
    int mal_count = 0;
    for (const auto& [id, kind] : report.behaviors) {
      if (kind != BehaviorKind::free_rider && kind != BehaviorKind::poisoner) continue;
      ++mal_count;
      if (const auto it = report.final_phi.find(id); it != report.final_phi.end())
        mal_max = std::max(mal_max, it->second);
    }
    if (mal_count > 0)
      manifest["malicious_phi"] = {{"count", mal_count}, {"max_final", mal_max}};
    std::ofstream out(out_dir / "manifest.json");
    if (!out) throw std::runtime_error("cannot write manifest.json");
    out << manifest.dump(2) << '\n';
  }
}

EvalCounters count_evaluations(const MetricsReport& report) {
  EvalCounters c;
  for (const auto& r : report.rounds) {
    c.naive_bound += r.naive_bound;
    c.grouped_bound += r.grouped_bound;
    c.actual += r.eval_count;
  }
  return c;
}

}  // namespace sichainfl
