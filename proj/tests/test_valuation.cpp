#include <cmath>
#include <functional>

#include "doctest.h"
#include "sichainfl/datagen.hpp"
#include "sichainfl/valuation.hpp"

using namespace sichainfl;

namespace {

// Random game over subsets encoded by sorted member list.
std::function<double(const std::vector<int>&)> random_game(std::uint64_t seed) {
  auto table = std::make_shared<std::map<std::vector<int>, double>>();
  auto rng = std::make_shared<Rng>(seed);
  return [table, rng](const std::vector<int>& s) {
    std::vector<int> key = s;
    std::sort(key.begin(), key.end());
    auto it = table->find(key);
    if (it == table->end()) it = table->emplace(key, rng->uniform()).first;
    return it->second;
  };
}

}  // namespace

TEST_CASE("auprc") {
  SUBCASE("perfect ranking scores 1") {
    CHECK(auprc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}) == doctest::Approx(1.0));
  }
  SUBCASE("hand-enumerated PR curve value") {
    // Thresholds descending: (0.5, 1) then (1, 2/3); trapezoid from (0,1).
    CHECK(auprc({0.9, 0.8, 0.7, 0.6}, {1, 0, 1, 0}) ==
          doctest::Approx(11.0 / 12.0).epsilon(1e-12));
  }
  SUBCASE("reversing a perfect ranking strictly lowers the area") {
    const double forward = auprc({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0});
    const double reversed = auprc({0.1, 0.2, 0.8, 0.9}, {1, 1, 0, 0});
    CHECK(reversed < forward);
  }
  SUBCASE("no positives is an error") {
    CHECK_THROWS_WITH_AS(auprc({0.5, 0.4}, {0, 0}), "undefined AUPRC",
                         std::invalid_argument);
  }
}

TEST_CASE("normalized_auprc") {
  CHECK(normalized_auprc(0.1, 0.1) == doctest::Approx(0.0));
  CHECK(normalized_auprc(1.0, 0.1) == doctest::Approx(1.0));
  CHECK(normalized_auprc(0.55, 0.1) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK_THROWS(normalized_auprc(0.5, 0.0));
  CHECK_THROWS(normalized_auprc(0.5, 1.0));
}

TEST_CASE("mcc_budgeted") {
  SUBCASE("perfect classifier reaches 1 under a feasible budget") {
    CHECK(mcc_budgeted({0.9, 0.8, 0.2, 0.1}, {1, 1, 0, 0}, {0.5}, 0.5) ==
          doctest::Approx(1.0));
  }
  SUBCASE("no feasible threshold floors at 0") {
    // Every grid threshold puts all negatives above it: FPR = 1 > budget.
    CHECK(mcc_budgeted({0.9, 0.9, 0.9, 0.9}, {1, 1, 0, 0}, {0.5}, 0.1) ==
          doctest::Approx(0.0));
  }
  SUBCASE("hand-computed confusion at tau = 0.5") {
    // TP=2 FP=0 FN=0 TN=2 -> MCC 1 -> normalized 1.
    CHECK(mcc_budgeted({0.9, 0.6, 0.4, 0.1}, {1, 1, 0, 0}, {0.5}, 0.5) ==
          doctest::Approx(1.0));
  }
  SUBCASE("empty grid is an error") {
    CHECK_THROWS(mcc_budgeted({0.9, 0.1}, {1, 0}, {}, 0.5));
  }
}

TEST_CASE("rare_event_utility") {
  CHECK(rare_event_utility(0.3, 0.9, 1.0) == doctest::Approx(0.3));
  CHECK(rare_event_utility(0.3, 0.9, 0.0) == doctest::Approx(0.9));
  CHECK(rare_event_utility(0.64, 0.25, 0.5) == doctest::Approx(0.4).epsilon(1e-12));
  SUBCASE("zero base with zero exponent uses the 0^0 := 1 convention") {
    CHECK(rare_event_utility(0.0, 0.5, 0.0) == doctest::Approx(0.5));
  }
  SUBCASE("negative normalized AUPRC clamps to zero utility") {
    CHECK(rare_event_utility(-0.4, 0.5, 1.0) == doctest::Approx(0.0));
  }
}

TEST_CASE("acc_utility") {
  CHECK(acc_utility({0.37}, {1.0}, 0.0) == doctest::Approx(0.37).epsilon(1e-12));
  CHECK(acc_utility({0.25, 0.25}, {0.5, 0.5}, 0.0) ==
        doctest::Approx(0.25).epsilon(1e-12));
  CHECK(acc_utility({1.0, 0.0}, {0.5, 0.5}, 1e-8) ==
        doctest::Approx(1e-4).epsilon(1e-6));
}

TEST_CASE("diversity") {
  std::map<int, Vec> z;
  z[1] = {1.0, 0.0};
  z[2] = {1.0, 0.0};
  z[3] = {-1.0, 0.0};
  CHECK(diversity({1}, z) == 0.0);
  CHECK(diversity({1, 2}, z) == doctest::Approx(0.0));
  CHECK(diversity({1, 3}, z) == doctest::Approx(1.0));
  z[4] = {0.0, 0.0};
  CHECK_THROWS_WITH_AS(diversity({1, 4}, z), "degenerate summary",
                       std::invalid_argument);
}

TEST_CASE("cleanliness") {
  CHECK(cleanliness({0.0, 0.0, 0.0}, 1, 1, 1) == doctest::Approx(1.0));
  CHECK(cleanliness({0.5, 0.25, 0.25}, 1, 1, 1) ==
        doctest::Approx(0.36787944117144233).epsilon(1e-12));
  CHECK(cleanliness({1.0, 1.0, 1.0}, 1, 1, 1) ==
        doctest::Approx(0.049787068367863944).epsilon(1e-12));
}

TEST_CASE("label_credibility") {
  SUBCASE("constant 0.5 prediction on balanced labels with gamma4 = 2") {
    LabeledDataset ds;
    ds.features = {{1.0}, {2.0}, {3.0}, {4.0}};
    ds.labels = {1, 0, 1, 0};
    const ModelParams m = ModelParams::zeros(Arch::logistic, 1);
    CHECK(label_credibility(ds, m, 2.0) ==
          doctest::Approx(0.6065306597126334).epsilon(1e-12));
  }
  SUBCASE("a model matching every label gives credibility near 1") {
    LabeledDataset ds;
    ds.features = {{-3.0}, {3.0}};
    ds.labels = {0, 1};
    ModelParams m = ModelParams::zeros(Arch::logistic, 1);
    m.weights = {20.0, 0.0};
    CHECK(label_credibility(ds, m, 1.0) == doctest::Approx(1.0).epsilon(1e-9));
  }
  SUBCASE("flipping the labels of a well-fit client lowers credibility") {
    LabeledDataset ds = gen_rare_event_dataset(100, 2, 0.3, 0.3, 5);
    ModelParams m = ModelParams::zeros(Arch::logistic, 2);
    const UpdateDelta d = local_train(m, ds, 0.5, 20, 6);
    for (std::size_t j = 0; j < d.delta.size(); ++j) m.weights[j] += d.delta[j];
    const LabeledDataset flipped = corrupt_labels(ds, 1.0, 7);
    CHECK(label_credibility(flipped, m, 1.0) < label_credibility(ds, m, 1.0));
  }
}

TEST_CASE("data_quality") {
  std::map<int, std::pair<double, double>> q;
  q[1] = {1.0, 0.7};
  q[2] = {0.5, 1.0};
  CHECK(data_quality({}, q) == 0.0);
  CHECK(data_quality({1}, q) == doctest::Approx(0.7));
  q[3] = {1.0, 0.5};
  CHECK(data_quality({2, 3}, q) == doctest::Approx(0.75).epsilon(1e-12));
}

TEST_CASE("coalition_value selector weights") {
  // Small real context: base model plus two trained client updates.
  const LabeledDataset pool = gen_rare_event_dataset(400, 3, 0.25, 0.4, 41);
  CoalitionContext ctx;
  ctx.base_model = ModelParams::zeros(Arch::logistic, 3);
  ctx.scenarios = build_scenarios(pool, 2, {}, 42);
  const auto shards = dirichlet_partition(pool, 2, 5.0, 0.0, 43);
  for (int id = 0; id < 2; ++id) {
    UpdateDelta d = local_train(ctx.base_model, shards[id], 0.2, 3, 44 + id);
    d.client_id = id;
    ctx.client_updates[id] = d;
    ctx.feature_summaries[id] = {1.0, 0.0, 0.0};
    ctx.quality[id] = {1.0, 0.7};
  }

  ValuationConfig cfg;
  SUBCASE("lambda = (1,0,0) selects the accuracy term") {
    cfg.lambda_acc = 1.0;
    cfg.lambda_div = 0.0;
    cfg.lambda_qua = 0.0;
    const double v = coalition_value({0}, ctx, cfg);
    // Recompute the accuracy term directly.
    ModelParams coal = ctx.base_model;
    axpy(1.0, ctx.client_updates.at(0).delta, coal.weights);
    Vec v_r;
    for (std::size_t r = 0; r < ctx.scenarios.count(); ++r) {
      const auto& sc = ctx.scenarios.scenarios[r];
      const Vec scores = predict_proba_batch(coal, sc.features);
      const double a = normalized_auprc(auprc(scores, sc.labels), ctx.scenarios.pi[r]);
      const double m = mcc_budgeted(scores, sc.labels, cfg.effective_grid(), cfg.rho_fpr);
      v_r.push_back(rare_event_utility(a, m, cfg.alpha_blend));
    }
    CHECK(v == doctest::Approx(acc_utility(v_r, cfg.effective_beta(2), cfg.eps_stab))
                   .epsilon(1e-12));
  }
  SUBCASE("lambda = (0,1,0) on a singleton is zero") {
    cfg.lambda_acc = 0.0;
    cfg.lambda_div = 1.0;
    cfg.lambda_qua = 0.0;
    CHECK(coalition_value({0}, ctx, cfg) == doctest::Approx(0.0));
  }
  SUBCASE("lambda = (0,0,1) on a singleton equals its C*L") {
    cfg.lambda_acc = 0.0;
    cfg.lambda_div = 0.0;
    cfg.lambda_qua = 1.0;
    CHECK(coalition_value({0}, ctx, cfg) == doctest::Approx(0.7).epsilon(1e-12));
  }
}

TEST_CASE("exact_shapley") {
  SUBCASE("two-player textbook game") {
    const auto v = [](const std::vector<int>& s) {
      if (s.empty()) return 0.0;
      if (s.size() == 2) return 1.0;
      return 0.2;
    };
    const auto phi = exact_shapley(v, {1, 2});
    CHECK(phi.at(1) == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(phi.at(2) == doctest::Approx(0.5).epsilon(1e-12));
  }
  SUBCASE("dummy player gets exactly zero") {
    auto base = random_game(3);
    const auto v = [&base](const std::vector<int>& s) {
      std::vector<int> without;
      for (int id : s)
        if (id != 9) without.push_back(id);
      return base(without);
    };
    const auto phi = exact_shapley(v, {0, 1, 2, 9});
    CHECK(phi.at(9) == 0.0);
  }
  SUBCASE("additive games resolve to the per-player constants") {
    const Vec c = {0.3, -0.1, 0.7, 0.25};
    const auto v = [&c](const std::vector<int>& s) {
      double sum = 0.0;
      for (int id : s) sum += c[static_cast<std::size_t>(id)];
      return sum;
    };
    const auto phi = exact_shapley(v, {0, 1, 2, 3});
    for (int i = 0; i < 4; ++i)
      CHECK(phi.at(i) == doctest::Approx(c[i]).epsilon(1e-12));
  }
  SUBCASE("efficiency on random games") {
    for (std::uint64_t seed = 0; seed < 30; ++seed) {
      auto v = random_game(seed);
      std::vector<int> players;
      for (int i = 0; i < 2 + static_cast<int>(seed % 5); ++i) players.push_back(i);
      const auto phi = exact_shapley(v, players);
      double sum = 0.0;
      for (const auto& [id, p] : phi) sum += p;
      CHECK(std::abs(sum - (v(players) - v({}))) < 1e-9);
    }
  }
  SUBCASE("linearity on random games") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      auto v1 = random_game(100 + seed);
      auto v2 = random_game(200 + seed);
      const std::vector<int> players = {0, 1, 2, 3, 4};
      const auto sum_fn = [&](const std::vector<int>& s) { return v1(s) + v2(s); };
      const auto phi1 = exact_shapley(v1, players);
      const auto phi2 = exact_shapley(v2, players);
      const auto phi12 = exact_shapley(sum_fn, players);
      for (int id : players)
        CHECK(std::abs(phi12.at(id) - phi1.at(id) - phi2.at(id)) < 1e-9);
    }
  }
  SUBCASE("player cap") {
    std::vector<int> players(21);
    std::iota(players.begin(), players.end(), 0);
    CHECK_THROWS_WITH_AS(
        exact_shapley([](const std::vector<int>&) { return 0.0; }, players),
        "use approximation", std::invalid_argument);
  }
}

TEST_CASE("fused component ranges under fuzzing") {
  Rng rng(31);
  for (int trial = 0; trial < 200; ++trial) {
    // Diversity of random unit-ish vectors stays in [0,1].
    std::map<int, Vec> z;
    std::vector<int> coalition;
    const int n = 2 + static_cast<int>(rng.uniform_int(0, 5));
    for (int i = 0; i < n; ++i) {
      Vec v = {rng.normal(), rng.normal(), rng.normal()};
      if (l2_norm(v) == 0.0) v = {1.0, 0.0, 0.0};
      z[i] = v;
      coalition.push_back(i);
    }
    const double div = diversity(coalition, z);
    CHECK(div >= 0.0);
    CHECK(div <= 1.0);

    // Data quality over (0,1] products stays in [0,1).
    std::map<int, std::pair<double, double>> q;
    for (int i = 0; i < n; ++i)
      q[i] = {rng.uniform(1e-6, 1.0), rng.uniform(1e-6, 1.0)};
    const double dq = data_quality(coalition, q);
    CHECK(dq >= 0.0);
    CHECK(dq < 1.0);

    // Blended rare-event utility of clamped inputs stays in [0,1].
    const double v_r = rare_event_utility(rng.uniform(-0.5, 1.5),
                                          rng.uniform(0.0, 1.0), rng.uniform());
    CHECK(v_r >= 0.0);
    CHECK(v_r <= 1.0);
  }
}

TEST_CASE("time_decay_weights") {
  SUBCASE("lambda = 0 is uniform") {
    const Vec w = time_decay_weights(4, 0.0);
    for (double x : w) CHECK(x == doctest::Approx(0.25).epsilon(1e-12));
  }
  SUBCASE("single round is the unit weight") {
    CHECK(time_decay_weights(1, 3.0) == Vec{1.0});
  }
  SUBCASE("T = 2 with lambda = ln 2 gives (1/3, 2/3)") {
    const Vec w = time_decay_weights(2, std::log(2.0));
    CHECK(w[0] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));
    CHECK(w[1] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  }
  SUBCASE("monotone non-decreasing and normalized") {
    Rng rng(9);
    for (int trial = 0; trial < 20; ++trial) {
      const int T = 1 + static_cast<int>(rng.uniform_int(1, 12));
      const double lambda = rng.uniform(0.0, 2.0);
      const Vec w = time_decay_weights(T, lambda);
      double sum = 0.0;
      for (int t = 0; t < T; ++t) {
        sum += w[t];
        if (t > 0) CHECK(w[t] >= w[t - 1]);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}
