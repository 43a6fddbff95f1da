#include <gtest/gtest.h>

#include "fedad/error.hpp"
#include "fedad/federation.hpp"
#include "testing.hpp"

using namespace fedad;
using fedad::testing::synthetic_dataset;

namespace {

ModelConfig small_config(ModelKind kind) {
  ModelConfig c;
  c.kind = kind;
  c.learning_rate = 1e-3;
  switch (kind) {
    case ModelKind::dae: c.latent_dim = 2; break;
    case ModelKind::dsebm: c.latent_dim = 8; break;
    case ModelKind::deepsvdd: c.svdd_output_features = 3; break;
    case ModelKind::neutralad:
      c.latent_dim = 6;
      c.neutralad_num_transforms = 3;
      break;
    case ModelKind::memae:
      c.latent_dim = 3;
      c.memae_memory_dim = 8;
      break;
  }
  return c;
}

DataSplit synthetic_split(std::size_t n, std::uint64_t seed) {
  return split(synthetic_dataset(n, 8, 0.1, seed), seed, 0.5);
}

class EveryKind : public ::testing::TestWithParam<ModelKind> {};

}  // namespace

TEST(FedAvg, Examples) {
  EXPECT_EQ(fedavg({{1, 2}, {3, 4}}, {5, 5}), (ParamVector{2, 3}));
  const ParamVector s{0.1, -7.25, 1e-300};
  EXPECT_EQ(fedavg({s, s, s}, {3, 1, 9}), s);
  EXPECT_EQ(fedavg({{0.0}, {4.0}}, {1, 3}), (ParamVector{3.0}));
}

TEST(FedAvg, SingleClientIsIdentity) {
  Rng rng(1);
  ParamVector p(100);
  for (auto& v : p) v = rng.normal() * 1e3;
  EXPECT_EQ(fedavg({p}, {17}), p);
}

TEST(FedAvg, ConvexAndCloseToWeightedMean) {
  Rng rng(2);
  for (int t = 0; t < 200; ++t) {
    const std::size_t k = 1 + rng.below(7), n = 1 + rng.below(20);
    std::vector<ParamVector> states(k, ParamVector(n));
    std::vector<std::size_t> w(k);
    for (auto& s : states)
      for (auto& v : s) v = rng.uniform(-5, 5);
    for (auto& x : w) x = 1 + rng.below(50);
    const auto avg = fedavg(states, w);
    double total = 0;
    for (auto x : w) total += static_cast<double>(x);
    for (std::size_t i = 0; i < n; ++i) {
      double lo = states[0][i], hi = states[0][i], mean = 0;
      for (std::size_t c = 0; c < k; ++c) {
        lo = std::min(lo, states[c][i]);
        hi = std::max(hi, states[c][i]);
        mean += static_cast<double>(w[c]) / total * states[c][i];
      }
      EXPECT_GE(avg[i], lo);
      EXPECT_LE(avg[i], hi);
      EXPECT_NEAR(avg[i], mean, 1e-12);
    }
  }
}

TEST(FedAvg, MismatchIsUsageError) {
  EXPECT_THROW(fedavg({{1, 2}, {3}}, {1, 1}), UsageError);
  EXPECT_THROW(fedavg({{1, 2}, {3, 4}}, {1}), UsageError);
  EXPECT_THROW(fedavg({}, {}), UsageError);
  EXPECT_THROW(fedavg({{1.0}}, {0}), UsageError);
}

TEST(Federation, BatchFallbackRule) {
  EXPECT_EQ(effective_batch_size(128, 2000), 128u);
  EXPECT_EQ(effective_batch_size(128, 100), 25u);
  EXPECT_EQ(effective_batch_size(128, 10), 8u);
  EXPECT_EQ(effective_batch_size(4, 10), 4u);
  EXPECT_EQ(effective_batch_size(1024, 613), 153u);
}

TEST(Federation, ConfigValidation) {
  FedConfig c;
  c.n_clients = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = FedConfig{};
  c.rounds = 0;
  EXPECT_THROW(c.validate(), ConfigError);
  c = FedConfig{};
  c.mu = -1;
  EXPECT_THROW(c.validate(), ConfigError);
  c = FedConfig{};
  c.client_seeds = {1, 2};
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(parse_aggregator("fedsgd"), ConfigError);
  EXPECT_EQ(parse_aggregator("FedProx"), Aggregator::fedprox);
  c = FedConfig{};
  c.mu = 0.5;
  EXPECT_EQ(c.effective_mu(), 0.0);
}

TEST(Federation, TwoClientsOneStepAverageTheirUpdates) {
  // Shards of 8 rows and batch 8: one local step per client.
  const auto ds = synthetic_dataset(16, 5, 0.0, 3);
  ModelConfig mc = small_config(ModelKind::dae);
  const ModelState global = build_model(mc, 5, 4);
  FedConfig cfg;
  cfg.n_clients = 2;
  cfg.local_epochs = 1;
  cfg.batch_size = 8;
  auto shards = partition(ds, 2, 5);
  Federation fed = make_federation(global, shards, cfg, 6);
  run_round(fed);

  std::vector<ParamVector> updated;
  for (std::size_t c = 0; c < 2; ++c) {
    ModelState local = global;
    local.optimizer.reset();
    std::vector<std::size_t> order(8);
    for (std::size_t i = 0; i < 8; ++i) order[i] = i;
    Rng rng(derive_seed(client_seed(cfg, 6, c), 0));
    rng.shuffle(std::span(order));
    train_step(local, shards[c].x.select_rows(order));
    updated.push_back(local.params);
  }
  for (std::size_t i = 0; i < global.params.size(); ++i) {
    EXPECT_NEAR(fed.global.params[i], 0.5 * (updated[0][i] + updated[1][i]), 1e-15);
  }
}

TEST_P(EveryKind, SingleClientMatchesCentralizedBitForBit) {
  const auto sp = synthetic_split(200, 7);
  const auto mc = small_config(GetParam());
  FedConfig cfg;
  cfg.n_clients = 1;
  cfg.local_epochs = 2;
  cfg.rounds = 3;
  cfg.batch_size = 16;
  const auto fl = run_training(mc, sp, cfg, 11);
  const auto central = train_centralized(mc, sp.train, 6, 16, 11);
  EXPECT_EQ(fl.model.params, central.model.params);
  EXPECT_EQ(fl.model.center, central.model.center);
}

TEST_P(EveryKind, FedProxWithZeroMuMatchesFedAvg) {
  const auto sp = synthetic_split(200, 8);
  const auto mc = small_config(GetParam());
  FedConfig cfg;
  cfg.n_clients = 3;
  cfg.local_epochs = 2;
  cfg.rounds = 2;
  cfg.batch_size = 16;
  const auto avg = run_training(mc, sp, cfg, 12);
  cfg.aggregator = Aggregator::fedprox;
  cfg.mu = 0.0;
  const auto prox = run_training(mc, sp, cfg, 12);
  EXPECT_EQ(avg.model.params, prox.model.params);
}

TEST_P(EveryKind, DeterministicAndSeedSensitive) {
  const auto sp = synthetic_split(120, 9);
  const auto mc = small_config(GetParam());
  FedConfig cfg;
  cfg.n_clients = 3;
  cfg.local_epochs = 1;
  cfg.rounds = 2;
  cfg.batch_size = 16;
  const auto a = run_training(mc, sp, cfg, 13);
  const auto b = run_training(mc, sp, cfg, 13);
  const auto c = run_training(mc, sp, cfg, 14);
  EXPECT_EQ(a.model.params, b.model.params);
  ASSERT_EQ(a.rounds.size(), b.rounds.size());
  for (std::size_t r = 0; r < a.rounds.size(); ++r) {
    EXPECT_EQ(a.rounds[r].client_losses, b.rounds[r].client_losses);
    EXPECT_EQ(a.rounds[r].global_norm, b.rounds[r].global_norm);
  }
  EXPECT_NE(a.model.params, c.model.params);
}

INSTANTIATE_TEST_SUITE_P(Models, EveryKind, ::testing::ValuesIn(kAllModelKinds),
                         [](const auto& info) { return std::string(to_string(info.param)); });

TEST(Federation, ParallelAndSerialClientsAgree) {
  const auto sp = synthetic_split(150, 10);
  const auto mc = small_config(ModelKind::memae);
  FedConfig cfg;
  cfg.n_clients = 4;
  cfg.local_epochs = 1;
  cfg.rounds = 2;
  cfg.batch_size = 8;
  const auto par = run_training(mc, sp, cfg, 15);
  cfg.parallel_clients = false;
  const auto ser = run_training(mc, sp, cfg, 15);
  EXPECT_EQ(par.model.params, ser.model.params);
}

TEST(Federation, ResetPolicyDiffersAfterFirstRound) {
  const auto sp = synthetic_split(120, 11);
  const auto mc = small_config(ModelKind::dae);
  FedConfig cfg;
  cfg.n_clients = 2;
  cfg.local_epochs = 1;
  cfg.rounds = 1;
  cfg.batch_size = 16;
  const auto p1 = run_training(mc, sp, cfg, 16);
  cfg.optimizer_policy = OptimizerPolicy::reset;
  const auto r1 = run_training(mc, sp, cfg, 16);
  EXPECT_EQ(p1.model.params, r1.model.params);
  cfg.rounds = 3;
  const auto r3 = run_training(mc, sp, cfg, 16);
  cfg.optimizer_policy = OptimizerPolicy::persist;
  const auto p3 = run_training(mc, sp, cfg, 16);
  EXPECT_NE(p3.model.params, r3.model.params);
}

TEST(Federation, ProxAnchorsFirstRoundMonotonically) {
  const auto sp = synthetic_split(200, 12);
  for (auto kind : {ModelKind::dae, ModelKind::deepsvdd}) {
    const auto mc = small_config(kind);
    double prev = std::numeric_limits<double>::infinity();
    for (double mu : {0.0, 0.01, 0.1, 1.0}) {
      FedConfig cfg;
      cfg.n_clients = 1;
      cfg.local_epochs = 10;
      cfg.batch_size = 16;
      cfg.aggregator = Aggregator::fedprox;
      cfg.mu = mu;
      ModelState global = build_model(mc, sp.train.n_features_encoded(), init_seed(17));
      if (kind == ModelKind::deepsvdd) init_svdd_center(global, sp.train.x);
      const ParamVector start = global.params;
      Federation fed = make_federation(global, partition(sp.train, 1, 3), cfg, 17);
      run_round(fed);
      const double dist = l2_distance_sq(fed.global.params, start);
      EXPECT_LE(dist, prev) << to_string(kind) << " mu " << mu;
      prev = dist;
    }
  }
}

TEST(Federation, ClientFailureNamesRoundAndClient) {
  const auto ds = synthetic_dataset(40, 4, 0.0, 13);
  ModelConfig mc = small_config(ModelKind::dae);
  ModelState global = build_model(mc, 4, 1);
  for (auto& v : global.params) v = 1e200;
  FedConfig cfg;
  cfg.n_clients = 2;
  cfg.local_epochs = 1;
  Federation fed = make_federation(global, partition(ds, 2, 1), cfg, 1);
  try {
    run_round(fed);
    FAIL() << "expected NumericError";
  } catch (const NumericError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("round 0, client 0"), std::string::npos) << msg;
    EXPECT_NE(msg.find("step 0"), std::string::npos) << msg;
  }
  EXPECT_EQ(fed.completed_rounds, 0u);
  EXPECT_EQ(fed.global.params.front(), 1e200);
}

TEST(Federation, WarningsForBudgetAndBatchReduction) {
  const auto sp = synthetic_split(100, 14);
  FedConfig cfg;
  cfg.n_clients = 3;
  cfg.local_epochs = 1;
  cfg.rounds = 1;
  cfg.batch_size = 128;
  const auto r = run_training(small_config(ModelKind::dae), sp, cfg, 1, std::size_t{20});
  bool budget = false, batch = false;
  for (const auto& w : r.warnings) {
    budget = budget || w.find("epoch budget") != std::string::npos;
    batch = batch || w.find("reduced to 8") != std::string::npos;
  }
  EXPECT_TRUE(budget);
  EXPECT_TRUE(batch);
  EXPECT_EQ(r.rounds.front().client_batch_sizes, (std::vector<std::size_t>{8, 8, 8}));
}

TEST(Federation, SvddCenterComesFromFullTrainSet) {
  const auto sp = synthetic_split(100, 15);
  const auto mc = small_config(ModelKind::deepsvdd);
  FedConfig cfg;
  cfg.n_clients = 3;
  cfg.local_epochs = 1;
  const auto r = run_training(mc, sp, cfg, 2);
  ModelState fresh = build_model(mc, sp.train.n_features_encoded(), init_seed(2));
  init_svdd_center(fresh, sp.train.x);
  EXPECT_EQ(r.model.center, fresh.center);
}

TEST(Federation, RoundLogJson) {
  RoundLog log;
  log.round = 2;
  log.client_losses = {0.5, 0.25};
  log.client_batch_sizes = {8, 8};
  log.global_norm = 3.0;
  const auto j = log.to_json();
  EXPECT_EQ(j.at("round").get<int>(), 2);
  EXPECT_EQ(j.at("client_losses").size(), 2u);
}

TEST(Federation, WrongShardCountIsUsageError) {
  const auto ds = synthetic_dataset(20, 4, 0.0, 1);
  FedConfig cfg;
  cfg.n_clients = 3;
  EXPECT_THROW(make_federation(build_model(small_config(ModelKind::dae), 4, 1), partition(ds, 2, 1), cfg, 1),
               UsageError);
}
