#include "fedad/federation.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <exception>
#include <numeric>
#include <string>

#include "fedad/error.hpp"
#include "fedad/random.hpp"

namespace fedad {

const char* to_string(Aggregator a) { return a == Aggregator::fedavg ? "fedavg" : "fedprox"; }

Aggregator parse_aggregator(std::string_view s) {
  std::string l(s);
  for (auto& c : l) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  if (l == "fedavg") return Aggregator::fedavg;
  if (l == "fedprox") return Aggregator::fedprox;
  throw ConfigError("unknown aggregator '" + std::string(s) + "' (expected fedavg or fedprox)");
}

const char* to_string(OptimizerPolicy p) { return p == OptimizerPolicy::persist ? "persist" : "reset"; }

OptimizerPolicy parse_optimizer_policy(std::string_view s) {
  if (s == "persist") return OptimizerPolicy::persist;
  if (s == "reset") return OptimizerPolicy::reset;
  throw ConfigError("unknown optimizer policy '" + std::string(s) + "' (expected persist or reset)");
}

void FedConfig::validate() const {
  if (n_clients < 1) throw ConfigError("n_clients must be >= 1");
  if (rounds < 1) throw ConfigError("rounds must be >= 1");
  if (local_epochs < 1) throw ConfigError("local_epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(mu >= 0.0) || !std::isfinite(mu)) throw ConfigError("mu must be a finite value >= 0");
  if (!client_seeds.empty() && client_seeds.size() != n_clients) {
    throw ConfigError("client_seeds has " + std::to_string(client_seeds.size()) + " entries for " +
                      std::to_string(n_clients) + " clients");
  }
}

nlohmann::json RoundLog::to_json() const {
  return {{"round", round},
          {"client_losses", client_losses},
          {"client_batch_sizes", client_batch_sizes},
          {"global_norm", global_norm},
          {"wall_seconds", wall_seconds}};
}

ParamVector fedavg(const std::vector<ParamVector>& states, const std::vector<std::size_t>& weights) {
  if (states.empty()) throw UsageError("fedavg: no client states");
  if (states.size() != weights.size()) {
    throw UsageError("fedavg: " + std::to_string(states.size()) + " states but " +
                     std::to_string(weights.size()) + " weights");
  }
  const std::size_t n = states.front().size();
  for (std::size_t c = 1; c < states.size(); ++c) {
    if (states[c].size() != n) {
      throw UsageError("fedavg: layout mismatch, client " + std::to_string(c) + " has " +
                       std::to_string(states[c].size()) + " parameters, client 0 has " + std::to_string(n));
    }
  }
  const double total = static_cast<double>(std::accumulate(weights.begin(), weights.end(), std::size_t{0}));
  if (total <= 0.0) throw UsageError("fedavg: weights sum to zero");

  ParamVector out(states.front());
  for (std::size_t i = 0; i < n; ++i) {
    const double base = states[0][i];
    double acc = 0.0, lo = base, hi = base;
    for (std::size_t c = 1; c < states.size(); ++c) {
      const double v = states[c][i];
      acc += static_cast<double>(weights[c]) / total * (v - base);
      lo = std::min(lo, v);
      hi = std::max(hi, v);
    }
    out[i] = std::clamp(base + acc, lo, hi);
  }
  return out;
}

std::size_t effective_batch_size(std::size_t configured, std::size_t shard_rows) {
  return std::min(configured, std::max<std::size_t>(8, shard_rows / 4));
}

std::uint64_t init_seed(std::uint64_t run_seed) { return derive_seed(run_seed, 0x696e6974ULL); }
std::uint64_t partition_seed(std::uint64_t run_seed) { return derive_seed(run_seed, 0x7368617264ULL); }

std::uint64_t client_seed(const FedConfig& cfg, std::uint64_t run_seed, std::size_t client) {
  if (!cfg.client_seeds.empty()) return cfg.client_seeds.at(client);
  return derive_seed(run_seed, 0x636c69656e74ULL, client);
}

double local_train(ModelState& state, const Dataset& data, std::size_t first_epoch, std::size_t epochs,
                   std::size_t batch_size, std::uint64_t seed, const Proximal* prox) {
  const std::size_t n = data.n_samples();
  if (n == 0) throw UsageError("local_train: empty shard");
  if (batch_size == 0) throw UsageError("local_train: batch size 0");
  std::vector<std::size_t> order(n);
  double last = 0.0;
  for (std::size_t e = first_epoch; e < first_epoch + epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng rng(derive_seed(seed, e));
    rng.shuffle(std::span(order));
    double sum = 0.0;
    std::size_t batches = 0;
    for (std::size_t b = 0; b < n; b += batch_size) {
      const std::size_t end = std::min(n, b + batch_size);
      const auto rows = std::span<const std::size_t>(order).subspan(b, end - b);
      const Matrix batch = data.x.select_rows(rows);
      try {
        sum += train_step(state, batch, prox);
      } catch (const NumericError& err) {
        throw NumericError("epoch " + std::to_string(e) + ", step " + std::to_string(batches) + ": " + err.what());
      }
      ++batches;
    }
    last = sum / static_cast<double>(batches);
  }
  return last;
}

Federation make_federation(ModelState global, ClientShards shards, const FedConfig& cfg, std::uint64_t run_seed) {
  cfg.validate();
  if (shards.size() != cfg.n_clients) {
    throw UsageError("make_federation: " + std::to_string(shards.size()) + " shards for " +
                     std::to_string(cfg.n_clients) + " clients");
  }
  Federation fed;
  fed.config = cfg;
  fed.client_optimizers.assign(cfg.n_clients, global.optimizer);
  for (auto& opt : fed.client_optimizers) opt.reset();
  for (std::size_t c = 0; c < cfg.n_clients; ++c) fed.seeds.push_back(client_seed(cfg, run_seed, c));
  fed.global = std::move(global);
  fed.shards = std::move(shards);
  return fed;
}

RoundLog run_round(Federation& fed) {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& cfg = fed.config;
  const std::size_t k = cfg.n_clients;
  const ParamVector round_start = fed.global.params;
  const double mu = cfg.effective_mu();
  const Proximal prox{mu, round_start};
  const bool use_prox = cfg.aggregator == Aggregator::fedprox;
  const std::size_t first_epoch = fed.completed_rounds * cfg.local_epochs;

  std::vector<ParamVector> locals(k);
  std::vector<AdamState> optimizers(fed.client_optimizers);
  std::vector<double> losses(k, 0.0);
  std::vector<std::size_t> batch_sizes(k, 0);
  std::vector<std::exception_ptr> errors(k);

  const long nk = static_cast<long>(k);
#pragma omp parallel for schedule(dynamic) if (cfg.parallel_clients && k > 1)
  for (long ci = 0; ci < nk; ++ci) {
    const auto c = static_cast<std::size_t>(ci);
    try {
      ModelState local = fed.global;
      local.optimizer = optimizers[c];
      if (cfg.optimizer_policy == OptimizerPolicy::reset) local.optimizer.reset();
      batch_sizes[c] = effective_batch_size(cfg.batch_size, fed.shards[c].n_samples());
      losses[c] = local_train(local, fed.shards[c], first_epoch, cfg.local_epochs, batch_sizes[c], fed.seeds[c],
                              use_prox ? &prox : nullptr);
      locals[c] = std::move(local.params);
      optimizers[c] = std::move(local.optimizer);
    } catch (...) {
      errors[c] = std::current_exception();
    }
  }

  const std::size_t round = fed.completed_rounds;
  for (std::size_t c = 0; c < k; ++c) {
    if (!errors[c]) continue;
    try {
      std::rethrow_exception(errors[c]);
    } catch (const NumericError& e) {
      throw NumericError("round " + std::to_string(round) + ", client " + std::to_string(c) + ", " + e.what());
    }
  }

  std::vector<std::size_t> weights;
  for (const auto& s : fed.shards) weights.push_back(s.n_samples());
  fed.global.params = fedavg(locals, weights);
  fed.client_optimizers = std::move(optimizers);
  fed.completed_rounds += 1;

  RoundLog log;
  log.round = round;
  log.client_losses = std::move(losses);
  log.client_batch_sizes = std::move(batch_sizes);
  log.global_norm = std::sqrt(l2_distance_sq(fed.global.params, ParamVector(fed.global.params.size(), 0.0)));
  log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return log;
}

namespace {

ModelState initial_model(const ModelConfig& model_cfg, const Dataset& train, std::uint64_t seed) {
  if (train.n_samples() == 0) throw UsageError("training set is empty");
  ModelState model = build_model(model_cfg, train.n_features_encoded(), init_seed(seed));
  if (model_cfg.kind == ModelKind::deepsvdd) init_svdd_center(model, train.x);
  return model;
}

}  // namespace

TrainingResult run_training(const ModelConfig& model_cfg, const DataSplit& split, const FedConfig& cfg,
                            std::uint64_t seed, std::optional<std::size_t> total_epochs, const RoundSink& sink) {
  cfg.validate();
  TrainingResult result;
  if (total_epochs && cfg.rounds * cfg.local_epochs != *total_epochs) {
    result.warnings.push_back("rounds x local_epochs = " + std::to_string(cfg.rounds * cfg.local_epochs) +
                              " differs from the epoch budget " + std::to_string(*total_epochs));
  }
  ModelState model = initial_model(model_cfg, split.train, seed);
  auto shards = partition(split.train, cfg.n_clients, partition_seed(seed));
  for (std::size_t c = 0; c < shards.size(); ++c) {
    const auto b = effective_batch_size(cfg.batch_size, shards[c].n_samples());
    if (b != cfg.batch_size) {
      result.warnings.push_back("client " + std::to_string(c) + ": batch size " + std::to_string(cfg.batch_size) +
                                " reduced to " + std::to_string(b) + " for a shard of " +
                                std::to_string(shards[c].n_samples()) + " rows");
    }
  }
  Federation fed = make_federation(std::move(model), std::move(shards), cfg, seed);
  for (std::size_t r = 0; r < cfg.rounds; ++r) {
    result.rounds.push_back(run_round(fed));
    if (sink) sink(result.rounds.back());
  }
  result.model = std::move(fed.global);
  return result;
}

TrainingResult train_centralized(const ModelConfig& model_cfg, const Dataset& train, std::size_t epochs,
                                 std::size_t batch_size, std::uint64_t seed, const RoundSink& sink) {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  TrainingResult result;
  result.model = initial_model(model_cfg, train, seed);
  // Same row order and epoch seeds as client 0 of a one-client federation.
  const Dataset data = partition(train, 1, partition_seed(seed)).front();
  const std::uint64_t cseed = client_seed(FedConfig{}, seed, 0);
  for (std::size_t e = 0; e < epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    RoundLog log;
    log.round = e;
    log.client_losses = {local_train(result.model, data, e, 1, batch_size, cseed)};
    log.client_batch_sizes = {batch_size};
    log.global_norm = std::sqrt(l2_distance_sq(result.model.params, ParamVector(result.model.params.size(), 0.0)));
    log.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.rounds.push_back(log);
    if (sink) sink(log);
  }
  return result;
}

}  // namespace fedad
