#pragma once

// Simulated federated training: clients train copies of the global model on
// their shards and the server averages the resulting parameter vectors.

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedad/data.hpp"
#include "fedad/models.hpp"

namespace fedad {

enum class Aggregator { fedavg, fedprox };

// What happens to each client's Adam moments between rounds.
enum class OptimizerPolicy { persist, reset };

const char* to_string(Aggregator a);
Aggregator parse_aggregator(std::string_view s);
const char* to_string(OptimizerPolicy p);
OptimizerPolicy parse_optimizer_policy(std::string_view s);

struct FedConfig {
  std::size_t n_clients = 3;
  std::size_t local_epochs = 10;
  std::size_t rounds = 1;
  Aggregator aggregator = Aggregator::fedavg;
  double mu = 0.0;  // fedprox only
  std::size_t batch_size = 128;
  // Optional per-client seeds; derived from the run seed when empty.
  std::vector<std::uint64_t> client_seeds;
  OptimizerPolicy optimizer_policy = OptimizerPolicy::persist;
  bool parallel_clients = true;

  void validate() const;  // throws ConfigError
  double effective_mu() const { return aggregator == Aggregator::fedprox ? mu : 0.0; }
};

struct RoundLog {
  std::size_t round = 0;
  std::vector<double> client_losses;  // mean batch loss of each client's last local epoch
  std::vector<std::size_t> client_batch_sizes;
  double global_norm = 0.0;
  double wall_seconds = 0.0;

  nlohmann::json to_json() const;
};

// Weighted mean of equal-length vectors, summed in client order. Computed as
// s0 + sum_i w_i (s_i - s0) and clamped to the per-coordinate range, so
// identical inputs and single clients come back unchanged.
ParamVector fedavg(const std::vector<ParamVector>& states, const std::vector<std::size_t>& weights);

// min(configured, max(8, floor(shard / 4))).
std::size_t effective_batch_size(std::size_t configured, std::size_t shard_rows);

std::uint64_t client_seed(const FedConfig& cfg, std::uint64_t run_seed, std::size_t client);

// Runs epochs [first_epoch, first_epoch + epochs) of shuffled mini-batch
// train_step over `data`. Each epoch's order comes from (seed, epoch index).
// Returns the mean batch loss of the last epoch.
double local_train(ModelState& state, const Dataset& data, std::size_t first_epoch, std::size_t epochs,
                   std::size_t batch_size, std::uint64_t seed, const Proximal* prox = nullptr);

struct Federation {
  ModelState global;
  ClientShards shards;
  std::vector<AdamState> client_optimizers;
  std::vector<std::uint64_t> seeds;
  FedConfig config;
  std::size_t completed_rounds = 0;
};

Federation make_federation(ModelState global, ClientShards shards, const FedConfig& cfg, std::uint64_t run_seed);

// One communication round. Throws NumericError naming the client and step
// when any client fails; the global model is left unchanged in that case.
RoundLog run_round(Federation& fed);

using RoundSink = std::function<void(const RoundLog&)>;

struct TrainingResult {
  ModelState model;
  std::vector<RoundLog> rounds;  // centralized runs log one entry per epoch
  std::vector<std::string> warnings;
};

// Model init, DeepSVDD center from the full train set, partition and rounds.
// `total_epochs`, when given, is checked against rounds * local_epochs.
TrainingResult run_training(const ModelConfig& model_cfg, const DataSplit& split, const FedConfig& cfg,
                            std::uint64_t seed, std::optional<std::size_t> total_epochs = std::nullopt,
                            const RoundSink& sink = {});

// Centralized loop sharing the client-0 batch schedule, so that it matches a
// one-client federation run bit for bit.
TrainingResult train_centralized(const ModelConfig& model_cfg, const Dataset& train, std::size_t epochs,
                                 std::size_t batch_size, std::uint64_t seed, const RoundSink& sink = {});

// Seeds shared by both training paths.
std::uint64_t init_seed(std::uint64_t run_seed);
std::uint64_t partition_seed(std::uint64_t run_seed);

}  // namespace fedad
