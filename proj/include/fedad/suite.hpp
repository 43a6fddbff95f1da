#pragma once

// Experiment grids: config parsing, the run loop with on-disk results, and
// table rendering.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedad/federation.hpp"
#include "fedad/metrics.hpp"
#include "fedad/models.hpp"

namespace fedad {

enum class RunMode { centralized, federated };

const char* to_string(RunMode m);
RunMode parse_run_mode(std::string_view s);

struct DatasetRef {
  std::string id;      // "thyroid", "arrhythmia", "kdd10", "nslkdd", or any name
  std::string csv;     // absolute or relative to the working directory
  std::string schema;
};

struct ExperimentSpec {
  DatasetRef dataset;
  ModelConfig model;
  std::size_t epochs = 200;  // E, the centralized epoch budget
  RunMode mode = RunMode::centralized;
  std::optional<FedConfig> fed;  // required for federated runs
  std::uint64_t seed = 0;
  std::size_t batch_size = 128;  // centralized batch; federated runs use fed->batch_size
  double val_fraction = 0.5;
  std::optional<double> subsample;
  ThresholdSearch threshold_search = ThresholdSearch::window;

  void validate() const;  // throws ConfigError
  nlohmann::json to_json() const;
  static ExperimentSpec from_json(const nlohmann::json& j);
  // First 16 hex digits of SHA-256 over the canonical JSON form.
  std::string hash() const;
};

std::size_t default_batch_size(std::string_view dataset_id);

// Expands a suite config into one spec per grid cell. Paths are resolved
// against `base_dir`. Throws ConfigError with a JSON-pointer-like location.
std::vector<ExperimentSpec> parse_config(const nlohmann::json& config, const std::filesystem::path& base_dir,
                                         const std::string& where = "config");
std::vector<ExperimentSpec> parse_config(const std::filesystem::path& path);

struct ResultRow {
  ExperimentSpec spec;
  std::string spec_hash;
  bool ok = false;
  std::string error;
  MetricsReport metrics;
  std::size_t rounds = 0;  // communication rounds, 0 for centralized runs
  double wall_seconds = 0.0;
  std::string version;
  std::vector<std::string> warnings;

  nlohmann::json to_json() const;
  static ResultRow from_json(const nlohmann::json& j);
};

struct SuiteOptions {
  std::filesystem::path out_dir;
  std::optional<nlohmann::json> config_snapshot;
  std::optional<double> subsample;             // overrides the spec's fraction
  std::optional<ThresholdSearch> threshold_search;
  bool resume = true;                          // skip specs with an ok row in results.jsonl
  bool save_checkpoints = true;
  bool quiet = false;
};

// Runs one spec in memory; never throws for per-run failures.
ResultRow run_experiment(const ExperimentSpec& spec, const SuiteOptions& options = {});

// Runs every spec, appending to <out>/results.jsonl and rewriting
// <out>/results.csv. Returns rows for all specs, including resumed ones.
std::vector<ResultRow> run_suite(const std::vector<ExperimentSpec>& specs, const SuiteOptions& options);

// Last row per spec hash, in first-seen order.
std::vector<ResultRow> load_results(const std::filesystem::path& results_dir);

void write_results_csv(const std::filesystem::path& path, const std::vector<ResultRow>& rows);

enum class GroupBy { mode, clients, mu };
GroupBy parse_group_by(std::string_view s);

struct Report {
  std::string table;
  nlohmann::json dump;  // unrounded per-seed rows and means
};

// Rows grouped by (dataset, model) and setting; metric means over seeds,
// printed with two decimals, half away from zero.
Report render_report(const std::vector<ResultRow>& rows, GroupBy group_by);

std::string format_2dp(double v);

std::string sha256_hex(std::string_view bytes);
std::string sha256_file(const std::filesystem::path& path);

}  // namespace fedad
