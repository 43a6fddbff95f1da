#pragma once

// Tabular data pipeline: schema-driven CSV loading, one-hot/min-max encoding,
// the class-based train/val/test split, and uniform client partitioning.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "fedad/matrix.hpp"

namespace fedad {

enum class FeatureKind { continuous, categorical };

struct FeatureColumn {
  std::string name;
  FeatureKind kind = FeatureKind::continuous;
};

// Published dataset statistics; mismatches are reported as warnings.
struct ExpectedStats {
  std::optional<std::size_t> n_samples;
  std::optional<std::size_t> n_features;
  std::optional<double> anomaly_ratio;
};

struct DatasetSchema {
  std::string name;
  std::vector<FeatureColumn> features;
  std::string label_column;
  // A row is an anomaly when its label is in `anomaly_values`, or, when that
  // list is empty, when it is NOT in `normal_values`.
  std::vector<std::string> anomaly_values;
  std::vector<std::string> normal_values;
  std::vector<std::string> ignore_columns;
  ExpectedStats expected;

  void validate() const;  // throws ConfigError
  std::size_t continuous_count() const;
  std::size_t categorical_count() const;
  bool is_anomaly_label(const std::string& value) const;
};

DatasetSchema parse_schema(const nlohmann::json& j, const std::string& where = "schema");
DatasetSchema load_schema(const std::string& path);

// Typed columns in schema order. Continuous cells are parsed to double,
// categorical cells kept verbatim.
struct RawTable {
  std::vector<FeatureColumn> columns;
  std::vector<std::vector<double>> numeric;           // per column; empty for categorical
  std::vector<std::vector<std::string>> categorical;  // per column; empty for continuous
  std::vector<int> labels;                            // 1 = anomaly

  std::size_t rows() const { return labels.size(); }
  RawTable select_rows(const std::vector<std::size_t>& idx) const;
};

// Throws DataError on a missing column, an empty file, an empty cell, or an
// unparseable numeric cell (with 1-based data row and column indices).
RawTable parse_csv(std::istream& in, const DatasetSchema& schema, const std::string& source = "<stream>");
RawTable load_csv(const std::string& path, const DatasetSchema& schema);

// Warnings for deviations from schema.expected.
std::vector<std::string> check_expected(const DatasetSchema& schema, const RawTable& raw);

// Keeps `fraction` of the inliers and of the anomalies (each rounded to
// nearest, at least one per non-empty class).
RawTable stratified_subsample(const RawTable& raw, double fraction, std::uint64_t seed);

struct FitStats {
  std::vector<FeatureKind> kinds;
  std::vector<double> min;                       // continuous columns
  std::vector<double> max;
  std::vector<std::vector<std::string>> vocab;   // categorical columns, sorted

  std::size_t encoded_width() const;
  friend bool operator==(const FitStats&, const FitStats&) = default;
};

FitStats fit_stats(const RawTable& raw);

struct EncodeReport {
  std::size_t unseen_categories = 0;
  std::size_t out_of_range = 0;
};

struct Dataset {
  Matrix x;
  std::vector<int> y;  // 1 = anomaly
  std::size_t n_features_raw = 0;

  std::size_t n_samples() const { return y.size(); }
  std::size_t n_features_encoded() const { return x.cols(); }
  std::size_t n_anomalies() const;
  double anomaly_ratio() const;
  Dataset subset(const std::vector<std::size_t>& idx) const;
};

struct Encoded {
  Dataset data;
  FitStats stats;
  EncodeReport report;
};

// Continuous columns first (min-max scaled with fit-pass stats, constant
// columns -> 0), then one-hot blocks in column order (unseen -> all zeros).
// Fits on `raw` when `stats` is empty.
Encoded encode_and_scale(const RawTable& raw, const std::optional<FitStats>& stats = std::nullopt);

struct SplitIndices {
  std::vector<std::size_t> train, val, test;
};

// Inliers shuffled; first floor(n_in/2) train; rest + all anomalies form the
// evaluation pool, split stratified into val (val_fraction) and test.
// Throws ConfigError on degenerate strata.
SplitIndices split_indices(const std::vector<int>& labels, std::uint64_t seed, double val_fraction);

struct DataSplit {
  Dataset train;  // inliers only
  Dataset val;
  Dataset test;
  std::uint64_t seed = 0;
  SplitIndices indices;
  std::optional<FitStats> stats;  // set when the split was built from a raw table
};

// Splits an already-encoded dataset.
DataSplit split(const Dataset& dataset, std::uint64_t seed, double val_fraction);

// Splits raw rows, fits encoding stats on the training rows only, and applies
// them to val/test.
DataSplit prepare_split(const RawTable& raw, std::uint64_t seed, double val_fraction,
                        EncodeReport* report = nullptr);

using ClientShards = std::vector<Dataset>;

// Seeded shuffle, then round-robin assignment; shard sizes differ by <= 1.
std::vector<std::vector<std::size_t>> partition_indices(std::size_t rows, std::size_t n_clients,
                                                        std::uint64_t seed);
ClientShards partition(const Dataset& train, std::size_t n_clients, std::uint64_t seed);

}  // namespace fedad
