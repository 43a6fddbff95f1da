#include <algorithm>
#include <cmath>
#include <map>
#include <set>

#include "fedad/data.hpp"
#include "fedad/error.hpp"
#include "fedad/random.hpp"

namespace fedad {

std::size_t FitStats::encoded_width() const {
  std::size_t w = 0;
  for (std::size_t c = 0; c < kinds.size(); ++c) {
    w += kinds[c] == FeatureKind::continuous ? 1 : vocab[c].size();
  }
  return w;
}

FitStats fit_stats(const RawTable& raw) {
  if (raw.rows() == 0) throw UsageError("fit_stats: empty table");
  FitStats s;
  const std::size_t n = raw.columns.size();
  s.kinds.resize(n);
  s.min.assign(n, 0.0);
  s.max.assign(n, 0.0);
  s.vocab.resize(n);
  for (std::size_t c = 0; c < n; ++c) {
    s.kinds[c] = raw.columns[c].kind;
    if (s.kinds[c] == FeatureKind::continuous) {
      const auto [lo, hi] = std::minmax_element(raw.numeric[c].begin(), raw.numeric[c].end());
      s.min[c] = *lo;
      s.max[c] = *hi;
    } else {
      std::set<std::string> values(raw.categorical[c].begin(), raw.categorical[c].end());
      s.vocab[c].assign(values.begin(), values.end());
    }
  }
  return s;
}

Encoded encode_and_scale(const RawTable& raw, const std::optional<FitStats>& stats) {
  Encoded out;
  out.stats = stats ? *stats : fit_stats(raw);
  const auto& st = out.stats;
  if (st.kinds.size() != raw.columns.size()) {
    throw UsageError("encode_and_scale: stats were fitted on a different column set");
  }
  const std::size_t rows = raw.rows();
  const std::size_t width = st.encoded_width();
  out.data.x = Matrix(rows, width, 0.0);
  out.data.y = raw.labels;
  out.data.n_features_raw = raw.columns.size();

  std::size_t col = 0;
  for (std::size_t c = 0; c < st.kinds.size(); ++c) {
    if (st.kinds[c] != FeatureKind::continuous) continue;
    const double lo = st.min[c];
    const double range = st.max[c] - lo;
    for (std::size_t r = 0; r < rows; ++r) {
      const double v = raw.numeric[c][r];
      if (v < st.min[c] || v > st.max[c]) ++out.report.out_of_range;
      out.data.x(r, col) = range > 0.0 ? (v - lo) / range : 0.0;
    }
    ++col;
  }
  for (std::size_t c = 0; c < st.kinds.size(); ++c) {
    if (st.kinds[c] != FeatureKind::categorical) continue;
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < st.vocab[c].size(); ++i) index[st.vocab[c][i]] = i;
    for (std::size_t r = 0; r < rows; ++r) {
      auto it = index.find(raw.categorical[c][r]);
      if (it == index.end()) {
        ++out.report.unseen_categories;
      } else {
        out.data.x(r, col + it->second) = 1.0;
      }
    }
    col += st.vocab[c].size();
  }
  return out;
}

std::size_t Dataset::n_anomalies() const {
  return static_cast<std::size_t>(std::count(y.begin(), y.end(), 1));
}

double Dataset::anomaly_ratio() const {
  return y.empty() ? 0.0 : static_cast<double>(n_anomalies()) / static_cast<double>(y.size());
}

Dataset Dataset::subset(const std::vector<std::size_t>& idx) const {
  Dataset d;
  d.x = x.select_rows(idx);
  d.n_features_raw = n_features_raw;
  d.y.reserve(idx.size());
  for (auto i : idx) d.y.push_back(y.at(i));
  return d;
}

SplitIndices split_indices(const std::vector<int>& labels, std::uint64_t seed, double val_fraction) {
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must be in (0, 1)");
  std::vector<std::size_t> inliers, anomalies;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? anomalies : inliers).push_back(i);
  if (anomalies.empty()) throw ConfigError("split: dataset has no anomalies");
  if (inliers.size() < 4) throw ConfigError("split: dataset needs at least 4 inliers");

  Rng rng(derive_seed(seed, 0x73706c6974ULL));
  rng.shuffle(std::span(inliers));
  rng.shuffle(std::span(anomalies));

  const std::size_t n_train = inliers.size() / 2;
  const std::size_t pool_in = inliers.size() - n_train;
  const std::size_t n_anom = anomalies.size();
  const auto val_anom = static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(n_anom)));
  const auto val_total =
      static_cast<std::size_t>(std::llround(val_fraction * static_cast<double>(pool_in + n_anom)));
  const std::size_t val_in = std::min(pool_in, val_total > val_anom ? val_total - val_anom : 0);

  if (val_anom == 0 || val_anom == n_anom) {
    throw ConfigError("split: " + std::to_string(n_anom) + " anomalies cannot be stratified with val_fraction " +
                      std::to_string(val_fraction) + " (one side gets none); " +
                      (val_anom == 0 ? "use a larger val_fraction" : "use a smaller val_fraction"));
  }
  if (val_in == 0 || val_in == pool_in) {
    throw ConfigError("split: evaluation inliers cannot be stratified with val_fraction " +
                      std::to_string(val_fraction));
  }

  SplitIndices s;
  s.train.assign(inliers.begin(), inliers.begin() + static_cast<long>(n_train));
  s.val.assign(inliers.begin() + static_cast<long>(n_train),
               inliers.begin() + static_cast<long>(n_train + val_in));
  s.test.assign(inliers.begin() + static_cast<long>(n_train + val_in), inliers.end());
  s.val.insert(s.val.end(), anomalies.begin(), anomalies.begin() + static_cast<long>(val_anom));
  s.test.insert(s.test.end(), anomalies.begin() + static_cast<long>(val_anom), anomalies.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.val.begin(), s.val.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

DataSplit split(const Dataset& dataset, std::uint64_t seed, double val_fraction) {
  DataSplit out;
  out.seed = seed;
  out.indices = split_indices(dataset.y, seed, val_fraction);
  out.train = dataset.subset(out.indices.train);
  out.val = dataset.subset(out.indices.val);
  out.test = dataset.subset(out.indices.test);
  return out;
}

DataSplit prepare_split(const RawTable& raw, std::uint64_t seed, double val_fraction, EncodeReport* report) {
  DataSplit out;
  out.seed = seed;
  out.indices = split_indices(raw.labels, seed, val_fraction);
  auto train = encode_and_scale(raw.select_rows(out.indices.train));
  auto val = encode_and_scale(raw.select_rows(out.indices.val), train.stats);
  auto test = encode_and_scale(raw.select_rows(out.indices.test), train.stats);
  out.train = std::move(train.data);
  out.val = std::move(val.data);
  out.test = std::move(test.data);
  out.stats = std::move(train.stats);
  if (report) {
    report->unseen_categories = val.report.unseen_categories + test.report.unseen_categories;
    report->out_of_range = val.report.out_of_range + test.report.out_of_range;
  }
  return out;
}

std::vector<std::vector<std::size_t>> partition_indices(std::size_t rows, std::size_t n_clients,
                                                        std::uint64_t seed) {
  if (n_clients < 1) throw ConfigError("partition: n_clients must be >= 1");
  if (n_clients > rows) {
    throw ConfigError("partition: " + std::to_string(n_clients) + " clients but only " +
                      std::to_string(rows) + " training rows");
  }
  std::vector<std::size_t> perm(rows);
  for (std::size_t i = 0; i < rows; ++i) perm[i] = i;
  Rng rng(derive_seed(seed, 0x7061727469ULL));
  rng.shuffle(std::span(perm));
  std::vector<std::vector<std::size_t>> shards(n_clients);
  for (std::size_t i = 0; i < rows; ++i) shards[i % n_clients].push_back(perm[i]);
  return shards;
}

ClientShards partition(const Dataset& train, std::size_t n_clients, std::uint64_t seed) {
  ClientShards shards;
  for (const auto& idx : partition_indices(train.n_samples(), n_clients, seed)) {
    shards.push_back(train.subset(idx));
  }
  return shards;
}

}  // namespace fedad
