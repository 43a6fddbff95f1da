#pragma once

// Threshold-free (AUROC, AUPR) and thresholded (precision, recall, F1)
// metrics, plus validation-set threshold selection.
//
// Conventions: label 1 = anomaly; a sample is predicted anomalous iff
// score >= threshold; 0/0 precision or recall is 0.

#include <cstddef>
#include <span>
#include <vector>

#include <json.hpp>

namespace fedad {

struct ModelState;
struct DataSplit;

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

Confusion confusion_at(std::span<const double> scores, std::span<const int> labels, double threshold);

// Mann-Whitney form, ties count 1/2. Throws MetricError for single-class input.
double auroc(std::span<const double> scores, std::span<const int> labels);

// Average precision: sum over distinct descending thresholds of
// (R_i - R_{i-1}) * P_i. Throws MetricError for single-class input.
double aupr(std::span<const double> scores, std::span<const int> labels);

// Linear-interpolated percentile (p in [0, 100]) of an ascending-sorted vector.
double percentile_sorted(std::span<const double> sorted, double p);

struct ThresholdWindow {
  double center = 0.0;  // percentile of the normal fraction, 100 * (1 - anomaly ratio)
  double half_width = 0.0;
  std::vector<double> percentiles;  // candidate percentiles, step 0.1
};

ThresholdWindow threshold_window(std::span<const int> labels);

enum class ThresholdSearch { window, exhaustive };

// F1-maximizing threshold on validation scores. `window` scans score
// percentiles around the normal fraction; `exhaustive` tries every distinct
// score and midpoint inside the same window. Ties resolve to the smallest
// threshold. Throws MetricError when val lacks either class.
double optimal_threshold(std::span<const double> scores, std::span<const int> labels,
                         ThresholdSearch search = ThresholdSearch::window);

struct MetricsReport {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auroc = 0.0;
  double aupr = 0.0;
  double threshold = 0.0;
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  nlohmann::json to_json() const;
  static MetricsReport from_json(const nlohmann::json& j);
};

// Threshold from val, thresholded metrics and AUROC/AUPR on test.
MetricsReport evaluate_scores(std::span<const double> val_scores, std::span<const int> val_labels,
                              std::span<const double> test_scores, std::span<const int> test_labels,
                              ThresholdSearch search = ThresholdSearch::window);

MetricsReport evaluate(const ModelState& model, const DataSplit& split,
                       ThresholdSearch search = ThresholdSearch::window);

}  // namespace fedad
