#include "fedad/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "fedad/data.hpp"
#include "fedad/error.hpp"
#include "fedad/models.hpp"

namespace fedad {

namespace {

void check_lengths(std::span<const double> s, std::span<const int> l) {
  if (s.size() != l.size()) {
    throw UsageError("metrics: " + std::to_string(s.size()) + " scores vs " + std::to_string(l.size()) +
                     " labels");
  }
}

std::pair<std::size_t, std::size_t> class_counts(std::span<const int> labels) {
  std::size_t pos = 0;
  for (int y : labels) pos += y == 1;
  return {pos, labels.size() - pos};
}

void require_both_classes(std::span<const int> labels, const char* metric) {
  auto [pos, neg] = class_counts(labels);
  if (pos == 0 || neg == 0) {
    throw MetricError(std::string(metric) + " is undefined: labels contain a single class");
  }
}

std::vector<std::size_t> order_by_score(std::span<const double> scores) {
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto a, auto b) { return scores[a] < scores[b]; });
  return idx;
}

}  // namespace

Confusion confusion_at(std::span<const double> scores, std::span<const int> labels, double threshold) {
  check_lengths(scores, labels);
  Confusion c;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    const bool pos = labels[i] == 1;
    if (pred && pos) ++c.tp;
    else if (pred) ++c.fp;
    else if (pos) ++c.fn;
    else ++c.tn;
  }
  c.precision = c.tp + c.fp ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
  c.recall = c.tp + c.fn ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
  c.f1 = c.precision + c.recall > 0.0 ? 2.0 * c.precision * c.recall / (c.precision + c.recall) : 0.0;
  return c;
}

double auroc(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores, labels);
  require_both_classes(labels, "AUROC");
  const auto idx = order_by_score(scores);
  // Sum of (1-based, tie-averaged) ranks of the positives.
  double rank_sum = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[idx[k]] == 1) rank_sum += avg_rank;
    }
    i = j;
  }
  auto [pos, neg] = class_counts(labels);
  const double p = static_cast<double>(pos);
  const double u = rank_sum - p * (p + 1.0) / 2.0;
  return u / (p * static_cast<double>(neg));
}

double aupr(std::span<const double> scores, std::span<const int> labels) {
  check_lengths(scores, labels);
  require_both_classes(labels, "AUPR");
  auto idx = order_by_score(scores);
  std::reverse(idx.begin(), idx.end());
  const double total_pos = static_cast<double>(class_counts(labels).first);
  double tp = 0.0, fp = 0.0, prev_recall = 0.0, ap = 0.0;
  std::size_t i = 0;
  while (i < idx.size()) {
    std::size_t j = i;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] == 1 ? tp : fp) += 1.0;
      ++j;
    }
    const double recall = tp / total_pos;
    const double precision = tp / (tp + fp);
    ap += (recall - prev_recall) * precision;
    prev_recall = recall;
    i = j;
  }
  return ap;
}

double percentile_sorted(std::span<const double> sorted, double p) {
  if (sorted.empty()) throw UsageError("percentile of an empty set");
  p = std::clamp(p, 0.0, 100.0);
  const double pos = p / 100.0 * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + (sorted[hi] - sorted[lo]) * frac;
}

ThresholdWindow threshold_window(std::span<const int> labels) {
  auto [pos, neg] = class_counts(labels);
  ThresholdWindow w;
  w.center = 100.0 * static_cast<double>(neg) / static_cast<double>(pos + neg);
  w.half_width = std::min({w.center, 100.0 - w.center, 20.0});
  const double lo = w.center - w.half_width;
  const double hi = w.center + w.half_width;
  // Step 0.1 from lo; the last candidate is always exactly hi.
  for (long i = 0;; ++i) {
    const double p = lo + 0.1 * static_cast<double>(i);
    if (p >= hi - 1e-9) break;
    w.percentiles.push_back(p);
  }
  w.percentiles.push_back(hi);
  return w;
}

double optimal_threshold(std::span<const double> scores, std::span<const int> labels, ThresholdSearch search) {
  check_lengths(scores, labels);
  require_both_classes(labels, "optimal threshold");
  std::vector<double> sorted(scores.begin(), scores.end());
  std::sort(sorted.begin(), sorted.end());
  const auto window = threshold_window(labels);

  std::vector<double> candidates;
  if (search == ThresholdSearch::window) {
    for (double p : window.percentiles) candidates.push_back(percentile_sorted(sorted, p));
  } else {
    const double lo = percentile_sorted(sorted, window.percentiles.front());
    const double hi = percentile_sorted(sorted, window.percentiles.back());
    candidates = {lo, hi};
    auto last = std::unique(sorted.begin(), sorted.end());
    for (auto it = sorted.begin(); it != last; ++it) {
      if (*it >= lo && *it <= hi) candidates.push_back(*it);
      if (it + 1 != last) {
        const double mid = *it + (*(it + 1) - *it) / 2.0;
        if (mid >= lo && mid <= hi) candidates.push_back(mid);
      }
    }
    std::sort(candidates.begin(), candidates.end());
  }

  double best_thr = candidates.front();
  double best_f1 = -1.0;
  for (double t : candidates) {
    const double f1 = confusion_at(scores, labels, t).f1;
    if (f1 > best_f1 || (f1 == best_f1 && t < best_thr)) {
      best_f1 = f1;
      best_thr = t;
    }
  }
  return best_thr;
}

MetricsReport evaluate_scores(std::span<const double> val_scores, std::span<const int> val_labels,
                              std::span<const double> test_scores, std::span<const int> test_labels,
                              ThresholdSearch search) {
  MetricsReport r;
  r.threshold = optimal_threshold(val_scores, val_labels, search);
  const auto c = confusion_at(test_scores, test_labels, r.threshold);
  r.precision = c.precision;
  r.recall = c.recall;
  r.f1 = c.f1;
  r.tp = c.tp;
  r.fp = c.fp;
  r.tn = c.tn;
  r.fn = c.fn;
  r.auroc = auroc(test_scores, test_labels);
  r.aupr = aupr(test_scores, test_labels);
  return r;
}

MetricsReport evaluate(const ModelState& model, const DataSplit& split, ThresholdSearch search) {
  const auto val = anomaly_scores(model, split.val.x);
  const auto test = anomaly_scores(model, split.test.x);
  return evaluate_scores(val, split.val.y, test, split.test.y, search);
}

nlohmann::json MetricsReport::to_json() const {
  return {{"precision", precision}, {"recall", recall}, {"f1", f1},   {"auroc", auroc},
          {"aupr", aupr},           {"threshold", threshold}, {"tp", tp}, {"fp", fp},
          {"tn", tn},               {"fn", fn}};
}

MetricsReport MetricsReport::from_json(const nlohmann::json& j) {
  MetricsReport r;
  r.precision = j.at("precision").get<double>();
  r.recall = j.at("recall").get<double>();
  r.f1 = j.at("f1").get<double>();
  r.auroc = j.at("auroc").get<double>();
  r.aupr = j.at("aupr").get<double>();
  r.threshold = j.at("threshold").get<double>();
  r.tp = j.at("tp").get<std::size_t>();
  r.fp = j.at("fp").get<std::size_t>();
  r.tn = j.at("tn").get<std::size_t>();
  r.fn = j.at("fn").get<std::size_t>();
  return r;
}

}  // namespace fedad
