#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <sstream>
#include <tuple>

#include "fedad/error.hpp"
#include "fedad/suite.hpp"

namespace fedad {

using nlohmann::json;

GroupBy parse_group_by(std::string_view s) {
  if (s == "mode") return GroupBy::mode;
  if (s == "clients") return GroupBy::clients;
  if (s == "mu") return GroupBy::mu;
  throw ConfigError("unknown group-by '" + std::string(s) + "' (expected mode, clients or mu)");
}

// Rounds the shortest decimal representation, so 0.955 prints as 0.96.
std::string format_2dp(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[512];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::fixed);
  if (ec != std::errc()) throw Error("format_2dp: conversion failed");
  std::string s(buf, end);
  const bool neg = s.front() == '-';
  if (neg) s.erase(0, 1);
  auto dot = s.find('.');
  if (dot == std::string::npos) {
    dot = s.size();
    s += '.';
  }
  while (s.size() - dot - 1 < 3) s += '0';
  std::string digits = s.substr(0, dot) + s.substr(dot + 1, 2);
  if (s[dot + 3] >= '5') {
    int i = static_cast<int>(digits.size()) - 1;
    while (i >= 0 && digits[static_cast<std::size_t>(i)] == '9') digits[static_cast<std::size_t>(i--)] = '0';
    if (i < 0) digits.insert(digits.begin(), '1');
    else ++digits[static_cast<std::size_t>(i)];
  }
  std::string out = digits.substr(0, digits.size() - 2) + "." + digits.substr(digits.size() - 2);
  if (neg && out.find_first_not_of("0.") != std::string::npos) out.insert(out.begin(), '-');
  return out;
}

namespace {

struct SettingKey {
  int mode = 0;  // 0 centralized, 1 federated
  std::size_t n_clients = 0;
  int aggregator = 0;
  double mu = 0.0;

  auto tie() const { return std::tie(mode, n_clients, aggregator, mu); }
  bool operator<(const SettingKey& o) const { return tie() < o.tie(); }
  bool operator==(const SettingKey& o) const { return tie() == o.tie(); }
};

SettingKey setting_of(const ResultRow& r) {
  SettingKey k;
  if (r.spec.mode == RunMode::federated && r.spec.fed) {
    k.mode = 1;
    k.n_clients = r.spec.fed->n_clients;
    k.aggregator = r.spec.fed->aggregator == Aggregator::fedavg ? 0 : 1;
    k.mu = r.spec.fed->effective_mu();
  }
  return k;
}

std::string short_number(double v) {
  std::ostringstream os;
  os << v;
  return os.str();
}

std::string full_label(const SettingKey& k) {
  if (k.mode == 0) return "Centralized";
  std::string s = "FL-" + std::to_string(k.n_clients);
  if (k.aggregator == 1) s += " FedProx mu=" + short_number(k.mu);
  return s;
}

std::string label_of(const SettingKey& k, GroupBy g) {
  if (k.mode == 0) return "Centralized";
  switch (g) {
    case GroupBy::mode:
      return "FL";
    case GroupBy::clients:
      return std::to_string(k.n_clients) + " clients";
    case GroupBy::mu:
      return k.aggregator == 0 ? "FedAvg" : "mu=" + short_number(k.mu);
  }
  return full_label(k);
}

struct Cell {
  std::vector<std::uint64_t> seeds;
  std::size_t failed = 0;
  double sums[5] = {0, 0, 0, 0, 0};
  std::size_t ok = 0;
};

const char* kMetricNames[5] = {"precision", "recall", "f1", "auroc", "aupr"};

std::string pad(const std::string& s, std::size_t w) { return s.size() >= w ? s : s + std::string(w - s.size(), ' '); }

}  // namespace

Report render_report(const std::vector<ResultRow>& rows, GroupBy group_by) {
  if (rows.empty()) throw UsageError("render_report: no rows");

  std::vector<std::string> datasets;
  std::map<std::tuple<std::string, int, SettingKey>, Cell> cells;
  std::vector<SettingKey> settings;
  for (const auto& r : rows) {
    if (std::find(datasets.begin(), datasets.end(), r.spec.dataset.id) == datasets.end()) {
      datasets.push_back(r.spec.dataset.id);
    }
    const auto key = setting_of(r);
    if (std::find(settings.begin(), settings.end(), key) == settings.end()) settings.push_back(key);
    auto& c = cells[{r.spec.dataset.id, static_cast<int>(r.spec.model.kind), key}];
    if (!r.ok) {
      ++c.failed;
      continue;
    }
    c.seeds.push_back(r.spec.seed);
    const double m[5] = {r.metrics.precision, r.metrics.recall, r.metrics.f1, r.metrics.auroc, r.metrics.aupr};
    for (int i = 0; i < 5; ++i) c.sums[i] += m[i];
    ++c.ok;
  }
  std::sort(settings.begin(), settings.end());

  std::vector<std::string> labels;
  for (const auto& k : settings) labels.push_back(label_of(k, group_by));
  for (std::size_t i = 0; i < settings.size(); ++i) {
    if (std::count(labels.begin(), labels.end(), label_of(settings[i], group_by)) > 1) {
      labels[i] = full_label(settings[i]);
    }
  }

  const std::size_t w_ds = 12, w_model = 11, w_metric = 7;
  const std::size_t w_block = 5 * w_metric + 2;
  std::ostringstream t;
  std::string head1 = pad("", w_ds + w_model), head2 = pad("dataset", w_ds) + pad("model", w_model);
  for (const auto& l : labels) head1 += "| " + pad(l, w_block - 2);
  for (std::size_t i = 0; i < settings.size(); ++i) {
    head2 += "| ";
    for (const char* h : {"P", "R", "F1", "AUROC", "AUPR"}) head2 += pad(h, w_metric);
  }
  for (auto* h : {&head1, &head2}) {
    while (!h->empty() && h->back() == ' ') h->pop_back();
    t << *h << "\n";
  }

  json dump;
  dump["group_by"] = group_by == GroupBy::mode ? "mode" : group_by == GroupBy::clients ? "clients" : "mu";
  dump["settings"] = labels;
  dump["cells"] = json::array();
  for (const auto& ds : datasets) {
    for (const auto kind : kAllModelKinds) {
      bool any = false;
      for (const auto& k : settings) any = any || cells.count({ds, static_cast<int>(kind), k});
      if (!any) continue;
      std::string line = pad(ds, w_ds) + pad(to_string(kind), w_model);
      for (std::size_t si = 0; si < settings.size(); ++si) {
        line += "| ";
        auto it = cells.find({ds, static_cast<int>(kind), settings[si]});
        if (it == cells.end() || it->second.ok == 0) {
          const std::string mark = it == cells.end() ? "-" : "fail";
          for (int i = 0; i < 5; ++i) line += pad(mark, w_metric);
        } else {
          const auto& c = it->second;
          json mean;
          for (int i = 0; i < 5; ++i) {
            const double v = c.sums[i] / static_cast<double>(c.ok);
            mean[kMetricNames[i]] = v;
            line += pad(format_2dp(v), w_metric);
          }
          dump["cells"].push_back({{"dataset", ds},
                                   {"model", to_string(kind)},
                                   {"setting", labels[si]},
                                   {"n_ok", c.ok},
                                   {"n_failed", c.failed},
                                   {"seeds", c.seeds},
                                   {"mean", mean}});
        }
      }
      while (!line.empty() && line.back() == ' ') line.pop_back();
      t << line << "\n";
    }
  }
  dump["rows"] = json::array();
  for (const auto& r : rows) dump["rows"].push_back(r.to_json());
  return {t.str(), dump};
}

}  // namespace fedad
