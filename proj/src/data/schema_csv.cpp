#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "fedad/data.hpp"
#include "fedad/error.hpp"
#include "fedad/random.hpp"

namespace fedad {

using nlohmann::json;

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

bool parse_double(const std::string& s, double& out) {
  const char* b = s.data();
  const char* e = b + s.size();
  if (b != e && *b == '+') ++b;
  auto [p, ec] = std::from_chars(b, e, out);
  return ec == std::errc() && p == e;
}

// RFC 4180 style split: commas, double-quoted fields, "" escapes.
std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur.push_back('"');
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

std::vector<std::string> string_list(const json& j, const std::string& where) {
  if (j.is_string()) return {j.get<std::string>()};
  if (j.is_number_integer()) return {std::to_string(j.get<long long>())};
  if (!j.is_array()) throw ConfigError(where + ": expected a string or list of strings");
  std::vector<std::string> out;
  for (const auto& v : j) {
    if (v.is_string()) out.push_back(v.get<std::string>());
    else if (v.is_number_integer()) out.push_back(std::to_string(v.get<long long>()));
    else throw ConfigError(where + ": expected strings");
  }
  return out;
}

bool label_matches(const std::string& value, const std::vector<std::string>& set) {
  for (const auto& s : set) {
    if (value == s) return true;
    double a, b;
    if (parse_double(value, a) && parse_double(s, b) && a == b) return true;
  }
  return false;
}

}  // namespace

void DatasetSchema::validate() const {
  if (features.empty()) throw ConfigError("schema '" + name + "': no feature columns");
  if (label_column.empty()) throw ConfigError("schema '" + name + "': no label column");
  if (anomaly_values.empty() && normal_values.empty()) {
    throw ConfigError("schema '" + name + "': need anomaly_values or normal_values");
  }
  std::set<std::string> seen{label_column};
  for (const auto& f : features) {
    if (!seen.insert(f.name).second) {
      throw ConfigError("schema '" + name + "': duplicate column '" + f.name + "'");
    }
  }
}

std::size_t DatasetSchema::continuous_count() const {
  return static_cast<std::size_t>(std::count_if(features.begin(), features.end(), [](const auto& f) {
    return f.kind == FeatureKind::continuous;
  }));
}

std::size_t DatasetSchema::categorical_count() const { return features.size() - continuous_count(); }

bool DatasetSchema::is_anomaly_label(const std::string& value) const {
  if (!anomaly_values.empty()) return label_matches(value, anomaly_values);
  return !label_matches(value, normal_values);
}

DatasetSchema parse_schema(const json& j, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  static const std::set<std::string> known = {"name",          "features",      "label_column",
                                              "anomaly_values", "normal_values", "ignore_columns",
                                              "expected",       "description"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
  }
  DatasetSchema s;
  try {
    s.name = j.value("name", std::string("dataset"));
    s.label_column = j.at("label_column").get<std::string>();
  } catch (const json::exception&) {
    throw ConfigError(where + ": 'label_column' (string) is required");
  }
  if (j.contains("anomaly_values")) s.anomaly_values = string_list(j["anomaly_values"], where + "/anomaly_values");
  if (j.contains("normal_values")) s.normal_values = string_list(j["normal_values"], where + "/normal_values");
  if (j.contains("ignore_columns")) s.ignore_columns = string_list(j["ignore_columns"], where + "/ignore_columns");
  if (!j.contains("features") || !j["features"].is_array()) {
    throw ConfigError(where + ": 'features' (list) is required");
  }
  std::size_t i = 0;
  for (const auto& f : j["features"]) {
    const auto fw = where + "/features/" + std::to_string(i++);
    if (!f.is_object() || !f.contains("name") || !f["name"].is_string()) {
      throw ConfigError(fw + ": expected {\"name\": ..., \"kind\": ...}");
    }
    FeatureColumn col;
    col.name = f["name"].get<std::string>();
    const auto kind = f.value("kind", std::string("continuous"));
    if (kind == "continuous") col.kind = FeatureKind::continuous;
    else if (kind == "categorical") col.kind = FeatureKind::categorical;
    else throw ConfigError(fw + "/kind: expected 'continuous' or 'categorical'");
    s.features.push_back(std::move(col));
  }
  if (j.contains("expected")) {
    const auto& e = j["expected"];
    if (e.contains("n_samples")) s.expected.n_samples = e["n_samples"].get<std::size_t>();
    if (e.contains("n_features")) s.expected.n_features = e["n_features"].get<std::size_t>();
    if (e.contains("anomaly_ratio")) s.expected.anomaly_ratio = e["anomaly_ratio"].get<double>();
  }
  s.validate();
  return s;
}

DatasetSchema load_schema(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open schema " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return parse_schema(j, path);
}

RawTable RawTable::select_rows(const std::vector<std::size_t>& idx) const {
  RawTable out;
  out.columns = columns;
  out.numeric.resize(columns.size());
  out.categorical.resize(columns.size());
  for (std::size_t c = 0; c < columns.size(); ++c) {
    for (auto i : idx) {
      if (columns[c].kind == FeatureKind::continuous) out.numeric[c].push_back(numeric[c].at(i));
      else out.categorical[c].push_back(categorical[c].at(i));
    }
  }
  for (auto i : idx) out.labels.push_back(labels.at(i));
  return out;
}

RawTable parse_csv(std::istream& in, const DatasetSchema& schema, const std::string& source) {
  schema.validate();
  std::string line;
  if (!std::getline(in, line) || trim(line).empty()) throw DataError(source + ": empty file");
  if (line.size() >= 3 && static_cast<unsigned char>(line[0]) == 0xEF) line = line.substr(3);  // BOM
  const auto header = split_csv_line(line);
  std::map<std::string, std::size_t> pos;
  for (std::size_t i = 0; i < header.size(); ++i) pos[header[i]] = i;

  auto column_index = [&](const std::string& name) {
    auto it = pos.find(name);
    if (it == pos.end()) throw DataError(source + ": missing column '" + name + "'");
    return it->second;
  };
  const std::size_t label_pos = column_index(schema.label_column);
  std::vector<std::size_t> feat_pos;
  for (const auto& f : schema.features) feat_pos.push_back(column_index(f.name));
  std::set<std::string> allowed{schema.label_column};
  for (const auto& f : schema.features) allowed.insert(f.name);
  for (const auto& c : schema.ignore_columns) allowed.insert(c);
  for (const auto& h : header) {
    if (!allowed.count(h)) throw DataError(source + ": column '" + h + "' is not in the schema");
  }

  RawTable t;
  t.columns = schema.features;
  t.numeric.resize(schema.features.size());
  t.categorical.resize(schema.features.size());
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw DataError(source + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                      " cells, header has " + std::to_string(header.size()));
    }
    for (std::size_t c = 0; c < feat_pos.size(); ++c) {
      const auto& cell = cells[feat_pos[c]];
      if (cell.empty()) {
        throw DataError(source + ": empty cell at row " + std::to_string(row) + ", column " +
                        std::to_string(feat_pos[c] + 1) + " ('" + schema.features[c].name + "')");
      }
      if (schema.features[c].kind == FeatureKind::continuous) {
        double v;
        if (!parse_double(cell, v) || !std::isfinite(v)) {
          throw DataError(source + ": unparseable number '" + cell + "' at row " + std::to_string(row) +
                          ", column " + std::to_string(feat_pos[c] + 1) + " ('" + schema.features[c].name + "')");
        }
        t.numeric[c].push_back(v);
      } else {
        t.categorical[c].push_back(cell);
      }
    }
    const auto& label = cells[label_pos];
    if (label.empty()) {
      throw DataError(source + ": empty label at row " + std::to_string(row) + ", column " +
                      std::to_string(label_pos + 1));
    }
    t.labels.push_back(schema.is_anomaly_label(label) ? 1 : 0);
  }
  if (row == 0) throw DataError(source + ": no data rows");
  return t;
}

RawTable load_csv(const std::string& path, const DatasetSchema& schema) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return parse_csv(in, schema, path);
}

std::vector<std::string> check_expected(const DatasetSchema& schema, const RawTable& raw) {
  std::vector<std::string> w;
  const auto& e = schema.expected;
  if (e.n_samples && *e.n_samples != raw.rows()) {
    w.push_back("n_samples " + std::to_string(raw.rows()) + " differs from expected " +
                std::to_string(*e.n_samples));
  }
  if (e.n_features && *e.n_features != raw.columns.size()) {
    w.push_back("n_features " + std::to_string(raw.columns.size()) + " differs from expected " +
                std::to_string(*e.n_features));
  }
  if (e.anomaly_ratio && raw.rows() > 0) {
    const double ratio = static_cast<double>(std::count(raw.labels.begin(), raw.labels.end(), 1)) /
                         static_cast<double>(raw.rows());
    if (std::abs(ratio - *e.anomaly_ratio) > 5e-4) {
      std::ostringstream os;
      os << "anomaly_ratio " << ratio << " differs from expected " << *e.anomaly_ratio;
      w.push_back(os.str());
    }
  }
  return w;
}

RawTable stratified_subsample(const RawTable& raw, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction <= 1.0)) throw ConfigError("subsample fraction must be in (0, 1]");
  std::vector<std::size_t> in, an;
  for (std::size_t i = 0; i < raw.rows(); ++i) (raw.labels[i] ? an : in).push_back(i);
  Rng rng(derive_seed(seed, 0x737562ULL));
  rng.shuffle(std::span(in));
  rng.shuffle(std::span(an));
  auto keep = [&](std::size_t n) {
    if (n == 0) return std::size_t{0};
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))));
  };
  in.resize(keep(in.size()));
  an.resize(keep(an.size()));
  std::vector<std::size_t> idx(in);
  idx.insert(idx.end(), an.begin(), an.end());
  std::sort(idx.begin(), idx.end());
  return raw.select_rows(idx);
}

}  // namespace fedad
