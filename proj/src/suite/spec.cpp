#include <algorithm>
#include <cctype>
#include <fstream>
#include <map>
#include <set>

#include "fedad/config_json.hpp"
#include "fedad/error.hpp"
#include "fedad/suite.hpp"

namespace fedad {

using nlohmann::json;
namespace fs = std::filesystem;

const char* to_string(RunMode m) { return m == RunMode::centralized ? "centralized" : "federated"; }

RunMode parse_run_mode(std::string_view s) {
  if (s == "centralized") return RunMode::centralized;
  if (s == "federated" || s == "fl") return RunMode::federated;
  throw ConfigError("unknown mode '" + std::string(s) + "' (expected centralized or federated)");
}

namespace {

const char* to_string(ThresholdSearch t) { return t == ThresholdSearch::window ? "window" : "exhaustive"; }

ThresholdSearch parse_threshold_search(std::string_view s, const std::string& where) {
  if (s == "window") return ThresholdSearch::window;
  if (s == "exhaustive") return ThresholdSearch::exhaustive;
  throw ConfigError(where + ": unknown threshold_search '" + std::string(s) + "'");
}

json fed_to_json(const FedConfig& f) {
  return {{"n_clients", f.n_clients},   {"local_epochs", f.local_epochs},
          {"rounds", f.rounds},         {"aggregator", to_string(f.aggregator)},
          {"mu", f.mu},                 {"batch_size", f.batch_size},
          {"client_seeds", f.client_seeds}, {"optimizer_policy", to_string(f.optimizer_policy)}};
}

FedConfig fed_from_json(const json& j) {
  FedConfig f;
  f.n_clients = j.at("n_clients").get<std::size_t>();
  f.local_epochs = j.at("local_epochs").get<std::size_t>();
  f.rounds = j.at("rounds").get<std::size_t>();
  f.aggregator = parse_aggregator(j.at("aggregator").get<std::string>());
  f.mu = j.at("mu").get<double>();
  f.batch_size = j.at("batch_size").get<std::size_t>();
  f.client_seeds = j.value("client_seeds", std::vector<std::uint64_t>{});
  f.optimizer_policy = parse_optimizer_policy(j.value("optimizer_policy", std::string("persist")));
  return f;
}

}  // namespace

std::size_t default_batch_size(std::string_view dataset_id) {
  const auto id = canonical_dataset_id(dataset_id);
  return id == "kdd10" || id == "nslkdd" ? 1024 : 128;
}

void ExperimentSpec::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(val_fraction > 0.0 && val_fraction < 1.0)) throw ConfigError("val_fraction must be in (0, 1)");
  if (subsample && !(*subsample > 0.0 && *subsample <= 1.0)) throw ConfigError("subsample must be in (0, 1]");
  if (mode == RunMode::federated) {
    if (!fed) throw ConfigError("federated run without a federation config");
    fed->validate();
  }
}

json ExperimentSpec::to_json() const {
  json j;
  j["dataset"] = {{"id", dataset.id}, {"csv", dataset.csv}, {"schema", dataset.schema}};
  j["model"] = model_config_to_json(model);
  j["epochs"] = epochs;
  j["mode"] = fedad::to_string(mode);
  j["fed"] = mode == RunMode::federated && fed ? fed_to_json(*fed) : json(nullptr);
  j["seed"] = seed;
  j["batch_size"] = batch_size;
  j["val_fraction"] = val_fraction;
  j["subsample"] = subsample ? json(*subsample) : json(nullptr);
  j["threshold_search"] = to_string(threshold_search);
  return j;
}

ExperimentSpec ExperimentSpec::from_json(const json& j) {
  ExperimentSpec s;
  const auto& d = j.at("dataset");
  s.dataset = {d.at("id").get<std::string>(), d.at("csv").get<std::string>(), d.at("schema").get<std::string>()};
  s.model = model_config_from_json(j.at("model"), ModelConfig{}, "spec/model");
  s.epochs = j.at("epochs").get<std::size_t>();
  s.mode = parse_run_mode(j.at("mode").get<std::string>());
  if (!j.at("fed").is_null()) s.fed = fed_from_json(j["fed"]);
  s.seed = j.at("seed").get<std::uint64_t>();
  s.batch_size = j.at("batch_size").get<std::size_t>();
  s.val_fraction = j.at("val_fraction").get<double>();
  if (!j.at("subsample").is_null()) s.subsample = j["subsample"].get<double>();
  s.threshold_search = parse_threshold_search(j.at("threshold_search").get<std::string>(), "spec");
  return s;
}

std::string ExperimentSpec::hash() const { return sha256_hex(to_json().dump()).substr(0, 16); }

// ---- config parsing -------------------------------------------------------

namespace {

const std::set<std::string> kTopKeys = {"name", "description", "data_dir", "datasets", "defaults", "experiments"};
const std::set<std::string> kDatasetKeys = {"csv", "schema", "batch_size"};
const std::set<std::string> kCellKeys = {
    "dataset",      "model",       "mode",         "clients",          "aggregator",
    "mu",           "seeds",       "epochs",       "local_epochs",     "rounds",
    "batch_size",   "val_fraction", "subsample",   "optimizer_policy", "threshold_search",
    "model_config", "description"};

void check_keys(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
  }
}

template <class T>
std::vector<T> as_list(const json& j, const std::string& where) {
  try {
    if (j.is_array()) {
      if (j.empty()) throw ConfigError(where + ": empty grid (list has no values)");
      return j.get<std::vector<T>>();
    }
    return {j.get<T>()};
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

template <class T>
T as_value(const json& j, const std::string& where) {
  try {
    return j.get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

// A number, or an object keyed by "dataset/model", "model", "dataset" or "*".
std::optional<std::size_t> keyed_count(const json& j, const std::string& dataset, const std::string& model,
                                       const std::string& where) {
  if (j.is_null()) return std::nullopt;
  if (j.is_number_unsigned() || j.is_number_integer()) return as_value<std::size_t>(j, where);
  if (!j.is_object()) throw ConfigError(where + ": expected a count or an object of counts");
  const auto lower = [](std::string v) {
    for (auto& c : v) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return v;
  };
  for (const auto& key : {dataset + "/" + model, model, dataset, std::string("*")}) {
    for (const auto& [k, v] : j.items()) {
      if (lower(k) == lower(key)) return as_value<std::size_t>(v, where + "/" + k);
    }
  }
  return std::nullopt;
}

std::string resolve(const fs::path& base, const std::string& p) {
  const fs::path path(p);
  return (path.is_absolute() ? path : base / path).lexically_normal().string();
}

}  // namespace

std::vector<ExperimentSpec> parse_config(const json& config, const fs::path& base_dir, const std::string& where) {
  check_keys(config, kTopKeys, where);
  const fs::path data_dir = config.contains("data_dir")
                                ? fs::path(resolve(base_dir, as_value<std::string>(config["data_dir"], where + "/data_dir")))
                                : base_dir;

  std::map<std::string, std::pair<DatasetRef, std::optional<std::size_t>>> datasets;
  if (config.contains("datasets") && !config["datasets"].is_object()) {
    throw ConfigError(where + "/datasets: expected an object");
  }
  const json declared = config.value("datasets", json::object());
  for (const auto& [id, d] : declared.items()) {
    const auto dw = where + "/datasets/" + id;
    check_keys(d, kDatasetKeys, dw);
    if (!d.contains("csv") || !d.contains("schema")) throw ConfigError(dw + ": 'csv' and 'schema' are required");
    DatasetRef ref{id, resolve(data_dir, as_value<std::string>(d["csv"], dw + "/csv")),
                   resolve(base_dir, as_value<std::string>(d["schema"], dw + "/schema"))};
    std::optional<std::size_t> batch;
    if (d.contains("batch_size")) batch = as_value<std::size_t>(d["batch_size"], dw + "/batch_size");
    datasets[id] = {ref, batch};
  }

  const json defaults = config.value("defaults", json::object());
  check_keys(defaults, kCellKeys, where + "/defaults");
  if (!config.contains("experiments") || !config["experiments"].is_array() || config["experiments"].empty()) {
    throw ConfigError(where + "/experiments: empty grid (need at least one experiment)");
  }

  std::vector<ExperimentSpec> specs;
  std::size_t ei = 0;
  for (const auto& exp : config["experiments"]) {
    const auto ew = where + "/experiments/" + std::to_string(ei++);
    check_keys(exp, kCellKeys, ew);
    json cell = defaults;
    for (const auto& [k, v] : exp.items()) cell[k] = v;
    auto field = [&](const char* key) -> const json& {
      static const json null_value;
      return cell.contains(key) ? cell[key] : null_value;
    };
    auto loc = [&](const char* key) { return (exp.contains(key) ? ew : where + "/defaults") + "/" + key; };

    if (!cell.contains("dataset")) throw ConfigError(ew + ": 'dataset' is required");
    if (!cell.contains("model")) throw ConfigError(ew + ": 'model' is required");
    const auto ds_list = as_list<std::string>(cell["dataset"], loc("dataset"));
    const auto model_list = as_list<std::string>(cell["model"], loc("model"));
    const auto mode_list = as_list<std::string>(cell.value("mode", json("centralized")), loc("mode"));
    const auto seeds = as_list<std::uint64_t>(cell.value("seeds", json::array({0, 1, 2})), loc("seeds"));
    const auto clients = as_list<std::size_t>(cell.value("clients", json(3)), loc("clients"));
    const auto aggregators = as_list<std::string>(cell.value("aggregator", json("fedavg")), loc("aggregator"));
    const auto mus = as_list<double>(cell.value("mu", json(0.0)), loc("mu"));
    const auto local_epochs = cell.contains("local_epochs") ? as_value<std::size_t>(cell["local_epochs"], loc("local_epochs")) : 10;
    const double val_fraction = cell.contains("val_fraction") ? as_value<double>(cell["val_fraction"], loc("val_fraction")) : 0.5;
    std::optional<double> subsample;
    if (!field("subsample").is_null()) subsample = as_value<double>(cell["subsample"], loc("subsample"));
    const auto policy = parse_optimizer_policy(cell.value("optimizer_policy", std::string("persist")));
    const auto search = parse_threshold_search(cell.value("threshold_search", std::string("window")), loc("threshold_search"));
    const json overrides = cell.value("model_config", json::object());
    if (!overrides.is_object()) throw ConfigError(loc("model_config") + ": expected an object");

    for (const auto& ds : ds_list) {
      auto it = datasets.find(ds);
      if (it == datasets.end()) throw ConfigError(loc("dataset") + ": dataset '" + ds + "' is not declared under datasets");
      const auto& [ref, ds_batch] = it->second;
      for (const auto& model_name : model_list) {
        const ModelKind kind = parse_model_kind(model_name);
        const std::string mname = to_string(kind);
        ModelConfig mc = preset_config(kind, ds);
        json flat = json::object();
        for (const auto& [k, v] : overrides.items()) {
          if (v.is_object()) {
            try {
              (void)parse_model_kind(k);
            } catch (const ConfigError&) {
              throw ConfigError(loc("model_config") + ": unknown key '" + k + "'");
            }
          } else {
            flat[k] = v;
          }
        }
        mc = model_config_from_json(flat, mc, loc("model_config"));
        for (const auto& [k, v] : overrides.items()) {
          if (v.is_object() && parse_model_kind(k) == kind) mc = model_config_from_json(v, mc, loc("model_config") + "/" + k);
        }
        mc.kind = kind;

        const auto epochs = keyed_count(field("epochs"), ds, mname, loc("epochs")).value_or(200);
        const auto rounds_override = keyed_count(field("rounds"), ds, mname, loc("rounds"));
        std::size_t batch = ds_batch.value_or(default_batch_size(ds));
        if (cell.contains("batch_size")) batch = *keyed_count(cell["batch_size"], ds, mname, loc("batch_size"));

        for (const auto& mode_name : mode_list) {
          const RunMode mode = parse_run_mode(mode_name);
          for (const auto seed : seeds) {
            ExperimentSpec base;
            base.dataset = ref;
            base.model = mc;
            base.epochs = epochs;
            base.mode = mode;
            base.seed = seed;
            base.batch_size = batch;
            base.val_fraction = val_fraction;
            base.subsample = subsample;
            base.threshold_search = search;
            if (mode == RunMode::centralized) {
              base.validate();
              specs.push_back(base);
              continue;
            }
            for (const auto k : clients) {
              for (const auto& agg_name : aggregators) {
                const Aggregator agg = parse_aggregator(agg_name);
                const std::vector<double> mu_values = agg == Aggregator::fedprox ? mus : std::vector<double>{0.0};
                for (const double mu : mu_values) {
                  ExperimentSpec s = base;
                  FedConfig f;
                  f.n_clients = k;
                  f.local_epochs = local_epochs;
                  f.rounds = rounds_override.value_or(std::max<std::size_t>(1, epochs / local_epochs));
                  f.aggregator = agg;
                  f.mu = mu;
                  f.batch_size = batch;
                  f.optimizer_policy = policy;
                  s.fed = f;
                  try {
                    s.validate();
                  } catch (const ConfigError& e) {
                    throw ConfigError(ew + ": " + e.what());
                  }
                  specs.push_back(std::move(s));
                }
              }
            }
          }
        }
      }
    }
  }
  if (specs.empty()) throw ConfigError(where + ": empty grid");
  return specs;
}

std::vector<ExperimentSpec> parse_config(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return parse_config(j, path.parent_path().empty() ? fs::path(".") : path.parent_path(), path.string());
}

}  // namespace fedad
