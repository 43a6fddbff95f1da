#include "fedad/config_json.hpp"

#include <set>

#include "fedad/error.hpp"

namespace fedad {

using nlohmann::json;

json model_config_to_json(const ModelConfig& c) {
  json j;
  j["kind"] = to_string(c.kind);
  j["latent_dim"] = c.latent_dim;
  j["memory_dim"] = c.memae_memory_dim;
  j["output_features"] = c.svdd_output_features;
  j["trans_type"] = to_string(c.neutralad_trans_type);
  j["num_transforms"] = c.neutralad_num_transforms;
  j["temperature"] = c.neutralad_temperature;
  j["shrink_threshold"] = c.memae_shrink_threshold;
  j["entropy_weight"] = c.memae_entropy_weight;
  j["dsebm_score"] = c.dsebm_score == DsebmScore::energy ? "energy" : "reconstruction";
  if (c.encoder_widths) j["encoder_widths"] = *c.encoder_widths;
  j["learning_rate"] = c.learning_rate;
  j["weight_decay"] = c.weight_decay;
  return j;
}

namespace {

template <class T>
T get_as(const json& j, const std::string& key, const std::string& where) {
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(where + "/" + key + ": wrong type");
  }
}

std::size_t get_count(const json& j, const std::string& key, const std::string& where) {
  const auto& v = j.at(key);
  if (!v.is_number_integer() || v.get<long long>() < 0) {
    throw ConfigError(where + "/" + key + ": expected a non-negative integer");
  }
  return v.get<std::size_t>();
}

}  // namespace

ModelConfig model_config_from_json(const json& j, const ModelConfig& base, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  static const std::set<std::string> known = {
      "kind",        "latent_dim",       "memory_dim",     "output_features", "trans_type",
      "num_transforms", "temperature",   "shrink_threshold", "entropy_weight", "dsebm_score",
      "encoder_widths", "learning_rate", "weight_decay"};
  for (const auto& [k, v] : j.items()) {
    if (!known.count(k)) throw ConfigError(where + ": unknown key '" + k + "'");
  }
  ModelConfig c = base;
  try {
    if (j.contains("kind")) c.kind = parse_model_kind(get_as<std::string>(j, "kind", where));
    if (j.contains("trans_type")) {
      c.neutralad_trans_type = parse_transform_type(get_as<std::string>(j, "trans_type", where));
    }
  } catch (const ConfigError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  if (j.contains("latent_dim")) c.latent_dim = get_count(j, "latent_dim", where);
  if (j.contains("memory_dim")) c.memae_memory_dim = get_count(j, "memory_dim", where);
  if (j.contains("output_features")) c.svdd_output_features = get_count(j, "output_features", where);
  if (j.contains("num_transforms")) c.neutralad_num_transforms = get_count(j, "num_transforms", where);
  if (j.contains("temperature")) c.neutralad_temperature = get_as<double>(j, "temperature", where);
  if (j.contains("shrink_threshold")) c.memae_shrink_threshold = get_as<double>(j, "shrink_threshold", where);
  if (j.contains("entropy_weight")) c.memae_entropy_weight = get_as<double>(j, "entropy_weight", where);
  if (j.contains("dsebm_score")) {
    const auto s = get_as<std::string>(j, "dsebm_score", where);
    if (s == "energy") c.dsebm_score = DsebmScore::energy;
    else if (s == "reconstruction") c.dsebm_score = DsebmScore::reconstruction;
    else throw ConfigError(where + "/dsebm_score: expected 'energy' or 'reconstruction'");
  }
  if (j.contains("encoder_widths")) {
    c.encoder_widths = get_as<std::vector<std::size_t>>(j, "encoder_widths", where);
  }
  if (j.contains("learning_rate")) c.learning_rate = get_as<double>(j, "learning_rate", where);
  if (j.contains("weight_decay")) c.weight_decay = get_as<double>(j, "weight_decay", where);
  return c;
}

}  // namespace fedad
