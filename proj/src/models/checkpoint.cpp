// Checkpoint format (text, line oriented):
//
//   fedad-checkpoint 1
//   config <model config as one-line JSON>
//   input_dim <n>
//   layout <16 hex digits>
//   params <count>
//   <count lines of hex-float values>
//   center none | center <count> followed by <count> hex-float lines
//   end

#include <cinttypes>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "fedad/config_json.hpp"
#include "fedad/error.hpp"
#include "fedad/models.hpp"

namespace fedad {

namespace {

constexpr const char* kMagic = "fedad-checkpoint";
constexpr int kVersion = 1;

std::string hexfloat(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

double parse_hexfloat(const std::string& s, std::size_t line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0') {
    throw DataError("checkpoint line " + std::to_string(line) + ": bad number '" + s + "'");
  }
  return v;
}

struct LineReader {
  std::istream& in;
  std::size_t line = 0;
  std::string next(const char* what) {
    std::string s;
    if (!std::getline(in, s)) throw DataError(std::string("checkpoint truncated: expected ") + what);
    ++line;
    return s;
  }
  std::string field(const char* key) {
    auto s = next(key);
    const std::string prefix = std::string(key) + " ";
    if (s.rfind(prefix, 0) != 0) {
      throw DataError("checkpoint line " + std::to_string(line) + ": expected '" + key + "'");
    }
    return s.substr(prefix.size());
  }
};

}  // namespace

void save_checkpoint(std::ostream& out, const ModelState& s) {
  char layout[32];
  std::snprintf(layout, sizeof layout, "%016" PRIx64, layout_checksum(s));
  out << kMagic << " " << kVersion << "\n";
  out << "config " << model_config_to_json(s.config).dump() << "\n";
  out << "input_dim " << s.input_dim << "\n";
  out << "layout " << layout << "\n";
  out << "params " << s.params.size() << "\n";
  for (double v : s.params) out << hexfloat(v) << "\n";
  if (s.center) {
    out << "center " << s.center->size() << "\n";
    for (double v : *s.center) out << hexfloat(v) << "\n";
  } else {
    out << "center none\n";
  }
  out << "end\n";
}

ModelState load_checkpoint(std::istream& in) {
  LineReader r{in};
  const auto head = r.next("header");
  if (head != std::string(kMagic) + " " + std::to_string(kVersion)) {
    throw DataError("not a fedad checkpoint (version " + std::to_string(kVersion) + ")");
  }
  ModelConfig cfg;
  try {
    cfg = model_config_from_json(nlohmann::json::parse(r.field("config")), ModelConfig{}, "config");
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("checkpoint config: ") + e.what());
  }
  const auto input_dim = std::stoull(r.field("input_dim"));
  const auto layout = std::stoull(r.field("layout"), nullptr, 16);
  const auto count = std::stoull(r.field("params"));

  ModelState s = build_model(cfg, input_dim, 0);
  if (layout_checksum(s) != layout || s.params.size() != count) {
    throw DataError("checkpoint layout checksum does not match the model built from its config");
  }
  for (auto& v : s.params) v = parse_hexfloat(r.next("param"), r.line);
  const auto c = r.field("center");
  if (c != "none") {
    std::vector<double> center(std::stoull(c));
    for (auto& v : center) v = parse_hexfloat(r.next("center value"), r.line);
    s.center = std::move(center);
  }
  if (r.next("end") != "end") throw DataError("checkpoint: missing end marker");
  return s;
}

void save_checkpoint(const std::string& path, const ModelState& state) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path);
  save_checkpoint(out, state);
}

ModelState load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path);
  return load_checkpoint(in);
}

}  // namespace fedad
