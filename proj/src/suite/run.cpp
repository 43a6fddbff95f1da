#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "fedad/data.hpp"
#include "fedad/error.hpp"
#include "fedad/random.hpp"
#include "fedad/suite.hpp"

#ifndef FEDAD_VERSION
#define FEDAD_VERSION "dev"
#endif

namespace fedad {

using nlohmann::json;
namespace fs = std::filesystem;

std::string sha256_hex(std::string_view bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("SHA-256 digest failed");
  }
  std::string out;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", md[i]);
    out += buf;
  }
  return out;
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md, &len);
  std::string out;
  char hex[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(hex, sizeof hex, "%02x", md[i]);
    out += hex;
  }
  return out;
}

json ResultRow::to_json() const {
  json j;
  j["spec_hash"] = spec_hash;
  j["status"] = ok ? "ok" : "failed";
  j["error"] = error;
  j["dataset"] = spec.dataset.id;
  j["model"] = to_string(spec.model.kind);
  j["mode"] = to_string(spec.mode);
  const bool fl = spec.mode == RunMode::federated && spec.fed;
  j["n_clients"] = fl ? json(spec.fed->n_clients) : json(nullptr);
  j["aggregator"] = fl ? json(to_string(spec.fed->aggregator)) : json(nullptr);
  j["mu"] = fl ? json(spec.fed->effective_mu()) : json(nullptr);
  j["seed"] = spec.seed;
  j["epochs"] = spec.epochs;
  j["rounds"] = rounds;
  j["metrics"] = ok ? metrics.to_json() : json(nullptr);
  j["wall_seconds"] = wall_seconds;
  j["version"] = version;
  j["warnings"] = warnings;
  j["spec"] = spec.to_json();
  return j;
}

ResultRow ResultRow::from_json(const json& j) {
  ResultRow r;
  r.spec = ExperimentSpec::from_json(j.at("spec"));
  r.spec_hash = j.at("spec_hash").get<std::string>();
  r.ok = j.at("status").get<std::string>() == "ok";
  r.error = j.value("error", std::string());
  if (r.ok) r.metrics = MetricsReport::from_json(j.at("metrics"));
  r.rounds = j.value("rounds", std::size_t{0});
  r.wall_seconds = j.value("wall_seconds", 0.0);
  r.version = j.value("version", std::string());
  r.warnings = j.value("warnings", std::vector<std::string>{});
  return r;
}

namespace {

// Keeps the most recently loaded table; grids usually iterate one dataset at a time.
struct TableCache {
  std::mutex mu;
  std::string key;
  std::shared_ptr<const RawTable> table;
  std::vector<std::string> warnings;
};

TableCache& table_cache() {
  static TableCache cache;
  return cache;
}

std::pair<std::shared_ptr<const RawTable>, std::vector<std::string>> load_table(const DatasetRef& ref) {
  auto& cache = table_cache();
  std::lock_guard lock(cache.mu);
  const std::string key = ref.csv + "\n" + ref.schema;
  if (cache.key != key || !cache.table) {
    const auto schema = load_schema(ref.schema);
    auto table = std::make_shared<RawTable>(load_csv(ref.csv, schema));
    cache.warnings.clear();
    for (const auto& w : check_expected(schema, *table)) cache.warnings.push_back(ref.id + ": " + w);
    cache.table = std::move(table);
    cache.key = key;
  }
  return {cache.table, cache.warnings};
}

fs::path run_dir(const SuiteOptions& options, const std::string& hash) {
  return options.out_dir / "runs" / hash;
}

}  // namespace

ResultRow run_experiment(const ExperimentSpec& spec, const SuiteOptions& options) {
  const auto t0 = std::chrono::steady_clock::now();
  ResultRow row;
  row.spec = spec;
  if (options.subsample) row.spec.subsample = options.subsample;
  if (options.threshold_search) row.spec.threshold_search = *options.threshold_search;
  row.spec_hash = row.spec.hash();
  row.version = FEDAD_VERSION;
  const auto& s = row.spec;
  const bool persist = !options.out_dir.empty();
  try {
    s.validate();
    auto [table, warnings] = load_table(s.dataset);
    row.warnings = warnings;
    std::shared_ptr<const RawTable> raw = table;
    if (s.subsample && *s.subsample < 1.0) {
      raw = std::make_shared<RawTable>(stratified_subsample(*table, *s.subsample, derive_seed(s.seed, 0x737562ULL)));
    }
    EncodeReport enc;
    const DataSplit split = prepare_split(*raw, s.seed, s.val_fraction, &enc);
    if (enc.unseen_categories) {
      row.warnings.push_back(std::to_string(enc.unseen_categories) + " unseen categories in val/test");
    }

    std::ofstream round_log;
    if (persist) {
      fs::create_directories(run_dir(options, row.spec_hash));
      std::ofstream(run_dir(options, row.spec_hash) / "spec.json") << s.to_json().dump(2) << "\n";
      round_log.open(run_dir(options, row.spec_hash) / "rounds.jsonl", std::ios::trunc);
    }
    const RoundSink sink = [&](const RoundLog& log) {
      if (round_log) round_log << log.to_json().dump() << "\n" << std::flush;
    };

    TrainingResult trained;
    if (s.mode == RunMode::centralized) {
      trained = train_centralized(s.model, split.train, s.epochs, s.batch_size, s.seed, sink);
    } else {
      trained = run_training(s.model, split, *s.fed, s.seed, s.epochs, sink);
      row.rounds = s.fed->rounds;
    }
    row.warnings.insert(row.warnings.end(), trained.warnings.begin(), trained.warnings.end());
    row.metrics = evaluate(trained.model, split, s.threshold_search);
    if (persist && options.save_checkpoints) {
      save_checkpoint((run_dir(options, row.spec_hash) / "model.ckpt").string(), trained.model);
    }
    row.ok = true;
  } catch (const std::exception& e) {
    row.ok = false;
    row.error = e.what();
  }
  row.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return row;
}

std::vector<ResultRow> load_results(const fs::path& results_dir) {
  std::vector<ResultRow> rows;
  std::map<std::string, std::size_t> pos;
  std::ifstream in(results_dir / "results.jsonl");
  if (!in) return rows;
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty()) continue;
    ResultRow r;
    try {
      r = ResultRow::from_json(json::parse(line));
    } catch (const std::exception& e) {
      throw DataError((results_dir / "results.jsonl").string() + ": line " + std::to_string(n) + ": " + e.what());
    }
    auto it = pos.find(r.spec_hash);
    if (it == pos.end()) {
      pos[r.spec_hash] = rows.size();
      rows.push_back(std::move(r));
    } else {
      rows[it->second] = std::move(r);
    }
  }
  return rows;
}

namespace {

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c == '\n' ? ' ' : c;
  }
  return out + "\"";
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void write_results_csv(const fs::path& path, const std::vector<ResultRow>& rows) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError("cannot write " + path.string());
  out << "spec_hash,status,dataset,model,mode,n_clients,aggregator,mu,seed,epochs,rounds,batch_size,"
         "precision,recall,f1,auroc,aupr,threshold,tp,fp,tn,fn,wall_seconds,version,error\n";
  for (const auto& r : rows) {
    const bool fl = r.spec.mode == RunMode::federated && r.spec.fed;
    const auto& m = r.metrics;
    out << r.spec_hash << ',' << (r.ok ? "ok" : "failed") << ',' << csv_field(r.spec.dataset.id) << ','
        << to_string(r.spec.model.kind) << ',' << to_string(r.spec.mode) << ','
        << (fl ? std::to_string(r.spec.fed->n_clients) : "") << ',' << (fl ? to_string(r.spec.fed->aggregator) : "")
        << ',' << (fl ? num(r.spec.fed->effective_mu()) : "") << ',' << r.spec.seed << ',' << r.spec.epochs << ','
        << r.rounds << ',' << (fl ? r.spec.fed->batch_size : r.spec.batch_size) << ',';
    if (r.ok) {
      out << num(m.precision) << ',' << num(m.recall) << ',' << num(m.f1) << ',' << num(m.auroc) << ','
          << num(m.aupr) << ',' << num(m.threshold) << ',' << m.tp << ',' << m.fp << ',' << m.tn << ',' << m.fn;
    } else {
      out << ",,,,,,,,,";
    }
    out << ',' << num(r.wall_seconds) << ',' << r.version << ',' << csv_field(r.error) << "\n";
  }
}

std::vector<ResultRow> run_suite(const std::vector<ExperimentSpec>& specs, const SuiteOptions& options) {
  if (specs.empty()) throw ConfigError("empty grid: nothing to run");
  if (options.out_dir.empty()) throw UsageError("run_suite needs an output directory");
  fs::create_directories(options.out_dir);
  if (options.config_snapshot) {
    std::ofstream(options.out_dir / "config.json") << options.config_snapshot->dump(2) << "\n";
  }

  json checksums = json::object();
  std::set<std::string> seen;
  for (const auto& s : specs) {
    for (const auto& p : {s.dataset.csv, s.dataset.schema}) {
      if (!seen.insert(p).second) continue;
      try {
        checksums[p] = sha256_file(p);
      } catch (const DataError&) {
        checksums[p] = nullptr;
      }
    }
  }
  std::ofstream(options.out_dir / "datasets.json") << checksums.dump(2) << "\n";

  std::map<std::string, ResultRow> done;
  if (options.resume) {
    for (auto& r : load_results(options.out_dir)) {
      if (r.ok) done.emplace(r.spec_hash, std::move(r));
    }
  }

  std::ofstream sink(options.out_dir / "results.jsonl", std::ios::app);
  if (!sink) throw DataError("cannot write " + (options.out_dir / "results.jsonl").string());

  std::vector<ResultRow> rows;
  for (std::size_t i = 0; i < specs.size(); ++i) {
    ExperimentSpec effective = specs[i];
    if (options.subsample) effective.subsample = options.subsample;
    if (options.threshold_search) effective.threshold_search = *options.threshold_search;
    const auto hash = effective.hash();
    auto it = done.find(hash);
    if (it != done.end()) {
      if (!options.quiet) std::cerr << "[" << i + 1 << "/" << specs.size() << "] " << hash << " done, skipped\n";
      rows.push_back(it->second);
      continue;
    }
    ResultRow row = run_experiment(specs[i], options);
    sink << row.to_json().dump() << "\n" << std::flush;
    if (!options.quiet) {
      std::cerr << "[" << i + 1 << "/" << specs.size() << "] " << row.spec.dataset.id << " "
                << to_string(row.spec.model.kind) << " " << to_string(row.spec.mode);
      if (row.spec.fed && row.spec.mode == RunMode::federated) std::cerr << " k=" << row.spec.fed->n_clients;
      std::cerr << " seed=" << row.spec.seed << ": ";
      if (row.ok) {
        std::cerr << "auroc " << row.metrics.auroc << " f1 " << row.metrics.f1;
      } else {
        std::cerr << "FAILED " << row.error;
      }
      std::cerr << " (" << row.wall_seconds << " s)\n";
    }
    rows.push_back(std::move(row));
  }
  sink.close();
  write_results_csv(options.out_dir / "results.csv", load_results(options.out_dir));
  return rows;
}

}  // namespace fedad
