#include <gtest/gtest.h>

#include <sys/wait.h>

#include <fstream>
#include <sstream>

#include "fedad/error.hpp"
#include "fedad/suite.hpp"
#include "testing.hpp"

using namespace fedad;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Writes toy.csv and toy.json (6 continuous columns, 10% anomalies) into `dir`.
void write_toy_dataset(const fs::path& dir, std::size_t n = 160) {
  const auto ds = fedad::testing::synthetic_dataset(n, 6, 0.1, 42);
  std::ofstream csv(dir / "toy.csv");
  csv << "f0,f1,f2,f3,f4,f5,label\n";
  csv.precision(17);
  for (std::size_t r = 0; r < ds.n_samples(); ++r) {
    for (std::size_t c = 0; c < 6; ++c) csv << ds.x(r, c) << ",";
    csv << (ds.y[r] ? "anomaly" : "normal") << "\n";
  }
  json schema = {{"name", "toy"}, {"label_column", "label"}, {"anomaly_values", {"anomaly"}}};
  for (int c = 0; c < 6; ++c) schema["features"].push_back({{"name", "f" + std::to_string(c)}});
  std::ofstream(dir / "toy.json") << schema.dump(2);
}

json toy_config() {
  return json::parse(R"({
    "name": "toy",
    "datasets": {"toy": {"csv": "toy.csv", "schema": "toy.json"}},
    "defaults": {"epochs": 4, "local_epochs": 2, "seeds": [0], "batch_size": 16,
                 "model_config": {"latent_dim": 2, "deepsvdd": {"output_features": 2}}},
    "experiments": [
      {"dataset": "toy", "model": ["dae", "deepsvdd"], "mode": ["centralized", "federated"], "clients": 2}
    ]
  })");
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(FEDAD_BENCH_EXE) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

json one_cell(const std::string& extra) {
  json cfg = json::parse(R"({"datasets": {"toy": {"csv": "toy.csv", "schema": "toy.json"}},
                             "experiments": [{"dataset": "toy", "model": "dae"}]})");
  const json fields = json::parse(extra);
  for (auto& [k, v] : fields.items()) cfg["experiments"][0][k] = v;
  return cfg;
}

}  // namespace

TEST(Config, MuListExpandsToThreeSpecs) {
  const auto specs = parse_config(
      one_cell(R"({"mode": "federated", "aggregator": "fedprox", "mu": [0.01, 0.1, 1.0], "seeds": [0]})"), ".");
  ASSERT_EQ(specs.size(), 3u);
  EXPECT_EQ(specs[0].fed->mu, 0.01);
  EXPECT_EQ(specs[2].fed->mu, 1.0);
  EXPECT_NE(specs[0].hash(), specs[1].hash());
}

TEST(Config, ClientListExpandsToThreeSpecs) {
  const auto specs = parse_config(one_cell(R"({"mode": "fl", "clients": [3, 5, 7], "seeds": [1]})"), ".");
  ASSERT_EQ(specs.size(), 3u);
  EXPECT_EQ(specs[1].fed->n_clients, 5u);
  EXPECT_EQ(specs[1].fed->local_epochs, 10u);
  EXPECT_EQ(specs[1].fed->rounds, 20u);
}

TEST(Config, DefaultsAndCentralizedIgnoresFederatedGrid) {
  const auto specs = parse_config(one_cell(R"({"clients": [3, 5], "mu": [0.1, 1.0]})"), ".");
  ASSERT_EQ(specs.size(), 3u);  // seeds 0, 1, 2
  EXPECT_EQ(specs[0].epochs, 200u);
  EXPECT_EQ(specs[0].batch_size, 128u);
  EXPECT_FALSE(specs[0].fed.has_value());
}

TEST(Config, FedAvgIgnoresMuList) {
  const auto specs =
      parse_config(one_cell(R"({"mode": "federated", "mu": [0.1, 1.0], "seeds": [0]})"), ".");
  ASSERT_EQ(specs.size(), 1u);
  EXPECT_EQ(specs[0].fed->mu, 0.0);
}

TEST(Config, KeyedEpochsAndDatasetBatch) {
  json cfg = one_cell(R"({"epochs": {"toy/dae": 7, "*": 3}, "seeds": [0]})");
  cfg["datasets"]["toy"]["batch_size"] = 32;
  const auto specs = parse_config(cfg, ".");
  EXPECT_EQ(specs[0].epochs, 7u);
  EXPECT_EQ(specs[0].batch_size, 32u);
}

TEST(Config, KddBatchDefault) {
  json cfg = json::parse(R"({"datasets": {"kdd10": {"csv": "k.csv", "schema": "k.json"}},
                             "experiments": [{"dataset": "kdd10", "model": "memae", "seeds": [0]}]})");
  EXPECT_EQ(parse_config(cfg, ".")[0].batch_size, 1024u);
}

TEST(Config, ShippedConfigsExpandToTheirGrids) {
  const auto dir = fedad::testing::source_dir() / "configs";
  const auto t2 = parse_config(dir / "models_by_dataset.json");
  EXPECT_EQ(t2.size(), 5u * 4u * 2u * 3u);
  const auto t3 = parse_config(dir / "client_scaling.json");
  EXPECT_EQ(t3.size(), 5u * 4u * 3u * 3u);
  const auto t4 = parse_config(dir / "fedprox_mu.json");
  ASSERT_EQ(t4.size(), 5u * 4u * 3u * 3u);
  for (const auto& s : t4) {
    ASSERT_TRUE(s.fed.has_value());
    EXPECT_EQ(s.fed->aggregator, Aggregator::fedprox);
    EXPECT_EQ(s.fed->rounds, 20u);
  }
  for (const auto& s : t2) EXPECT_TRUE(fs::exists(s.dataset.schema)) << s.dataset.schema;
}

TEST(Config, ErrorsCarryLocation) {
  auto message = [](const json& cfg) {
    try {
      parse_config(cfg, ".");
    } catch (const ConfigError& e) {
      return std::string(e.what());
    }
    return std::string();
  };
  json empty = one_cell("{}");
  empty["experiments"] = json::array();
  EXPECT_NE(message(empty).find("empty grid"), std::string::npos);
  EXPECT_NE(message(one_cell(R"({"seeds": []})")).find("experiments/0/seeds"), std::string::npos);
  EXPECT_NE(message(one_cell(R"({"bogus": 1})")).find("unknown key 'bogus'"), std::string::npos);
  EXPECT_NE(message(one_cell(R"({"model": "vae"})")).find("vae"), std::string::npos);
  EXPECT_NE(message(one_cell(R"({"mode": "fl", "aggregator": "fedsgd"})")).find("fedsgd"), std::string::npos);
  EXPECT_NE(message(one_cell(R"({"dataset": "nope"})")).find("not declared"), std::string::npos);
  json top = one_cell("{}");
  top["extra"] = 1;
  EXPECT_NE(message(top).find("unknown key 'extra'"), std::string::npos);
}

TEST(Spec, JsonRoundTripKeepsHash) {
  const auto specs = parse_config(
      one_cell(R"({"mode": "federated", "aggregator": "fedprox", "mu": 0.1, "seeds": [4], "subsample": 0.5})"), ".");
  const auto& s = specs.front();
  const auto back = ExperimentSpec::from_json(json::parse(s.to_json().dump()));
  EXPECT_EQ(back.hash(), s.hash());
  EXPECT_EQ(back.hash().size(), 16u);
  EXPECT_EQ(back.model, s.model);
  EXPECT_EQ(*back.subsample, 0.5);
}

TEST(Report, FormatTwoDecimalsHalfAwayFromZero) {
  EXPECT_EQ(format_2dp(0.955), "0.96");
  EXPECT_EQ(format_2dp(0.945), "0.95");
  EXPECT_EQ(format_2dp(0.5), "0.50");
  EXPECT_EQ(format_2dp(1.0), "1.00");
  EXPECT_EQ(format_2dp(0.004999), "0.00");
  EXPECT_EQ(format_2dp(0.125), "0.13");
}

TEST(Sha256, KnownVectors) {
  EXPECT_EQ(sha256_hex(""), "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  EXPECT_EQ(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST(Results, RowJsonRoundTrip) {
  ResultRow row;
  row.spec = parse_config(one_cell(R"({"seeds": [3]})"), ".").front();
  row.spec_hash = row.spec.hash();
  row.ok = true;
  row.metrics.auroc = 0.8125;
  row.metrics.tp = 7;
  row.wall_seconds = 1.5;
  row.version = "x";
  row.warnings = {"w"};
  const auto j = row.to_json();
  EXPECT_EQ(j.at("mode"), "centralized");
  EXPECT_EQ(j.at("status"), "ok");
  const auto back = ResultRow::from_json(json::parse(j.dump()));
  EXPECT_EQ(back.spec_hash, row.spec_hash);
  EXPECT_EQ(back.metrics.auroc, 0.8125);
  EXPECT_EQ(back.metrics.tp, 7u);
  EXPECT_EQ(back.warnings, row.warnings);
  EXPECT_EQ(back.spec.hash(), row.spec.hash());
}

TEST(Report, OneRowGivesOneLineTable) {
  ResultRow row;
  row.spec = parse_config(one_cell(R"({"seeds": [0]})"), ".").front();
  row.ok = true;
  row.metrics.precision = 0.5;
  row.metrics.recall = 0.955;
  const auto rep = render_report({row}, GroupBy::mode);
  std::size_t body = 0;
  std::istringstream lines(rep.table);
  std::string line;
  bool saw_value = false;
  while (std::getline(lines, line)) {
    if (line.find("DAE") != std::string::npos) {
      ++body;
      saw_value = line.find("0.96") != std::string::npos;
    }
  }
  EXPECT_EQ(body, 1u);
  EXPECT_TRUE(saw_value) << rep.table;
  EXPECT_FALSE(rep.dump.empty());
}

TEST(Suite, RunsDeterministicallyAndResumes) {
  const auto dir = fedad::testing::temp_dir("suite");
  write_toy_dataset(dir);
  const auto specs = parse_config(toy_config(), dir);
  ASSERT_EQ(specs.size(), 4u);

  SuiteOptions opt;
  opt.out_dir = dir / "a";
  opt.quiet = true;
  opt.config_snapshot = toy_config();
  const auto rows = run_suite(specs, opt);
  ASSERT_EQ(rows.size(), 4u);
  for (const auto& r : rows) {
    EXPECT_TRUE(r.ok) << r.error;
    EXPECT_GE(r.metrics.auroc, 0.0);
    EXPECT_LE(r.metrics.auroc, 1.0);
    EXPECT_TRUE(fs::exists(opt.out_dir / "runs" / r.spec_hash / "model.ckpt"));
    EXPECT_TRUE(fs::exists(opt.out_dir / "runs" / r.spec_hash / "rounds.jsonl"));
  }
  EXPECT_EQ(rows[1].spec.mode, RunMode::federated);
  EXPECT_EQ(rows[1].rounds, 2u);
  EXPECT_TRUE(fs::exists(opt.out_dir / "results.csv"));
  EXPECT_TRUE(fs::exists(opt.out_dir / "datasets.json"));
  EXPECT_TRUE(fs::exists(opt.out_dir / "config.json"));

  // Second run in a fresh directory gives identical metrics.
  SuiteOptions opt_b = opt;
  opt_b.out_dir = dir / "b";
  const auto again = run_suite(specs, opt_b);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    EXPECT_EQ(again[i].metrics.auroc, rows[i].metrics.auroc);
    EXPECT_EQ(again[i].metrics.f1, rows[i].metrics.f1);
    EXPECT_EQ(again[i].metrics.threshold, rows[i].metrics.threshold);
  }

  // Resuming appends nothing.
  const auto before = slurp(opt.out_dir / "results.jsonl");
  run_suite(specs, opt);
  EXPECT_EQ(slurp(opt.out_dir / "results.jsonl"), before);

  // A row is reproducible from its recorded spec alone.
  const auto loaded = load_results(opt.out_dir);
  ASSERT_EQ(loaded.size(), 4u);
  SuiteOptions redo_opt;
  redo_opt.out_dir = dir / "c";
  redo_opt.save_checkpoints = false;
  redo_opt.quiet = true;
  const auto redo = run_experiment(loaded[3].spec, redo_opt);
  EXPECT_EQ(redo.metrics.auroc, loaded[3].metrics.auroc);

  // Rendering a stored archive is byte-stable.
  const auto r1 = render_report(load_results(opt.out_dir), GroupBy::mode);
  const auto r2 = render_report(load_results(opt.out_dir), GroupBy::mode);
  EXPECT_EQ(r1.dump.dump(), r2.dump.dump());
  // Across archives only wall time may differ.
  const auto rb = render_report(load_results(opt_b.out_dir), GroupBy::mode);
  EXPECT_EQ(r1.table, rb.table);
  EXPECT_EQ(r1.dump["cells"], rb.dump["cells"]);
  fs::remove_all(dir);
}

TEST(Suite, FailedRunsAreRecordedNotThrown) {
  const auto dir = fedad::testing::temp_dir("suite_fail");
  write_toy_dataset(dir);
  json cfg = toy_config();
  cfg["datasets"]["missing"] = {{"csv", "nope.csv"}, {"schema", "toy.json"}};
  cfg["experiments"] = json::parse(R"([{"dataset": ["missing", "toy"], "model": "dae"}])");
  const auto specs = parse_config(cfg, dir);
  SuiteOptions opt;
  opt.out_dir = dir / "out";
  opt.quiet = true;
  const auto rows = run_suite(specs, opt);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_FALSE(rows[0].ok);
  EXPECT_NE(rows[0].error.find("nope.csv"), std::string::npos) << rows[0].error;
  EXPECT_TRUE(rows[1].ok);
  const auto rep = render_report(load_results(opt.out_dir), GroupBy::mode);
  EXPECT_NE(rep.table.find("fail"), std::string::npos) << rep.table;
  fs::remove_all(dir);
}

TEST(Cli, ExitCodes) {
  const auto dir = fedad::testing::temp_dir("cli");
  write_toy_dataset(dir);
  std::ofstream(dir / "good.json") << toy_config().dump(2);
  json bad = toy_config();
  bad["experiments"][0]["colour"] = "red";
  std::ofstream(dir / "bad.json") << bad.dump(2);
  json partial = toy_config();
  partial["datasets"]["missing"] = {{"csv", "nope.csv"}, {"schema", "toy.json"}};
  partial["experiments"] = json::parse(R"([{"dataset": ["missing", "toy"], "model": "dae"}])");
  std::ofstream(dir / "partial.json") << partial.dump(2);

  const std::string out = (dir / "out").string();
  EXPECT_EQ(run_cli("run " + (dir / "good.json").string() + " --out " + out), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "results.jsonl"));
  EXPECT_EQ(run_cli("report " + out), 0);
  EXPECT_TRUE(fs::exists(dir / "out" / "report.json"));
  EXPECT_EQ(run_cli("report " + out + " --group-by clients"), 0);
  EXPECT_EQ(run_cli("run " + (dir / "bad.json").string() + " --out " + out), 2);
  EXPECT_EQ(run_cli("run " + (dir / "partial.json").string() + " --out " + (dir / "p").string()), 1);
  EXPECT_EQ(run_cli("validate-data " + (dir / "toy.json").string() + " " + (dir / "toy.csv").string()), 0);
  EXPECT_EQ(run_cli("frobnicate"), 2);
  EXPECT_EQ(run_cli("--version"), 0);
  fs::remove_all(dir);
}
