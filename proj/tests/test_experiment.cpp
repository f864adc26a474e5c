#include <catch2/catch_amalgamated.hpp>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "ncpt/experiment.hpp"
#include "ncpt/suites.hpp"

using namespace ncpt;

namespace {

json network_doc() {
  return json::parse(R"({
    "scenario": {
      "kind": "mode_network",
      "mode_dims": [3, 3],
      "horizon": 1.0,
      "couplings": [{"modes": [0, 1], "envelope": {"kind": "sinusoid", "amplitude": 0.3, "omega": 1.0}}],
      "frequencies": [{"mode": 1, "envelope": {"kind": "constant", "amplitude": 0.1}}],
      "initial": {"superposition": [{"amplitude": 0.8, "occupations": [1, 0]},
                                    {"amplitude": [0, 0.6], "occupations": [0, 1]}]}
    },
    "methods": ["nested", "dyson", "exact"],
    "max_order": 3,
    "slices": {"initial": 64, "max": 16384, "tolerance": 1e-11},
    "seed": 3
  })");
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text) {
  std::vector<std::vector<std::string>> rows;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) cells.push_back(cell);
    rows.push_back(cells);
  }
  return rows;
}

}  // namespace

TEST_CASE("config parsing", "[experiment]") {
  const auto cfg = parse_config(network_doc());
  CHECK(cfg.scenario.kind == ScenarioKind::mode_network);
  CHECK(cfg.time == 1.0);
  CHECK(cfg.max_order == 3);
  CHECK(cfg.slices.tolerance == 1e-11);
  CHECK(cfg.seed == 3);
  REQUIRE(cfg.scenario.initial.size() == 2);
  CHECK(cfg.scenario.initial[1].amplitude == cplx(0.0, 0.6));
  CHECK(std::abs(cfg.scenario.couplings[0].envelope(0.5) - 0.3 * std::sin(0.5)) < 1e-15);

  auto bad = network_doc();
  bad["scenario"]["couplings"][0]["modes"] = {0, 2};
  CHECK_THROWS_AS(parse_config(bad), InvalidArgument);
  bad = network_doc();
  bad["methods"] = json::array();
  CHECK_THROWS_AS(parse_config(bad), InvalidArgument);
  bad = network_doc();
  bad["methods"] = {"nested", "magnus"};
  CHECK_THROWS_AS(parse_config(bad), InvalidArgument);
  bad = network_doc();
  bad["typo"] = 1;
  CHECK_THROWS_AS(parse_config(bad), InvalidArgument);
  bad = network_doc();
  bad["scenario"]["mode_dims"] = "three";
  CHECK_THROWS_AS(parse_config(bad), InvalidArgument);
  bad = network_doc();
  bad["time"] = 2.0;
  CHECK_THROWS_AS(parse_config(bad), InvalidArgument);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), InvalidArgument);
}

TEST_CASE("zero Hamiltonian experiment", "[experiment]") {
  auto doc = network_doc();
  doc["scenario"].erase("couplings");
  doc["scenario"].erase("frequencies");
  doc["methods"] = {"nested", "exact"};
  const auto rep = run_experiment(parse_config(doc));
  const auto j = to_json(rep);
  for (const auto& m : j["methods"]) {
    CHECK(m["ok"] == true);
    if (m.contains("residual_vs_exact") && m["residual_vs_exact"].is_array())
      for (const auto& r : m["residual_vs_exact"]) CHECK(r.get<double>() == 0.0);
  }
  CHECK_FALSE(rep.all_requested_failed());
}

TEST_CASE("report and CSV contents", "[experiment]") {
  const auto rep = run_experiment(parse_config(network_doc()));
  const auto csv = orders_csv(rep);
  const auto rows = csv_rows(csv);
  REQUIRE(!rows.empty());
  CHECK(csv.substr(0, csv.find('\n')) == "method,order,term_real,term_imag,partial_sum,residual_vs_exact,n_slices");

  std::map<std::string, std::vector<double>> terms;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    REQUIRE(rows[i].size() == 7);
    const auto& r = rows[i];
    if (r[1] == "-1") continue;
    auto& v = terms[r[0]];
    v.push_back(std::stod(r[2]));
    double acc = 0.0;
    for (double x : v) acc += x;
    CHECK(std::abs(std::stod(r[4]) - acc) < 1e-14);
  }
  REQUIRE(terms["nested"].size() == 4);
  REQUIRE(terms["dyson"].size() == 4);
  for (std::size_t m = 1; m <= 3; ++m) CHECK(std::abs(terms["nested"][m] - terms["dyson"][m]) < 1e-8);

  const auto j = to_json(rep);
  CHECK(j["provenance"]["seed"] == 3);
  CHECK(j["provenance"]["config"] == network_doc());
  CHECK(j["exact"]["unitarity_defect"].get<double>() < 1e-10);
  CHECK(j["closure"]["closed"] == true);
  CHECK(j.contains("timing"));
  CHECK_FALSE(to_json(rep, false).contains("timing"));
}

TEST_CASE("reports are deterministic apart from timing", "[experiment]") {
  const auto cfg = parse_config(network_doc());
  CHECK(to_json(run_experiment(cfg), false).dump() == to_json(run_experiment(cfg), false).dump());
}

TEST_CASE("method failures are recorded", "[experiment]") {
  auto doc = network_doc();
  doc["methods"] = {"bch"};
  const auto rep = run_experiment(parse_config(doc));
  REQUIRE(rep.methods.size() == 2);
  CHECK_FALSE(rep.methods[1].ok);
  CHECK(rep.methods[1].failure.find("time-independent") != std::string::npos);
  CHECK(rep.all_requested_failed());

  doc["methods"] = {"bch", "subspace"};
  CHECK_FALSE(run_experiment(parse_config(doc)).all_requested_failed());
}

TEST_CASE("overrides", "[experiment]") {
  auto cfg = parse_config(network_doc());
  apply_overrides(cfg, 5, 32);
  CHECK(cfg.max_order == 5);
  CHECK(cfg.slices.initial_slices == 32);
  CHECK(cfg.slices.max_slices == 32);
  const auto rep = run_experiment(cfg);
  CHECK(rep.methods[1].series.n_slices == 32);
  CHECK(rep.methods[1].series.order_terms.size() == 6);
  CHECK(rep.methods[2].series.order_terms.size() == 5);
  CHECK_THROWS_AS(apply_overrides(cfg, 0, std::nullopt), InvalidArgument);
}

TEST_CASE("write_report creates both files", "[experiment]") {
  const auto dir = std::filesystem::temp_directory_path() / "ncpt_test_report";
  std::filesystem::remove_all(dir);
  auto doc = network_doc();
  doc["methods"] = {"nested"};
  write_report(run_experiment(parse_config(doc)), dir);
  CHECK(std::filesystem::exists(dir / "report.json"));
  CHECK(std::filesystem::exists(dir / "orders.csv"));
  std::ifstream in(dir / "report.json");
  CHECK(json::parse(in)["methods"].size() == 2);
  std::filesystem::remove_all(dir);
}

TEST_CASE("run_suite", "[experiment]") {
  const auto d = run_suite("distinctness", 5);
  CHECK(d.passed());
  CHECK(d.checks.front().detail["words"] == "-AOBC +BAOC -BOAC +CAOB -CBAO +CBOA -COAB +OABC");
  CHECK_THROWS_AS(run_suite("nonsense"), InvalidArgument);
}
