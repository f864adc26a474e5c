#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "ncpt/experiment.hpp"
#include "ncpt/suites.hpp"

namespace {

enum Exit { ok = 0, failed = 1, invalid = 2, all_methods_failed = 3 };

int run_suite_command(const std::string& name, std::uint64_t seed, const std::string& out) {
  const auto rep = ncpt::run_suite(name, seed);
  for (const auto& c : rep.checks)
    std::cout << (c.passed ? "PASS " : "FAIL ") << name << ": " << c.name << " (measured "
              << c.measured << ' ' << c.relation << ' ' << c.threshold << ")\n";
  if (!out.empty()) {
    std::filesystem::create_directories(out);
    ncpt::write_text(std::filesystem::path(out) / ("suite_" + name + ".json"), rep.to_json().dump(2) + "\n");
  }
  return rep.passed() ? ok : failed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Nested-commutator perturbation series for expectation values"};
  std::string config, out, suite;
  std::optional<int> order, slices;
  std::optional<std::uint64_t> seed;
  app.add_option("--config", config, "experiment configuration (JSON)");
  app.add_option("--out", out, "output directory for report.json and orders.csv");
  app.add_option("--order", order, "override max_order");
  app.add_option("--slices", slices, "pin the series methods to this many slices");
  app.add_option("--suite", suite, "run a validation suite: linearity, scaling, closure, distinctness");
  app.add_option("--seed", seed, "random seed");
  CLI11_PARSE(app, argc, argv);

  try {
    if (!suite.empty()) return run_suite_command(suite, seed.value_or(0), out);
    if (config.empty()) {
      std::cerr << "error: --config or --suite is required\n";
      return invalid;
    }
    auto cfg = ncpt::load_config(config);
    ncpt::apply_overrides(cfg, order, slices);
    if (seed) {
      cfg.seed = *seed;
      cfg.source["seed"] = *seed;
    }
    const std::filesystem::path dir = !out.empty() ? out : !cfg.output_dir.empty() ? cfg.output_dir : ".";

    const auto rep = ncpt::run_experiment(cfg);
    ncpt::write_report(rep, dir);
    std::cout << "exact " << rep.exact.value << " (n_slices " << rep.exact.n_slices << ")\n";
    for (const auto& m : rep.methods) {
      if (m.method == "exact") continue;
      if (!m.ok)
        std::cout << m.method << " failed: " << m.failure << '\n';
      else if (m.scalar)
        std::cout << m.method << ' ' << m.value << '\n';
      else
        std::cout << m.method << " partial sum " << m.series.total().real() << " through order "
                  << m.series.max_order() << (m.series.converged || m.method == "bch" ? "" : " (not converged)") << '\n';
    }
    std::cout << "wrote " << (dir / "report.json").string() << " and " << (dir / "orders.csv").string() << '\n';
    return rep.all_requested_failed() ? all_methods_failed : ok;
  } catch (const ncpt::InvalidArgument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return invalid;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return failed;
  }
}
