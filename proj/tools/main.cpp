#include <CLI11.hpp>

#include <iomanip>
#include <iostream>

#include "scenario.hpp"
#include "suite.hpp"

namespace sc = confgeom::scenario;

namespace {

int run(const std::string& target, std::optional<std::uint64_t> seed, std::optional<double> tol, const std::string& out) {
  const sc::Scenario s = sc::load_scenario(target, {seed, tol});
  const sc::Report report = sc::run_scenario(s);
  const std::string dir = out.empty() ? s.output_dir : out;
  sc::write_artifacts(report, dir);
  for (const auto& task : report.json["tasks"]) {
    std::cout << task["task"].get<std::string>() << ": " << (task["passed"].get<bool>() ? "PASS" : "FAIL") << "\n";
    for (const auto& [name, r] : task["residuals"].items()) {
      std::cout << "  " << std::left << std::setw(40) << name << std::scientific << std::setprecision(3)
                << r["max"].get<double>() << " (tol " << r["tolerance"].get<double>() << ")"
                << (r["passed"].get<bool>() ? "" : "  FAIL") << "\n";
    }
    if (task.contains("checks"))
      for (const auto& [name, ok] : task["checks"].items())
        std::cout << "  " << std::left << std::setw(40) << name << (ok.get<bool>() ? "ok" : "FAIL") << "\n";
    if (task["results"].contains("classification"))
      std::cout << "  classification: " << task["results"]["classification"].get<std::string>() << "\n";
  }
  std::cout << "report written to " << dir << "/report.json\n";
  return static_cast<int>(report.passed ? sc::ExitCode::Ok : sc::ExitCode::ResidualFailure);
}

int catalog(const std::string& name) {
  if (name.empty()) {
    for (const auto& e : sc::catalog()) std::cout << std::left << std::setw(26) << e.name << e.description << "\n";
    return 0;
  }
  std::cout << sc::catalog_entry(name).source;
  return 0;
}

int selftest() {
  const auto results = acceptance::run_all(&std::cerr);
  acceptance::print(std::cout, results);
  return acceptance::all_passed(results) ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Conformal geometry scenarios, catalog and acceptance self-test"};
  app.require_subcommand(1);

  auto* run_cmd = app.add_subcommand("run", "Run a scenario file or catalog entry, writing report.json and trace CSVs");
  std::string target, out;
  std::optional<std::uint64_t> seed;
  std::optional<double> tol;
  run_cmd->add_option("file", target, "Scenario TOML file or catalog name")->required();
  run_cmd->add_option("--seed", seed, "Override the scenario seed");
  run_cmd->add_option("--tol", tol, "Override every residual tolerance")->check(CLI::PositiveNumber);
  run_cmd->add_option("--out", out, "Output directory (default: the scenario's output.dir)");

  auto* cat_cmd = app.add_subcommand("catalog", "List catalog entries, or print one as TOML");
  std::string name;
  cat_cmd->add_option("name", name, "Catalog entry");

  auto* self_cmd = app.add_subcommand("selftest", "Run the acceptance suite");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(sc::ExitCode::Parse);
  }

  try {
    if (*run_cmd) return run(target, seed, tol, out);
    if (*cat_cmd) return catalog(name);
    if (*self_cmd) return selftest();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return static_cast<int>(sc::exit_code_for(e));
  }
  return 0;
}
