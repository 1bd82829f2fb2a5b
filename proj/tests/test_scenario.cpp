#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "scenario.hpp"

using namespace confgeom::scenario;

namespace {

ExitCode parse_code(const std::string& text) {
  try {
    parse_scenario(text);
  } catch (const std::exception& e) {
    return exit_code_for(e);
  }
  return ExitCode::Ok;
}

const char* const kMinimal = R"toml(name = "minimal"
tasks = ["curvature"]

[manifold]
model = "euclidean"
dim = 3
points = [[0.1, 0.2, 0.3]]
)toml";

}  // namespace

TEST_CASE("every catalog entry passes") {
  REQUIRE(catalog().size() == 8);
  for (const auto& entry : catalog()) {
    CAPTURE(entry.name);
    const Report r = run_scenario(load_scenario(entry.name));
    CHECK(r.passed);
    CHECK(r.json["scenario"] == entry.name);
    CHECK(r.json["scenario_hash"] == fnv1a_hex(entry.source));
  }
}

TEST_CASE("reports are reproducible apart from timings") {
  for (const char* name : {"random_polynomial", "flat_circle"}) {
    CAPTURE(name);
    const Scenario s = load_scenario(name);
    const Report a = run_scenario(s), b = run_scenario(s);
    CHECK(a.without_timings() == b.without_timings());
    CHECK(a.traces == b.traces);
    CHECK_FALSE(a.without_timings().contains("timings"));
  }
}

TEST_CASE("seed override changes random data but keeps the verdict") {
  const Scenario base = load_scenario("random_polynomial");
  const Scenario other = load_scenario("random_polynomial", {std::uint64_t{7}, std::nullopt});
  CHECK(other.seed == 7);
  const Report a = run_scenario(base), b = run_scenario(other);
  CHECK(b.passed);
  CHECK(a.without_timings()["tasks"] != b.without_timings()["tasks"]);
}

TEST_CASE("tolerance override applies to every residual") {
  const Scenario loose = load_scenario("flat_line_r3", {std::nullopt, 1e-3});
  CHECK(loose.tol.residual == 1e-3);
  CHECK(loose.tol.geodesic == 1e-3);
  CHECK(loose.tol.roundtrip == 1e-3);
  for (const auto& task : run_scenario(loose).json["tasks"])
    for (const auto& [name, r] : task["residuals"].items()) CHECK(r["tolerance"] == 1e-3);

  const Scenario strict = load_scenario("flat_circle", {std::nullopt, 1e-30});
  CHECK_FALSE(run_scenario(strict).passed);
}

TEST_CASE("fnv1a matches the reference vectors") {
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}

TEST_CASE("minimal scenario parses with defaults") {
  const Scenario s = parse_scenario(kMinimal);
  CHECK(s.name == "minimal");
  CHECK(s.chart.dim() == 3);
  CHECK(s.output_dir == "out/minimal");
  CHECK(run_scenario(s).passed);
}

TEST_CASE("syntax and type errors map to the parse exit code") {
  CHECK(parse_code("name = ") == ExitCode::Parse);
  CHECK(parse_code(std::string(kMinimal) + "bogus = 1\n") == ExitCode::Parse);
  CHECK(parse_code(R"toml(tasks = ["curvature"]
[manifold]
model = "euclidean"
dim = "three"
)toml") == ExitCode::Parse);
  CHECK(parse_code(R"toml(tasks = ["curvature"]
[manifold]
model = "hyperbolic"
dim = 3
)toml") == ExitCode::Parse);
  CHECK(parse_code(R"toml(tasks = ["curvature"]
[manifold]
model = "euclidean"
dim = 2
points = [[0.0, "x"]]
)toml") == ExitCode::Parse);
}

TEST_CASE("unmet task prerequisites map to the validation exit code") {
  CHECK(parse_code(R"toml(tasks = ["geodesic"]
[manifold]
model = "euclidean"
dim = 3
)toml") == ExitCode::Validation);
  CHECK(parse_code(R"toml(tasks = ["invariants"]
[manifold]
model = "euclidean"
dim = 3
)toml") == ExitCode::Validation);
  CHECK(parse_code(R"toml(tasks = ["realize"]
)toml") == ExitCode::Validation);
  CHECK(parse_code(R"toml(tasks = ["teleport"]
[manifold]
model = "euclidean"
dim = 3
)toml") == ExitCode::Validation);
}

TEST_CASE("unknown catalog names list the available entries") {
  try {
    catalog_entry("no_such_entry");
    FAIL("expected an error");
  } catch (const ScenarioError& e) {
    CHECK(e.code() == ExitCode::Parse);
    CHECK(std::string(e.what()).find("flat_circle") != std::string::npos);
  }
  CHECK(exit_code_for(std::runtime_error("x")) == ExitCode::Numerical);
}

TEST_CASE("artifacts are written to the output directory") {
  const auto dir = std::filesystem::temp_directory_path() / "confgeom_scenario_test";
  std::filesystem::remove_all(dir);
  const Report r = run_scenario(load_scenario("flat_circle"));
  write_artifacts(r, dir);
  CHECK(std::filesystem::exists(dir / "report.json"));
  CHECK(std::filesystem::exists(dir / "trace_geodesic.csv"));
  std::ifstream in(dir / "report.json");
  std::stringstream text;
  text << in.rdbuf();
  CHECK(nlohmann::json::parse(text.str())["passed"] == true);
  std::filesystem::remove_all(dir);
}

TEST_CASE("scenario files load from disk") {
  const auto file = std::filesystem::temp_directory_path() / "confgeom_minimal.toml";
  std::ofstream(file) << kMinimal;
  CHECK(load_scenario(file.string()).name == "minimal");
  std::filesystem::remove(file);
}
