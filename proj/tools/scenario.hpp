#pragma once

// Declarative scenarios: a TOML document naming a manifold, optional Weyl,
// Möbius/Laplace, immersion, curve and realization data, and a task list.
// Running a scenario produces a JSON report and CSV traces.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "confgeom/embedding.hpp"
#include "confgeom/errors.hpp"
#include "confgeom/geodesic.hpp"
#include "confgeom/realization.hpp"

namespace confgeom::scenario {

inline constexpr const char* kToolVersion = "1.0.0";

enum class ExitCode : int { Ok = 0, ResidualFailure = 1, Parse = 2, Validation = 3, Numerical = 4 };

/// Scenario-level failure with the exit code it maps to.
class ScenarioError : public Error {
 public:
  ScenarioError(ExitCode code, const std::string& message) : Error(message), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

/// Exit code for an exception escaping parse or run.
ExitCode exit_code_for(const std::exception& e);

struct Tolerances {
  double residual = 1e-8;   // exact identities evaluated with jets
  double algebraic = 1e-10;  // closed-form identities of the pseudo-geodesic surface
  double geodesic = 1e-8;   // |a(gamma)| along integrated curves and circle fits
  double roundtrip = 1e-5;  // realization invariants against their targets
  double table = 1e-6;      // Ricci and covariant tables of the realization
  double section5 = 1e-6;   // h^t checks of the pseudo-geodesic surface
  double classify = 1e-6;   // threshold of the geodesy verdict
  /// Sets every residual tolerance (not the verdict threshold).
  void override_all(double tol);
};

struct Expectations {
  std::optional<std::string> classification;
  /// rho = c * (induced metric) at every immersion point.
  std::optional<double> rho_coefficient;
  /// h = c * g at every manifold point, for the Levi-Civita connection of the gauge metric.
  std::optional<double> schouten_coefficient;
  /// The integrated curve lies on a circle.
  bool circle = false;
};

struct ImmersionSpec {
  Immersion immersion;
  LowDimStructure sub;
  std::vector<std::vector<double>> points;
  std::optional<Expr> density;
};

struct CurveSpec {
  CurveState init;
  IntegrationOptions options;
};

struct RealizationSpec {
  RealizationData geometry;
  PrescribedInvariants targets;
  std::vector<std::vector<double>> samples;
  std::optional<double> epsilon;
};

struct Scenario {
  std::string name;
  std::string description;
  std::string source;  // the TOML text
  std::uint64_t seed = 0;
  std::vector<std::string> tasks;
  ConformalChart chart;
  std::vector<Expr> theta;  // Weyl 1-form relative to the chart's gauge
  LowDimStructure low;
  std::vector<std::vector<double>> points;
  std::optional<ImmersionSpec> immersion;
  std::optional<CurveSpec> curve;
  std::optional<RealizationSpec> realization;
  int section5_grid = 8;
  Tolerances tol;
  Expectations expect;
  std::string output_dir;

  WeylStructure weyl() const;
};

struct ParseOptions {
  std::optional<std::uint64_t> seed;
  std::optional<double> tolerance;
};

/// Parses and validates a scenario document.  Syntax and type errors raise
/// ScenarioError with ExitCode::Parse, unmet task prerequisites ExitCode::Validation.
Scenario parse_scenario(std::string_view text, const ParseOptions& options = {}, std::string fallback_name = "scenario");

/// Reads a scenario file, or a catalog entry when no such file exists.
Scenario load_scenario(const std::string& file_or_name, const ParseOptions& options = {});

struct Report {
  nlohmann::ordered_json json;
  bool passed = false;
  std::map<std::string, std::string> traces;  // file name -> CSV text

  /// The JSON without wall-clock timings, for reproducibility checks.
  nlohmann::ordered_json without_timings() const;
};

/// Runs every task; independent tasks run concurrently.  Library exceptions propagate.
Report run_scenario(const Scenario& s);

/// Writes report.json and the traces into `dir`, creating it.
void write_artifacts(const Report& report, const std::filesystem::path& dir);

/// 64-bit FNV-1a hash, hex encoded.
std::string fnv1a_hex(std::string_view data);

struct CatalogEntry {
  std::string name;
  std::string description;
  std::string source;
};
const std::vector<CatalogEntry>& catalog();
/// Raises ScenarioError(ExitCode::Parse) listing the available names.
const CatalogEntry& catalog_entry(const std::string& name);

}  // namespace confgeom::scenario
