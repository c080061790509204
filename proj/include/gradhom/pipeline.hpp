#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "gradhom/effective.hpp"
#include "gradhom/mesh.hpp"
#include "gradhom/periodic_fem.hpp"
#include "json.hpp"

namespace gradhom {

inline constexpr const char* kToolVersion = "gradhom 0.1.0";

enum class Determinism { Deterministic, ParallelFast };

struct RunConfig {
  std::optional<RveGeometry> geometry;
  std::optional<std::filesystem::path> mesh_path;  // Gmsh 2.2 import instead of a generator
  std::vector<IsotropicPhase> phases;
  double void_contrast = 1e-6;
  double epsilon = 1.0;
  SolverOptions solver;
  std::optional<std::filesystem::path> result_path;
  std::optional<std::filesystem::path> vtk_dir;
  std::optional<std::filesystem::path> matrix_dump;  // Matrix Market debug output
  Determinism determinism = Determinism::Deterministic;

  /// Throws ConfigError (or ParameterError for material values).
  void validate() const;

  /// Strict parse: unknown keys are rejected. Relative mesh paths are taken
  /// relative to `base_dir`.
  static RunConfig from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = {});
  /// Normalised form with every default spelled out; from_json of it
  /// reproduces the configuration.
  nlohmann::json to_json() const;
};

RunConfig load_config(const std::filesystem::path& path);

struct StageTiming {
  std::string stage;
  double seconds = 0.0;
};

struct InvariantCheck {
  std::string name;
  double value = 0.0;
  double limit = 0.0;
  bool passed = true;
};

struct RunReport {
  std::vector<StageTiming> timings;
  int factorizations = 0;
  int phi_solves = 0;
  int psi_solves = 0;
  double factor_seconds = 0.0;
  double phi_solve_seconds = 0.0;
  double psi_solve_seconds = 0.0;
  double max_residual = 0.0;
  double max_backward_error = 0.0;
  std::size_t nodes = 0;
  std::size_t tets = 0;
  int reduced_dofs = 0;
  std::array<int, 3> periodic_pairs{0, 0, 0};
  double solid_fraction = 1.0;
  std::optional<double> wall_thickness;
  std::vector<InvariantCheck> checks;
  std::vector<std::string> warnings;
  std::string tool_version = kToolVersion;
  nlohmann::json config_echo;

  double seconds(const std::string& stage) const;
};

struct RunOutput {
  HomogenizationResult result;
  RunReport report;
};

/// Full pipeline: mesh, periodic map, assembly and one factorization, six
/// first-order solves, C^M, eighteen second-order solves, G^M and D^M,
/// invariant checks, then outputs. Errors are re-raised as StageError with
/// the original exit code; nothing is written unless every stage succeeds.
RunOutput run(const RunConfig& config);

/// Result document: tensors, moments, metadata. Contains no timings so that
/// deterministic runs serialise byte for byte identically.
nlohmann::json result_to_json(const HomogenizationResult& result);

struct ReportOptions {
  bool si_units = false;
};

/// C^M in GPa, G^M in kN/mm and D^M in TN (times epsilon and epsilon^2),
/// or SI units on request. Entries below 1e-9 of the natural scale of each
/// tensor are shown as zero.
std::string render_report(const HomogenizationResult& result, const RunReport* report = nullptr,
                          ReportOptions options = {});

/// Display-only zero flush: scales are max|C|, max|C| * diagonal and
/// max|C| * diagonal^2 for C, G and D.
struct DisplayScales {
  double C = 0.0;
  double G = 0.0;
  double D = 0.0;
};
DisplayScales display_scales(const HomogenizationResult& result);

}  // namespace gradhom
