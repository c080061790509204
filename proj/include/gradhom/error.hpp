#pragma once

#include <functional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>

namespace gradhom {

/// Process exit codes used by the command line front-end.
enum class ExitCode : int {
  Success = 0,
  Config = 2,
  Mesh = 3,
  Solver = 4,
  Consistency = 5,
};

/// Base class of every error raised by the library. Each error knows the
/// exit code the CLI maps it to; the pipeline prefixes the stage name.
class Error : public std::runtime_error {
 public:
  Error(ExitCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ExitCode code() const noexcept { return code_; }

 private:
  ExitCode code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ExitCode::Config, what) {}
};

// Material parameters outside their admissible range.
class ParameterError : public Error {
 public:
  explicit ParameterError(const std::string& what) : Error(ExitCode::Config, what) {}
};

class SymmetryError : public Error {
 public:
  explicit SymmetryError(const std::string& what) : Error(ExitCode::Consistency, what) {}
};

class MeshError : public Error {
 public:
  explicit MeshError(const std::string& what) : Error(ExitCode::Mesh, what) {}
};

class ImportError : public MeshError {
 public:
  using MeshError::MeshError;
};

class GeometryError : public MeshError {
 public:
  using MeshError::MeshError;
};

class PeriodicityError : public MeshError {
 public:
  using MeshError::MeshError;
};

class LocationError : public MeshError {
 public:
  using MeshError::MeshError;
};

class SolverError : public Error {
 public:
  explicit SolverError(const std::string& what) : Error(ExitCode::Solver, what) {}
};

class ConsistencyError : public Error {
 public:
  explicit ConsistencyError(const std::string& what) : Error(ExitCode::Consistency, what) {}
};

/// An error re-raised by the pipeline with the stage it occurred in. Keeps
/// the exit code of the original error.
class StageError : public Error {
 public:
  StageError(std::string stage, const Error& cause)
      : Error(cause.code(), stage + ": " + cause.what()), stage_(std::move(stage)) {}
  const std::string& stage() const noexcept { return stage_; }

 private:
  std::string stage_;
};

using WarningHandler = std::function<void(std::string_view)>;

/// Installs a sink for non-fatal diagnostics and returns the previous one.
/// The default handler writes to stderr.
WarningHandler set_warning_handler(WarningHandler handler);
void warn(std::string_view message);

}  // namespace gradhom
