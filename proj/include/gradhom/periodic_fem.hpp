#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "gradhom/kernels.hpp"
#include "gradhom/mesh.hpp"

namespace gradhom {

using SparseMatrix = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;
using NodalField = std::vector<Vec3>;

enum class RigidModePolicy {
  PinCenterNode,  // fix the three dofs of the master node nearest the centre
  None,           // leave the translation nullspace in place (diagnostics only)
};

enum class DofClass { Master, Slave, Fixed };

/// Periodic tying by elimination: every node maps to a master node, and each
/// master dof maps to a reduced unknown (or -1 when pinned).
struct PeriodicMap {
  std::vector<int> master_of;          // per node
  std::vector<int> reduced;            // per nodal dof 3 n + i; -1 when fixed
  int n_reduced = 0;
  int pinned_node = -1;
  RigidModePolicy policy = RigidModePolicy::PinCenterNode;
  std::array<int, 3> pairs_per_axis{0, 0, 0};

  DofClass classify(int node, int comp) const;
  std::size_t num_nodes() const { return master_of.size(); }
};

/// Default node-matching tolerance: 1e-8 times the box diagonal.
double default_match_tolerance(const TetMesh& mesh);

/// Throws PeriodicityError when a boundary node is unmatched (naming node
/// and axis) or when a match is ambiguous.
PeriodicMap build_periodic_map(const TetMesh& mesh, double tolerance,
                               RigidModePolicy policy = RigidModePolicy::PinCenterNode);

enum class SolverKind { Direct, Iterative };

struct SolverOptions {
  SolverKind kind = SolverKind::Direct;
  double cg_tolerance = 1e-10;     // relative residual for the iterative solver
  double residual_limit = 1e-8;    // ||K u - f|| / ||f|| accepted after solving
  int max_refinements = 3;
};

struct SolverStats {
  int factorizations = 0;
  int solve_calls = 0;
  int columns_solved = 0;
  double factor_seconds = 0.0;
  double max_relative_residual = 0.0;
  double max_backward_error = 0.0;  // only set when the rounding floor was hit
};

/// Normwise backward error |Ku - f| / (|K|_inf |u| + |f|) accepted when
/// iterative refinement stalls above the relative residual limit.
inline constexpr double kBackwardErrorLimit = 1e-12;

class LinearSolver;

/// Stiffness matrix over the reduced unknowns together with its
/// factorization. After factorize() the object is read-only for solving and
/// may be shared across threads.
class ReducedSystem {
 public:
  ReducedSystem(const TetMesh& mesh, const MaterialField& materials, const PeriodicMap& map,
                Execution exec = Execution::Parallel);
  ~ReducedSystem();
  ReducedSystem(const ReducedSystem&) = delete;
  ReducedSystem& operator=(const ReducedSystem&) = delete;

  const SparseMatrix& matrix() const { return matrix_; }
  const PeriodicMap& map() const { return map_; }
  int size() const { return map_.n_reduced; }
  /// Reduced index of each element's 12 local dofs (3 a + i), -1 if fixed.
  std::span<const int> element_dofs() const { return element_dofs_; }

  /// Exactly one factorization per system; a second call throws.
  void factorize(const SolverOptions& options = {});
  bool factorized() const { return solver_ != nullptr; }

  /// Solves K X = F column by column against the stored factorization.
  /// Zero columns give exactly zero; every column is checked against
  /// options.residual_limit. Throws SolverError.
  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const;

  SolverStats stats() const;

  /// Matrix Market coordinate dump (lower triangle, symmetric).
  void write_matrix_market(const std::filesystem::path& path) const;

 private:
  PeriodicMap map_;
  SparseMatrix matrix_;
  double matrix_norm_ = 0.0;  // infinity norm
  std::vector<int> element_dofs_;
  SolverOptions options_;
  std::unique_ptr<LinearSolver> solver_;
  mutable std::mutex stats_mutex_;
  mutable SolverStats stats_;
};

/// Builds the CSC pattern of the reduced matrix and the per-element slot
/// table used to scatter element matrices into it.
struct AssemblyPattern {
  SparseMatrix matrix;        // structure with zero values
  std::vector<int> slot;      // 144 per element
  std::vector<int> element_dofs;
};
AssemblyPattern assembly_pattern(const TetMesh& mesh, const PeriodicMap& map);

/// Scatter a nodal dof vector (3 per node) into reduced unknowns by summing
/// slave contributions into masters and dropping fixed dofs.
Eigen::VectorXd restrict_to_reduced(const PeriodicMap& map, const Eigen::VectorXd& nodal);

/// Copies master values to every node of the class; fixed dofs are zero.
NodalField expand(const PeriodicMap& map, const Eigen::Ref<const Eigen::VectorXd>& reduced);

/// Lumped nodal volumes sum_T |T| / 4, the exact weights for integrating a
/// P1 field.
std::vector<double> nodal_volumes(const TetMesh& mesh, const ElementGeometry& geom);

/// Subtracts the exact volume average of the P1 field.
void remove_mean(NodalField& field, std::span<const double> weights);
Vec3 field_mean(const NodalField& field, std::span<const double> weights);

/// solve + expand for each column.
std::vector<NodalField> solve_multi(const ReducedSystem& system, const Eigen::MatrixXd& rhs);

}  // namespace gradhom
