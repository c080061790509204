#pragma once

#include <array>
#include <vector>

#include "gradhom/kernels.hpp"
#include "gradhom/periodic_fem.hpp"

namespace gradhom {

/// Precomputed per-element data shared by the cell problems and the
/// effective-tensor integrals. Holds references to the mesh and materials,
/// which must outlive it. Coordinates y are measured from the geometric
/// centre with unit homothetic ratio.
struct CellContext {
  CellContext(const TetMesh& mesh, const MaterialField& materials, Execution exec = Execution::Parallel);

  const TetMesh& mesh;
  const MaterialField& materials;
  Execution exec;
  ElementGeometry geom;
  DenseMaterials dense;
  Vec3 center;
  double volume;
  std::vector<double> nodal_weights;

  const Rank4& stiffness(std::size_t e) const { return dense.tables[dense.table_of_tet[e]]; }
};

struct CorrectorSet {
  std::array<NodalField, 6> phi;   // by Voigt pair, m
  std::array<NodalField, 18> psi;  // by Voigt triple, m^2
};

/// Element-constant gradient fields and what is needed to evaluate the
/// linear M field inside each element.
struct ElementGradientFields {
  std::vector<std::array<Mat3, 6>> L;    // delta_ia delta_jb + grad phi_ab
  std::vector<std::array<Mat3, 18>> N;   // phi_ab (x) e_c + grad psi_abc, phi at the centroid
  std::vector<std::array<std::array<Vec3, 4>, 6>> phi_vertex;
  std::vector<std::array<Vec3, 4>> y_vertex;

  /// M_abc at barycentric coordinates lambda inside element e:
  /// y_c L_ab + phi_ab(y) (x) e_c + grad psi_abc.
  Mat3 M_at(std::size_t e, int beta, const std::array<double, 4>& lambda) const;
  Mat3 M_centroid(std::size_t e, int beta) const;
};

struct PhiStage {
  std::array<NodalField, 6> phi;
  std::vector<std::array<Mat3, 6>> L;
  double seconds = 0.0;        // whole stage
  double solve_seconds = 0.0;  // block solve only
};

struct PsiStage {
  std::array<NodalField, 18> psi;
  std::vector<std::array<Mat3, 18>> N;
  double worst_compatibility = 0.0;  // |net force| / (V max|C|)
  double seconds = 0.0;
  double solve_seconds = 0.0;
};

/// Load columns of the six first-order cell problems (reduced space).
Eigen::MatrixXd phi_loads(const CellContext& ctx, const ReducedSystem& system);

/// Solves the six first-order cell problems in one block solve.
PhiStage solve_phi(const CellContext& ctx, const ReducedSystem& system);

struct LoadCompatibility {
  std::vector<double> relative;  // |net force| / (V max|C|)
  std::vector<Vec3> net_force;   // N
};

/// Load columns of the eighteen second-order cell problems. The net force
/// per column must vanish for the periodic problem to be solvable.
Eigen::MatrixXd psi_loads(const CellContext& ctx, const ReducedSystem& system, const PhiStage& phi,
                          const Stiffness4& C_M, LoadCompatibility* compatibility = nullptr);

inline constexpr double kCompatibilityTolerance = 1e-8;

/// Solves the eighteen second-order cell problems against the same
/// factorization. Throws ConsistencyError when the load is incompatible.
PsiStage solve_psi(const CellContext& ctx, const ReducedSystem& system, const PhiStage& phi, const Stiffness4& C_M);

ElementGradientFields gradient_fields(const CellContext& ctx, const PhiStage& phi, const PsiStage* psi);

/// Two-scale reconstruction at a point given in mesh coordinates:
/// u = u0 + eps grad u0 : phi + eps^2 grad grad u0 : psi, with u0 the
/// quadratic macro field about the geometric centre. macro_grad2[a](b, c)
/// must be symmetric in b, c. Throws LocationError outside the mesh.
Vec3 reconstruct_micro_displacement(const CellContext& ctx, const CorrectorSet& correctors, const Vec3& point,
                                    const Mat3& macro_grad, const std::array<Mat3, 3>& macro_grad2,
                                    double epsilon);

/// Index of the tet containing `point` and its barycentric coordinates.
std::pair<std::size_t, std::array<double, 4>> locate(const CellContext& ctx, const Vec3& point);

}  // namespace gradhom
