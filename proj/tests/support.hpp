#pragma once

#include <memory>
#include <vector>

#include "gradhom/correctors.hpp"
#include "gradhom/effective.hpp"
#include "gradhom/mesh.hpp"
#include "gradhom/periodic_fem.hpp"

namespace testing_support {

using namespace gradhom;

inline IsotropicPhase phase(double E, double nu, int id = 1) { return IsotropicPhase{E, nu, id}; }

inline RveGeometry cube(double h, Vec3 dims = Vec3::Ones()) {
  RveGeometry g;
  g.kind = GeometryKind::Homogeneous;
  g.dimensions = dims;
  g.resolution = h;
  return g;
}

inline RveGeometry laminate(double h, std::vector<double> fractions, int axis = 0, Vec3 dims = Vec3::Ones()) {
  RveGeometry g;
  g.kind = GeometryKind::Laminate;
  g.dimensions = dims;
  g.resolution = h;
  g.layer_fractions = std::move(fractions);
  g.normal_axis = axis;
  return g;
}

inline RveGeometry inclusion(double h, double fraction = 0.5, Vec3 dims = Vec3::Ones()) {
  RveGeometry g;
  g.kind = GeometryKind::CubicInclusion;
  g.dimensions = dims;
  g.resolution = h;
  g.inclusion_fraction = fraction;
  return g;
}

/// The whole cell-problem stack on one mesh, without the CLI pipeline.
/// Not movable: the context refers to the mesh and material members.
struct Cell {
  TetMesh mesh;
  MaterialField materials;
  PeriodicMap map;
  std::unique_ptr<ReducedSystem> system;
  std::unique_ptr<CellContext> ctx;
  PhiStage phi;
  PsiStage psi;
  ElementGradientFields fields;
  Stiffness4 C;
  double C_asymmetry = 0.0;
  Tensor5 G;
  DOutcome D;
  Mat3 I_bar;

  Cell(TetMesh m, MaterialField mats, Execution exec = Execution::Serial, bool second_order = true)
      : mesh(std::move(m)), materials(std::move(mats)) {
    map = build_periodic_map(mesh, default_match_tolerance(mesh));
    system = std::make_unique<ReducedSystem>(mesh, materials, map, exec);
    system->factorize();
    ctx = std::make_unique<CellContext>(mesh, materials, exec);
    phi = solve_phi(*ctx, *system);
    fields = gradient_fields(*ctx, phi, nullptr);
    C = compute_C(*ctx, fields, &C_asymmetry);
    if (!second_order) return;
    psi = solve_psi(*ctx, *system, phi, C);
    fields.N = psi.N;
    G = compute_G(*ctx, fields);
    I_bar = second_moment(mesh, ctx->center);
    D = compute_D(*ctx, fields, C, I_bar);
  }
  Cell(const Cell&) = delete;
  Cell& operator=(const Cell&) = delete;

  double diagonal() const { return mesh.box.diagonal(); }
};

inline std::unique_ptr<Cell> homogenize(const RveGeometry& g, const std::vector<IsotropicPhase>& phases,
                                        Execution exec = Execution::Serial, bool second_order = true) {
  GeneratedRve rve = generate(g, phases);
  return std::make_unique<Cell>(std::move(rve.mesh), std::move(rve.materials), exec, second_order);
}

}  // namespace testing_support
