#include "gradhom/correctors.hpp"

#include <chrono>
#include <sstream>

#include "gradhom/error.hpp"

namespace gradhom {
namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

Vec3 centroid_value(const NodalField& f, const Tet& t) { return 0.25 * (f[t[0]] + f[t[1]] + f[t[2]] + f[t[3]]); }

Mat3 nodal_gradient(const NodalField& f, const Tet& t, const ShapeGradients& g) {
  Mat3 G = Mat3::Zero();
  for (int a = 0; a < 4; ++a) G += f[t[a]] * g[a].transpose();
  return G;
}

}  // namespace

CellContext::CellContext(const TetMesh& mesh_, const MaterialField& materials_, Execution exec_)
    : mesh(mesh_),
      materials(materials_),
      exec(exec_),
      geom(element_geometry(mesh_, exec_)),
      dense(dense_materials(mesh_, materials_)),
      center(geometric_center(mesh_)),
      volume(total_volume(mesh_)),
      nodal_weights(nodal_volumes(mesh_, geom)) {}

Mat3 ElementGradientFields::M_at(std::size_t e, int beta, const std::array<double, 4>& lambda) const {
  const int B = voigt::triple_pair(beta);
  const int c = voigt::triple_third(beta);
  const auto& pv = phi_vertex[e][B];
  const auto& yv = y_vertex[e];
  Vec3 y = Vec3::Zero();
  Vec3 dphi = -0.25 * (pv[0] + pv[1] + pv[2] + pv[3]);
  for (int a = 0; a < 4; ++a) {
    y += lambda[a] * yv[a];
    dphi += lambda[a] * pv[a];
  }
  Mat3 M = y[c] * L[e][B] + N[e][beta];
  M.col(c) += dphi;
  return M;
}

Mat3 ElementGradientFields::M_centroid(std::size_t e, int beta) const {
  return M_at(e, beta, {0.25, 0.25, 0.25, 0.25});
}

Eigen::MatrixXd phi_loads(const CellContext& ctx, const ReducedSystem& system) {
  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(system.size(), 6);
  auto load = [&](std::size_t e, int A, Vector12& fe) {
    const auto ab = voigt::pair(A);
    const Rank4& C = ctx.stiffness(e);
    const ShapeGradients& g = ctx.geom.grad[e];
    const double vol = ctx.geom.volume[e];
    for (int n = 0; n < 4; ++n)
      for (int i = 0; i < 3; ++i) {
        double s = 0.0;
        for (int j = 0; j < 3; ++j) s += C[idx4(i, j, ab[0], ab[1])] * g[n][j];
        fe[3 * n + i] = -vol * s;
      }
  };
  assemble_columns(ctx.mesh.num_tets(), system.element_dofs(), 6, load, F, ctx.exec);
  return F;
}

PhiStage solve_phi(const CellContext& ctx, const ReducedSystem& system) {
  const auto t0 = std::chrono::steady_clock::now();
  PhiStage out;
  const Eigen::MatrixXd F = phi_loads(ctx, system);
  const auto ts = std::chrono::steady_clock::now();
  const Eigen::MatrixXd X = system.solve(F);
  out.solve_seconds = seconds_since(ts);
  for (int A = 0; A < 6; ++A) {
    out.phi[A] = expand(system.map(), X.col(A));
    remove_mean(out.phi[A], ctx.nodal_weights);
  }
  const std::size_t ne = ctx.mesh.num_tets();
  out.L.resize(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    for (int A = 0; A < 6; ++A) {
      const auto ab = voigt::pair(A);
      Mat3 L = nodal_gradient(out.phi[A], ctx.mesh.tets[e], ctx.geom.grad[e]);
      L(ab[0], ab[1]) += 1.0;
      out.L[e][A] = L;
    }
  }
  out.seconds = seconds_since(t0);
  return out;
}

Eigen::MatrixXd psi_loads(const CellContext& ctx, const ReducedSystem& system, const PhiStage& phi,
                          const Stiffness4& C_M, LoadCompatibility* compatibility) {
  auto load = [&](std::size_t e, int beta, Vector12& fe) {
    const int B = voigt::triple_pair(beta);
    const int c = voigt::triple_third(beta);
    const auto ab = voigt::pair(B);
    const Rank4& C = ctx.stiffness(e);
    const ShapeGradients& g = ctx.geom.grad[e];
    const double vol = ctx.geom.volume[e];
    const Mat3& L = phi.L[e][B];
    const Vec3 phibar = centroid_value(phi.phi[B], ctx.mesh.tets[e]);
    Vec3 s;
    for (int i = 0; i < 3; ++i) {
      double cl = 0.0;
      for (int k = 0; k < 3; ++k)
        for (int l = 0; l < 3; ++l) cl += C[idx4(i, c, k, l)] * L(k, l);
      s[i] = cl - C_M(i, c, ab[0], ab[1]);
    }
    for (int n = 0; n < 4; ++n)
      for (int i = 0; i < 3; ++i) {
        double t = 0.0;
        for (int j = 0; j < 3; ++j)
          for (int k = 0; k < 3; ++k) t += C[idx4(i, j, k, c)] * phibar[k] * g[n][j];
        fe[3 * n + i] = 0.25 * vol * s[i] - vol * t;
      }
  };

  Eigen::MatrixXd F = Eigen::MatrixXd::Zero(system.size(), 18);
  assemble_columns(ctx.mesh.num_tets(), system.element_dofs(), 18, load, F, ctx.exec);

  if (compatibility) {
    // Net force over all nodal dofs, fixed ones included.
    compatibility->relative.assign(18, 0.0);
    compatibility->net_force.assign(18, Vec3::Zero());
#pragma omp parallel for schedule(dynamic, 1) if (ctx.exec == Execution::Parallel)
    for (int beta = 0; beta < 18; ++beta) {
      Vec3 total = Vec3::Zero();
      double scale = 0.0;
      Vector12 fe;
      for (std::size_t e = 0; e < ctx.mesh.num_tets(); ++e) {
        load(e, beta, fe);
        for (int n = 0; n < 4; ++n) total += fe.segment<3>(3 * n);
        double cmax = 0.0;
        for (double v : ctx.stiffness(e)) cmax = std::max(cmax, std::abs(v));
        scale += ctx.geom.volume[e] * cmax;
      }
      compatibility->net_force[beta] = total;
      compatibility->relative[beta] = scale > 0.0 ? total.norm() / scale : 0.0;
    }
  }
  return F;
}

PsiStage solve_psi(const CellContext& ctx, const ReducedSystem& system, const PhiStage& phi, const Stiffness4& C_M) {
  const auto t0 = std::chrono::steady_clock::now();
  PsiStage out;
  LoadCompatibility compat;
  const Eigen::MatrixXd F = psi_loads(ctx, system, phi, C_M, &compat);
  for (int beta = 0; beta < 18; ++beta) {
    const double rel = compat.relative[beta];
    out.worst_compatibility = std::max(out.worst_compatibility, rel);
    if (rel > kCompatibilityTolerance) {
      const Vec3& f = compat.net_force[beta];
      std::ostringstream os;
      os << "second-order cell problem " << voigt::triple_label(beta) << " has an incompatible load: net force ("
         << f.x() << ", " << f.y() << ", " << f.z() << ") N, relative " << rel << " exceeds "
         << kCompatibilityTolerance << " (is C_M consistent with the first-order correctors?)";
      throw ConsistencyError(os.str());
    }
  }
  const auto ts = std::chrono::steady_clock::now();
  const Eigen::MatrixXd X = system.solve(F);
  out.solve_seconds = seconds_since(ts);
  for (int beta = 0; beta < 18; ++beta) {
    out.psi[beta] = expand(system.map(), X.col(beta));
    remove_mean(out.psi[beta], ctx.nodal_weights);
  }
  const std::size_t ne = ctx.mesh.num_tets();
  out.N.resize(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    const Tet& t = ctx.mesh.tets[e];
    for (int beta = 0; beta < 18; ++beta) {
      Mat3 N = nodal_gradient(out.psi[beta], t, ctx.geom.grad[e]);
      N.col(voigt::triple_third(beta)) += centroid_value(phi.phi[voigt::triple_pair(beta)], t);
      out.N[e][beta] = N;
    }
  }
  out.seconds = seconds_since(t0);
  return out;
}

ElementGradientFields gradient_fields(const CellContext& ctx, const PhiStage& phi, const PsiStage* psi) {
  ElementGradientFields f;
  const std::size_t ne = ctx.mesh.num_tets();
  f.L = phi.L;
  if (psi) f.N = psi->N;
  f.phi_vertex.resize(ne);
  f.y_vertex.resize(ne);
  for (std::size_t e = 0; e < ne; ++e) {
    const Tet& t = ctx.mesh.tets[e];
    for (int a = 0; a < 4; ++a) {
      f.y_vertex[e][a] = ctx.mesh.nodes[t[a]] - ctx.center;
      for (int A = 0; A < 6; ++A) f.phi_vertex[e][A][a] = phi.phi[A][t[a]];
    }
  }
  return f;
}

std::pair<std::size_t, std::array<double, 4>> locate(const CellContext& ctx, const Vec3& point) {
  const double tol = 1e-12;
  for (std::size_t e = 0; e < ctx.mesh.num_tets(); ++e) {
    std::array<double, 4> lambda;
    bool inside = true;
    for (int a = 0; a < 4 && inside; ++a) {
      lambda[a] = 0.25 + ctx.geom.grad[e][a].dot(point - ctx.geom.centroid[e]);
      inside = lambda[a] >= -tol;
    }
    if (inside) return {e, lambda};
  }
  std::ostringstream os;
  os << "point (" << point.x() << ", " << point.y() << ", " << point.z() << ") lies outside the mesh";
  throw LocationError(os.str());
}

Vec3 reconstruct_micro_displacement(const CellContext& ctx, const CorrectorSet& correctors, const Vec3& point,
                                    const Mat3& macro_grad, const std::array<Mat3, 3>& macro_grad2,
                                    double epsilon) {
  const auto [e, lambda] = locate(ctx, point);
  const Tet& t = ctx.mesh.tets[e];
  auto interp = [&](const NodalField& f) {
    Vec3 v = Vec3::Zero();
    for (int a = 0; a < 4; ++a) v += lambda[a] * f[t[a]];
    return v;
  };

  const Vec3 y = point - ctx.center;
  Mat3 grad = macro_grad;  // macro gradient at the point
  Vec3 u = epsilon * macro_grad * y;
  for (int a = 0; a < 3; ++a) {
    const Vec3 Hy = macro_grad2[a] * y;
    grad.row(a) += epsilon * Hy.transpose();
    u[a] += 0.5 * epsilon * epsilon * y.dot(Hy);
  }
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      if (grad(a, b) != 0.0) u += epsilon * grad(a, b) * interp(correctors.phi[voigt::pair_index(a, b)]);
      for (int c = 0; c < 3; ++c) {
        const double h = macro_grad2[a](b, c);
        if (h != 0.0) u += epsilon * epsilon * h * interp(correctors.psi[voigt::triple_index(a, b, c)]);
      }
    }
  return u;
}

}  // namespace gradhom
