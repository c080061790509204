#include <gtest/gtest.h>

#include <map>

#include "gradhom/error.hpp"
#include "oracles/laminate_1d.hpp"
#include "support.hpp"

using namespace gradhom;
using namespace testing_support;

namespace {

double max_norm(const NodalField& f) {
  double m = 0;
  for (const auto& v : f) m = std::max(m, v.cwiseAbs().maxCoeff());
  return m;
}

// 1D reference on the y1 breakpoints of a generated laminate along axis 1.
oracle::Laminate1D laminate_oracle(const Cell& cell, const std::vector<std::pair<double, double>>& phases,
                                   double half_core) {
  oracle::Laminate1D o;
  std::set<double> xs;
  for (const auto& p : cell.mesh.nodes) xs.insert(p.x() - cell.ctx->center.x());
  o.x.assign(xs.begin(), xs.end());
  for (int e = 0; e + 1 < static_cast<int>(o.x.size()); ++e) {
    const double mid = 0.5 * (o.x[e] + o.x[e + 1]);
    const auto& ph = std::abs(mid) < half_core ? phases[0] : phases[1];
    o.C.push_back(oracle::isotropic(ph.first, ph.second));
  }
  const Vec3 ext = cell.mesh.box.extent();
  o.W2 = ext.y();
  o.W3 = ext.z();
  o.run();
  return o;
}

}  // namespace

TEST(Correctors, HomogeneousCellHasVanishingCorrectors) {
  const auto cell = homogenize(cube(0.25), {phase(110e9, 0.35)});
  const double L = cell->diagonal();
  for (const auto& f : cell->phi.phi) EXPECT_LE(max_norm(f), 1e-12 * L);
  for (const auto& f : cell->psi.psi) EXPECT_LE(max_norm(f), 1e-12 * L * L);
  EXPECT_LE(cell->psi.worst_compatibility, 1e-12);
}

TEST(Correctors, LaminateSlopesAndMicroStrain) {
  const auto cell = homogenize(laminate(0.125, {0.5, 0.5}), {phase(100, 0, 1), phase(50, 0, 2)}, Execution::Serial,
                               false);
  for (std::size_t e = 0; e < cell->mesh.num_tets(); ++e) {
    const Mat3& L = cell->fields.L[e][0];
    const double expected = cell->mesh.region[e] == 1 ? 2.0 / 3.0 : 4.0 / 3.0;
    EXPECT_NEAR(L(0, 0), expected, 1e-12);
    EXPECT_NEAR(L(1, 1), 0.0, 1e-12);
    EXPECT_NEAR(L(0, 1), 0.0, 1e-12);
  }
}

TEST(Correctors, VolumeAverageOfLIsTheIdentity) {
  const auto cell = homogenize(inclusion(0.125), {phase(1, 0.3, 1), phase(10, 0.25, 2)}, Execution::Serial, false);
  for (int A = 0; A < 6; ++A) {
    Mat3 avg = Mat3::Zero();
    for (std::size_t e = 0; e < cell->mesh.num_tets(); ++e) avg += cell->ctx->geom.volume[e] * cell->fields.L[e][A];
    avg /= cell->ctx->volume;
    Mat3 unit = Mat3::Zero();
    unit(voigt::pair(A)[0], voigt::pair(A)[1]) = 1.0;
    EXPECT_LT((avg - unit).cwiseAbs().maxCoeff(), 1e-12) << A;
  }
}

TEST(Correctors, FirstOrderMatchesOneDimensionalOracle) {
  const auto cell = homogenize(laminate(0.125, {0.5, 0.5}), {phase(100, 0.25, 1), phase(50, 0.1, 2)});
  const auto o = laminate_oracle(*cell, {{100, 0.25}, {50, 0.1}}, 0.25);
  std::map<double, int> node_of;
  for (int k = 0; k + 1 < static_cast<int>(o.x.size()); ++k) node_of[o.x[k]] = k;
  const double last = o.x.back();
  for (int A = 0; A < 6; ++A) {
    const double scale = std::max(max_norm(cell->phi.phi[A]), 1e-3);
    for (std::size_t n = 0; n < cell->mesh.num_nodes(); ++n) {
      double y = cell->mesh.nodes[n].x() - cell->ctx->center.x();
      if (y == last) y = o.x.front();
      const Vec3 ref = o.phi[A][node_of.at(y)];
      ASSERT_LT((cell->phi.phi[A][n] - ref).cwiseAbs().maxCoeff(), 1e-9 * scale) << "pair " << A;
    }
  }
}

TEST(Correctors, SecondOrderMatchesOneDimensionalOracle) {
  const auto cell = homogenize(laminate(0.125, {0.5, 0.5}), {phase(100, 0.25, 1), phase(50, 0.1, 2)});
  const auto o = laminate_oracle(*cell, {{100, 0.25}, {50, 0.1}}, 0.25);
  std::map<double, int> node_of;
  for (int k = 0; k + 1 < static_cast<int>(o.x.size()); ++k) node_of[o.x[k]] = k;
  const double last = o.x.back();
  double scale = 0;
  for (const auto& f : cell->psi.psi) scale = std::max(scale, max_norm(f));
  ASSERT_GT(scale, 1e-4);
  for (int beta = 0; beta < 18; ++beta) {
    for (std::size_t n = 0; n < cell->mesh.num_nodes(); ++n) {
      double y = cell->mesh.nodes[n].x() - cell->ctx->center.x();
      if (y == last) y = o.x.front();
      const Vec3 ref = o.psi[beta][node_of.at(y)];
      ASSERT_LT((cell->psi.psi[beta][n] - ref).cwiseAbs().maxCoeff(), 1e-6 * scale)
          << voigt::triple_label(beta) << " at node " << n;
    }
  }
}

TEST(Correctors, InvariantUnderStiffnessScaling) {
  const std::vector base{phase(1, 0.3, 1), phase(10, 0.25, 2)};
  const std::vector scaled{phase(1e9, 0.3, 1), phase(1e10, 0.25, 2)};
  const auto a = homogenize(inclusion(0.25), base);
  const auto b = homogenize(inclusion(0.25), scaled);
  for (int A = 0; A < 6; ++A)
    for (std::size_t n = 0; n < a->mesh.num_nodes(); ++n)
      EXPECT_LT((a->phi.phi[A][n] - b->phi.phi[A][n]).norm(), 1e-10);
  for (int beta = 0; beta < 18; ++beta)
    for (std::size_t n = 0; n < a->mesh.num_nodes(); ++n)
      EXPECT_LT((a->psi.psi[beta][n] - b->psi.psi[beta][n]).norm(), 1e-10);
}

TEST(Correctors, ZeroMeanGauge) {
  const auto cell = homogenize(inclusion(0.25), {phase(1, 0.3, 1), phase(10, 0.25, 2)});
  for (const auto& f : cell->phi.phi) EXPECT_LT(field_mean(f, cell->ctx->nodal_weights).norm(), 1e-14);
  for (const auto& f : cell->psi.psi) EXPECT_LT(field_mean(f, cell->ctx->nodal_weights).norm(), 1e-14);
}

TEST(Correctors, IncompatibleSecondOrderLoadIsRejected) {
  const auto cell = homogenize(inclusion(0.25), {phase(1, 0.3, 1), phase(10, 0.25, 2)}, Execution::Serial, false);
  Stiffness4 wrong = cell->C;
  wrong.voigt()(0, 0) *= 1.01;
  LoadCompatibility comp;
  psi_loads(*cell->ctx, *cell->system, cell->phi, wrong, &comp);
  ASSERT_EQ(comp.relative.size(), 18u);
  EXPECT_GT(*std::max_element(comp.relative.begin(), comp.relative.end()), 1e-4);
  EXPECT_THROW(solve_psi(*cell->ctx, *cell->system, cell->phi, wrong), ConsistencyError);
}

TEST(Reconstruction, LaminateMicroStrainFromFirstOrderCorrector) {
  const auto cell = homogenize(laminate(0.125, {0.5, 0.5}), {phase(100, 0, 1), phase(50, 0, 2)});
  const CorrectorSet set{cell->phi.phi, cell->psi.psi};
  Mat3 E = Mat3::Zero();
  E(0, 0) = 1.0;
  const std::array<Mat3, 3> H{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};
  for (double eps : {1.0, 0.1}) {
    auto u = [&](double x) {
      return reconstruct_micro_displacement(*cell->ctx, set, Vec3(x, 0.4, 0.3), E, H, eps);
    };
    // stiff core |y1| < 0.25, soft outside; du/dX = (1/eps) du/dy
    EXPECT_NEAR((u(0.6) - u(0.4)).x() / (0.2 * eps), 2.0 / 3.0, 1e-10);
    EXPECT_NEAR((u(0.95) - u(0.8)).x() / (0.15 * eps), 4.0 / 3.0, 1e-10);
    EXPECT_NEAR((u(0.6) - u(0.4)).y(), 0.0, 1e-12);
  }
}

TEST(Reconstruction, QuadraticMacroFieldOnHomogeneousCell) {
  const auto cell = homogenize(cube(0.25), {phase(1, 0.3)});
  const CorrectorSet set{cell->phi.phi, cell->psi.psi};
  Mat3 E;
  E << 0.1, 0.2, 0.0, 0.2, -0.3, 0.1, 0.0, 0.1, 0.05;
  std::array<Mat3, 3> H{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};
  H[0](1, 2) = H[0](2, 1) = 0.7;
  H[2](0, 0) = -0.4;
  const Vec3 p(0.3, 0.8, 0.55);
  const Vec3 y = p - cell->ctx->center;
  const double eps = 0.5;
  Vec3 expected = eps * E * y;
  for (int a = 0; a < 3; ++a) expected[a] += 0.5 * eps * eps * y.dot(H[a] * y);
  EXPECT_LT((reconstruct_micro_displacement(*cell->ctx, set, p, E, H, eps) - expected).norm(), 1e-12);
}

TEST(Reconstruction, PointOutsideTheCellIsALocationError) {
  const auto cell = homogenize(cube(0.5), {phase(1, 0.3)}, Execution::Serial, false);
  const CorrectorSet set{cell->phi.phi, {}};
  const std::array<Mat3, 3> H{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};
  EXPECT_THROW(reconstruct_micro_displacement(*cell->ctx, set, Vec3(1.2, 0.5, 0.5), Mat3::Identity(), H, 1.0),
               LocationError);
  const auto [e, lambda] = locate(*cell->ctx, Vec3(0.5, 0.5, 0.5));
  double sum = 0;
  for (double l : lambda) {
    EXPECT_GE(l, -1e-12);
    sum += l;
  }
  EXPECT_NEAR(sum, 1.0, 1e-14);
  EXPECT_LT(e, cell->mesh.num_tets());
}
