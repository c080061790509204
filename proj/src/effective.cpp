#include "gradhom/effective.hpp"

#include <cmath>
#include <random>
#include <sstream>

#include "gradhom/error.hpp"

namespace gradhom {
namespace {

using Matrix9 = Eigen::Matrix<double, 9, 9, Eigen::RowMajor>;
using Vector9 = Eigen::Matrix<double, 9, 1>;
using Matrix9x6 = Eigen::Matrix<double, 9, 6>;
using Matrix9x18 = Eigen::Matrix<double, 9, 18>;

Eigen::Map<const Matrix9> as_matrix9(const Rank4& c) { return Eigen::Map<const Matrix9>(c.data()); }

// Row-major flattening, index 3 i + j.
Vector9 flat(const Mat3& m) {
  Vector9 v;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) v[3 * i + j] = m(i, j);
  return v;
}

Matrix9x6 L_columns(const ElementGradientFields& f, std::size_t e) {
  Matrix9x6 m;
  for (int A = 0; A < 6; ++A) m.col(A) = flat(f.L[e][A]);
  return m;
}

Matrix9x18 M_columns(const ElementGradientFields& f, std::size_t e, const std::array<double, 4>& lambda) {
  Matrix9x18 m;
  for (int b = 0; b < 18; ++b) m.col(b) = flat(f.M_at(e, b, lambda));
  return m;
}

std::array<double, 4> quadrature_lambda(int q) {
  std::array<double, 4> l;
  l.fill(kQuadB);
  l[q] = kQuadA;
  return l;
}

double relative_asymmetry(const Eigen::MatrixXd& m) {
  const double scale = m.cwiseAbs().maxCoeff();
  return scale > 0.0 ? (m - m.transpose()).cwiseAbs().maxCoeff() / scale : 0.0;
}

// Full-index gradient maps from the Voigt-stored ones: the stored entry for
// pair (p, q) carries the unit part e_p (x) e_q, the (a, b) entry needs
// e_a (x) e_b.
Mat3 L_full(const ElementGradientFields& f, std::size_t e, int a, int b) {
  const int A = voigt::pair_index(a, b);
  const auto pq = voigt::pair(A);
  Mat3 L = f.L[e][A];
  L(pq[0], pq[1]) -= 1.0;
  L(a, b) += 1.0;
  return L;
}

}  // namespace

Stiffness4 compute_C(const CellContext& ctx, const ElementGradientFields& fields, double* asymmetry) {
  auto term = [&](std::size_t e) -> Matrix6 {
    const Matrix9x6 L = L_columns(fields, e);
    return ctx.geom.volume[e] * (L.transpose() * as_matrix9(ctx.stiffness(e)) * L);
  };
  Matrix6 C = element_sum(ctx.mesh.num_tets(), Matrix6::Zero().eval(), term, ctx.exec) / ctx.volume;
  if (asymmetry) *asymmetry = relative_asymmetry(C);
  return Stiffness4(0.5 * (C + C.transpose()));
}

Tensor5 compute_G(const CellContext& ctx, const ElementGradientFields& fields) {
  static const std::array<double, 4> kCentroid{0.25, 0.25, 0.25, 0.25};
  auto term = [&](std::size_t e) -> Matrix6x18 {
    const Matrix9x6 L = L_columns(fields, e);
    const Matrix9x18 M = M_columns(fields, e, kCentroid);
    return ctx.geom.volume[e] * (L.transpose() * as_matrix9(ctx.stiffness(e)) * M);
  };
  return Tensor5(element_sum(ctx.mesh.num_tets(), Matrix6x18::Zero().eval(), term, ctx.exec) / ctx.volume);
}

Tensor6 compute_D_bar(const CellContext& ctx, const ElementGradientFields& fields) {
  static const std::array<std::array<double, 4>, 4> kLambda{quadrature_lambda(0), quadrature_lambda(1),
                                                            quadrature_lambda(2), quadrature_lambda(3)};
  auto term = [&](std::size_t e) -> Matrix18 {
    const auto C = as_matrix9(ctx.stiffness(e));
    Matrix18 acc = Matrix18::Zero();
    for (const auto& lambda : kLambda) {
      const Matrix9x18 M = M_columns(fields, e, lambda);
      acc.noalias() += M.transpose() * (C * M);
    }
    return 0.25 * ctx.geom.volume[e] * acc;
  };
  return Tensor6(element_sum(ctx.mesh.num_tets(), Matrix18::Zero().eval(), term, ctx.exec) / ctx.volume);
}

DOutcome compute_D(const CellContext& ctx, const ElementGradientFields& fields, const Stiffness4& C_M,
                   const Mat3& I_bar) {
  DOutcome out;
  out.D_bar = compute_D_bar(ctx, fields);
  const Matrix18& Db = out.D_bar.voigt();
  Matrix18 D;
  for (int alpha = 0; alpha < 18; ++alpha)
    for (int beta = 0; beta < 18; ++beta) {
      D(alpha, beta) = Db(alpha, beta) - C_M.voigt()(voigt::triple_pair(alpha), voigt::triple_pair(beta)) *
                                             I_bar(voigt::triple_third(alpha), voigt::triple_third(beta));
    }
  const double scale = Db.cwiseAbs().maxCoeff();
  out.asymmetry = scale > 0.0 ? (D - D.transpose()).cwiseAbs().maxCoeff() / scale : 0.0;
  if (out.asymmetry > kDAsymmetryLimit) {
    std::ostringstream os;
    os << "strain-gradient stiffness asymmetry " << out.asymmetry << " exceeds " << kDAsymmetryLimit;
    throw ConsistencyError(os.str());
  }
  out.D_M = Tensor6(0.5 * (D + D.transpose()));
  return out;
}

std::vector<MacroSample> random_macro_samples(int count, std::uint64_t seed, double length,
                                              bool with_second_gradient) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<MacroSample> out(count);
  for (auto& s : out) {
    for (int a = 0; a < 3; ++a)
      for (int b = a; b < 3; ++b) s.E(a, b) = s.E(b, a) = u(rng);
    if (!with_second_gradient) continue;
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b)
        for (int c = b; c < 3; ++c) s.H[a](b, c) = s.H[a](c, b) = u(rng) / length;
  }
  return out;
}

EnergyComparison compare_energy(const CellContext& ctx, const ElementGradientFields& fields, const Stiffness4& C_bar,
                                const Tensor5& G_bar, const Tensor6& D_bar, const MacroSample& s) {
  // Path (a): micro gradient at each quadrature point, then the energy.
  auto term = [&](std::size_t e) -> double {
    const auto C = as_matrix9(ctx.stiffness(e));
    double w = 0.0;
    for (int q = 0; q < 4; ++q) {
      const auto lambda = quadrature_lambda(q);
      Vec3 y = Vec3::Zero();
      for (int v = 0; v < 4; ++v) y += lambda[v] * fields.y_vertex[e][v];
      Mat3 g = Mat3::Zero();
      for (int a = 0; a < 3; ++a)
        for (int b = 0; b < 3; ++b) {
          if (s.E(a, b) != 0.0) g += s.E(a, b) * L_full(fields, e, a, b);
          for (int c = 0; c < 3; ++c) {
            const double h = s.H[a](b, c);
            if (h == 0.0) continue;
            const int beta = voigt::triple_index(a, b, c);
            const auto pq = voigt::pair(voigt::triple_pair(beta));
            Mat3 M = fields.M_at(e, beta, lambda);
            M(pq[0], pq[1]) -= y[c];
            M(a, b) += y[c];
            g += h * M;
          }
        }
      const Vector9 gv = flat(g);
      w += 0.5 * gv.dot(C * gv);
    }
    return 0.25 * ctx.geom.volume[e] * w;
  };
  EnergyComparison out;
  out.micro = element_sum(ctx.mesh.num_tets(), 0.0, term, ctx.exec);

  // Path (b): contract the effective tensors over full indices.
  double cc = 0.0, gg = 0.0, dd = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      const double eab = s.E(a, b);
      for (int c = 0; c < 3; ++c)
        for (int d = 0; d < 3; ++d) {
          cc += C_bar(a, b, c, d) * eab * s.E(c, d);
          for (int f = 0; f < 3; ++f) gg += G_bar(a, b, c, d, f) * eab * s.H[c](d, f);
        }
    }
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c) {
        const double habc = s.H[a](b, c);
        if (habc == 0.0) continue;
        for (int d = 0; d < 3; ++d)
          for (int f = 0; f < 3; ++f)
            for (int g = 0; g < 3; ++g) dd += D_bar(a, b, c, d, f, g) * habc * s.H[d](f, g);
      }
  out.macro = 0.5 * ctx.volume * (cc + 2.0 * gg + dd);

  const double scale = std::max(std::abs(out.micro), std::abs(out.macro));
  out.relative = scale > 0.0 ? std::abs(out.micro - out.macro) / scale : 0.0;
  return out;
}

double energy_consistency_check(const CellContext& ctx, const ElementGradientFields& fields,
                                const Stiffness4& C_bar, const Tensor5& G_bar, const Tensor6& D_bar,
                                std::span<const MacroSample> samples) {
  double worst = 0.0;
  for (const auto& s : samples) worst = std::max(worst, compare_energy(ctx, fields, C_bar, G_bar, D_bar, s).relative);
  return worst;
}

}  // namespace gradhom
