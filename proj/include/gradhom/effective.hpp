#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "gradhom/correctors.hpp"
#include "json.hpp"

namespace gradhom {

/// Effective tensors at unit homothetic ratio. G is the coefficient of
/// epsilon and D the coefficient of epsilon squared.
struct HomogenizationResult {
  Stiffness4 C_M;
  Tensor5 G_M_per_eps;
  Tensor6 D_M_per_eps2;
  Tensor6 D_bar;                // before the moment correction
  Mat3 I_bar = Mat3::Zero();    // m^2, volume-normalised
  double volume = 0.0;          // m^3
  Vec3 center = Vec3::Zero();   // m
  double diagonal = 0.0;        // box diagonal, m
  double epsilon = 1.0;
  double C_asymmetry = 0.0;     // relative, before symmetrisation
  double D_asymmetry = 0.0;     // relative, before symmetrisation
  nlohmann::json metadata = nlohmann::json::object();
};

/// (1/V) sum over elements of vol * L_A : C : L_B, symmetrised. Writes the
/// relative asymmetry seen before symmetrisation when requested.
Stiffness4 compute_C(const CellContext& ctx, const ElementGradientFields& fields, double* asymmetry = nullptr);

/// (1/V) integral of L_A : C : M_beta. The integrand is linear in y, so
/// the centroid rule is exact.
Tensor5 compute_G(const CellContext& ctx, const ElementGradientFields& fields);

/// (1/V) integral of M_alpha : C : M_beta with the degree-2 rule (exact for
/// the quadratic integrand), no symmetrisation.
Tensor6 compute_D_bar(const CellContext& ctx, const ElementGradientFields& fields);

inline constexpr double kDAsymmetryLimit = 1e-6;

struct DOutcome {
  Tensor6 D_M;
  Tensor6 D_bar;
  double asymmetry = 0.0;  // max |D - D^T| / max |D_bar|
};

/// D^M_{(A,c),(B,f)} = Dbar - C^M_AB Ibar_cf, symmetrised. The position
/// dependent coupling term averages to zero about the geometric centre and
/// is omitted. Throws ConsistencyError when the asymmetry exceeds
/// kDAsymmetryLimit.
DOutcome compute_D(const CellContext& ctx, const ElementGradientFields& fields, const Stiffness4& C_M,
                   const Mat3& I_bar);

/// Symmetric macro gradient pair: E(a, b) = u_{a,b}, H[a](b, c) = u_{a,bc}.
struct MacroSample {
  Mat3 E = Mat3::Zero();
  std::array<Mat3, 3> H{Mat3::Zero(), Mat3::Zero(), Mat3::Zero()};
};

/// Reproducible random samples; E and every H[a] are symmetric. Gradient
/// entries are scaled by 1 and 1/length respectively.
std::vector<MacroSample> random_macro_samples(int count, std::uint64_t seed, double length = 1.0,
                                              bool with_second_gradient = true);

struct EnergyComparison {
  double micro = 0.0;   // direct element integration, J
  double macro = 0.0;   // quadratic form, J
  double relative = 0.0;
};

EnergyComparison compare_energy(const CellContext& ctx, const ElementGradientFields& fields, const Stiffness4& C_bar,
                                const Tensor5& G_bar, const Tensor6& D_bar, const MacroSample& sample);

/// Largest relative mismatch between the two energy paths over `samples`.
double energy_consistency_check(const CellContext& ctx, const ElementGradientFields& fields,
                                const Stiffness4& C_bar, const Tensor5& G_bar, const Tensor6& D_bar,
                                std::span<const MacroSample> samples);

}  // namespace gradhom
