#pragma once

#include <array>
#include <string>
#include <utility>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include "json.hpp"

namespace gradhom {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;
using Matrix6 = Eigen::Matrix<double, 6, 6>;
using Matrix6x18 = Eigen::Matrix<double, 6, 18>;
using Matrix18 = Eigen::Matrix<double, 18, 18>;

// Voigt-like index maps. Pairs follow 11, 22, 33, 23, 13, 12; triples are
// (pair, third index) with the pair running fastest: 111, 221, ..., 121,
// 112, ..., 123. All indices here are 0-based.
namespace voigt {

inline constexpr int kPairs = 6;
inline constexpr int kTriples = 18;

inline constexpr std::array<std::array<int, 2>, 6> kPairTable{{
    {0, 0}, {1, 1}, {2, 2}, {1, 2}, {0, 2}, {0, 1}}};

inline constexpr std::array<std::array<int, 3>, 3> kPairIndex{{
    {0, 5, 4}, {5, 1, 3}, {4, 3, 2}}};

constexpr int pair_index(int i, int j) { return kPairIndex[i][j]; }
constexpr std::array<int, 2> pair(int A) { return kPairTable[A]; }

constexpr int triple_index(int i, int j, int k) { return 6 * k + pair_index(i, j); }
constexpr std::array<int, 3> triple(int alpha) {
  const auto p = kPairTable[alpha % 6];
  return {p[0], p[1], alpha / 6};
}
/// Voigt pair index of a triple, i.e. the corrector pair it extends.
constexpr int triple_pair(int alpha) { return alpha % 6; }
constexpr int triple_third(int alpha) { return alpha / 6; }

/// Labels with 1-based digits, e.g. "23" or "121".
std::string pair_label(int A);
std::string triple_label(int alpha);

}  // namespace voigt

/// Full 3x3x3x3 array, row-major in (i, j, k, l).
using Rank4 = std::array<double, 81>;
using Rank5 = std::array<double, 243>;
using Rank6 = std::array<double, 729>;

constexpr int idx4(int i, int j, int k, int l) { return ((i * 3 + j) * 3 + k) * 3 + l; }
constexpr int idx5(int i, int j, int k, int l, int m) { return idx4(i, j, k, l) * 3 + m; }
constexpr int idx6(int i, int j, int k, int l, int m, int n) { return idx5(i, j, k, l, m) * 3 + n; }

/// Rank-4 stiffness in Voigt storage (no engineering-shear factors).
class Stiffness4 {
 public:
  Stiffness4() : m_(Matrix6::Zero()) {}
  explicit Stiffness4(const Matrix6& m) : m_(m) {}

  const Matrix6& voigt() const { return m_; }
  Matrix6& voigt() { return m_; }

  double operator()(int i, int j, int k, int l) const {
    return m_(voigt::pair_index(i, j), voigt::pair_index(k, l));
  }

  /// max |C_AB - C_BA|
  double max_asymmetry() const;
  double max_abs() const { return m_.cwiseAbs().maxCoeff(); }

 private:
  Matrix6 m_;
};

/// Rank-5 coupling tensor, rows by Voigt pair, columns by Voigt triple.
class Tensor5 {
 public:
  Tensor5() : m_(Matrix6x18::Zero()) {}
  explicit Tensor5(const Matrix6x18& m) : m_(m) {}

  const Matrix6x18& voigt() const { return m_; }
  Matrix6x18& voigt() { return m_; }
  double operator()(int i, int j, int k, int l, int m) const {
    return m_(voigt::pair_index(i, j), voigt::triple_index(k, l, m));
  }
  double max_abs() const { return m_.cwiseAbs().maxCoeff(); }

 private:
  Matrix6x18 m_;
};

/// Rank-6 strain-gradient stiffness, rows and columns by Voigt triple.
class Tensor6 {
 public:
  Tensor6() : m_(Matrix18::Zero()) {}
  explicit Tensor6(const Matrix18& m) : m_(m) {}

  const Matrix18& voigt() const { return m_; }
  Matrix18& voigt() { return m_; }
  double operator()(int i, int j, int k, int l, int m, int n) const {
    return m_(voigt::triple_index(i, j, k), voigt::triple_index(l, m, n));
  }
  double max_asymmetry() const;
  double max_abs() const { return m_.cwiseAbs().maxCoeff(); }

 private:
  Matrix18 m_;
};

struct IsotropicPhase {
  double young_modulus = 0.0;  // Pa
  double poisson_ratio = 0.0;
  int phase_id = 0;
};

/// Lame law. Throws ParameterError outside E > 0, -1 < nu < 0.5; warns
/// through gradhom::warn when the result is badly conditioned.
Stiffness4 isotropic_stiffness(const IsotropicPhase& phase);

/// Packs a minor-symmetric array. Throws SymmetryError naming the worst
/// index quadruple if a minor symmetry is violated beyond 1e-12 * max|C|.
Stiffness4 voigt_pack4(const Rank4& full);
Rank4 voigt_unpack4(const Stiffness4& c);
Rank5 voigt_unpack5(const Tensor5& g);
Rank6 voigt_unpack6(const Tensor6& d);

/// Eigenvalues of the 6x6 Voigt matrix in ascending order.
std::array<double, 6> check_spectrum(const Stiffness4& c);

inline constexpr double kSymmetryTolerance = 1e-10;

/// Result-document block shared by all tensor serializations.
nlohmann::json tensors_to_json(const Stiffness4& c, const Tensor5& g, const Tensor6& d);
/// Inverse of tensors_to_json; throws ConfigError on malformed input.
void tensors_from_json(const nlohmann::json& doc, Stiffness4& c, Tensor5& g, Tensor6& d);

}  // namespace gradhom
