#pragma once

// Element-level kernels shared by assembly, load construction and the
// effective-tensor reductions. Each kernel has a plain serial reference and
// an OpenMP variant; the two produce bit-identical results wherever the
// result feeds a solve (matrix values, load vectors), and identical results
// for any thread count in the reductions.

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "gradhom/mesh.hpp"

namespace gradhom {

enum class Execution { Serial, Parallel };

using Matrix12 = Eigen::Matrix<double, 12, 12>;
using Vector12 = Eigen::Matrix<double, 12, 1>;
using ShapeGradients = std::array<Vec3, 4>;

struct ElementGeometry {
  std::vector<double> volume;
  std::vector<ShapeGradients> grad;  // gradients of the barycentric shape functions
  std::vector<Vec3> centroid;
};

ElementGeometry element_geometry(const TetMesh& mesh, Execution exec = Execution::Parallel);

/// Degree-2 symmetric rule on the reference tet: barycentric weights of the
/// four points, each carrying a quarter of the volume.
inline constexpr double kQuadA = 0.5854101966249685;
inline constexpr double kQuadB = 0.1381966011250105;
std::array<Vec3, 4> quadrature_points(const TetMesh& mesh, std::size_t e);

/// Full-index stiffness for each region tag, row-major (i, j, k, l).
struct DenseMaterials {
  std::vector<Rank4> tables;
  std::vector<int> table_of_tet;  // index into tables per element
};
DenseMaterials dense_materials(const TetMesh& mesh, const MaterialField& materials);

/// K[(a,i),(b,k)] = vol * C_ijkl * dN_a/dy_j * dN_b/dy_l, local dof 3a+i.
void element_stiffness(const ShapeGradients& g, double vol, const Rank4& C, Matrix12& K);

/// Adds every element matrix entry into `values[slot[144 e + 12 r + c]]`,
/// skipping negative slots. Elements are scattered in index order, so the
/// serial and parallel variants agree bit for bit.
void assemble_values(const ElementGeometry& geom, const DenseMaterials& mats, std::span<const int> slot,
                     std::span<double> values, Execution exec);

/// Assembles `ncols` load columns: element_load(e, col, out) fills the 12
/// local entries, which are added to F(dof[12 e + r], col) for dof >= 0.
/// Columns are independent and each is accumulated in element order.
template <class ElementLoad>
void assemble_columns(std::size_t num_tets, std::span<const int> dof, int ncols, ElementLoad&& element_load,
                      Eigen::MatrixXd& F, Execution exec) {
  const long long nc = ncols;
  auto column = [&](long long col) {
    Vector12 fe;
    for (std::size_t e = 0; e < num_tets; ++e) {
      element_load(e, static_cast<int>(col), fe);
      for (int r = 0; r < 12; ++r) {
        const int d = dof[12 * e + r];
        if (d >= 0) F(d, col) += fe[r];
      }
    }
  };
  if (exec == Execution::Parallel) {
#pragma omp parallel for schedule(dynamic, 1)
    for (long long col = 0; col < nc; ++col) column(col);
  } else {
    for (long long col = 0; col < nc; ++col) column(col);
  }
}

/// Sum of f(e) over elements. The serial variant is a plain running sum; the
/// parallel variant sums a fixed number of contiguous chunks and then adds
/// the chunk totals in order, so its result does not depend on the thread
/// count.
template <class T, class Term>
T element_sum(std::size_t n, const T& zero, Term&& term, Execution exec) {
  if (exec == Execution::Serial) {
    T acc = zero;
    for (std::size_t e = 0; e < n; ++e) acc += term(e);
    return acc;
  }
  constexpr long long kChunks = 64;
  std::vector<T> partial(kChunks, zero);
#pragma omp parallel for schedule(dynamic, 1)
  for (long long c = 0; c < kChunks; ++c) {
    const std::size_t lo = n * c / kChunks;
    const std::size_t hi = n * (c + 1) / kChunks;
    T acc = zero;
    for (std::size_t e = lo; e < hi; ++e) acc += term(e);
    partial[c] = acc;
  }
  T acc = zero;
  for (const T& p : partial) acc += p;
  return acc;
}

}  // namespace gradhom
