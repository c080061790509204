#include "gradhom/kernels.hpp"

#include <algorithm>
#include <unordered_map>

#include <Eigen/LU>

#include "gradhom/error.hpp"

namespace gradhom {
namespace {

void one_element(const TetMesh& mesh, std::size_t e, ElementGeometry& g) {
  const auto& t = mesh.tets[e];
  const Vec3& x0 = mesh.nodes[t[0]];
  Mat3 J;
  J.col(0) = mesh.nodes[t[1]] - x0;
  J.col(1) = mesh.nodes[t[2]] - x0;
  J.col(2) = mesh.nodes[t[3]] - x0;
  const double det = J.determinant();
  if (!(det > 0.0)) throw MeshError("tet " + std::to_string(e) + " is degenerate or inverted");
  const Mat3 inv = J.inverse();
  ShapeGradients& gr = g.grad[e];
  gr[1] = inv.row(0).transpose();
  gr[2] = inv.row(1).transpose();
  gr[3] = inv.row(2).transpose();
  gr[0] = -(gr[1] + gr[2] + gr[3]);
  g.volume[e] = det / 6.0;
  g.centroid[e] = mesh.tet_centroid(e);
}

}  // namespace

ElementGeometry element_geometry(const TetMesh& mesh, Execution exec) {
  const std::size_t n = mesh.num_tets();
  ElementGeometry g;
  g.volume.resize(n);
  g.grad.resize(n);
  g.centroid.resize(n);
  if (exec == Execution::Serial) {
    for (std::size_t e = 0; e < n; ++e) one_element(mesh, e, g);
    return g;
  }
  // Exceptions must not escape an OpenMP region; record the first bad tet.
  long long bad = -1;
#pragma omp parallel for schedule(static)
  for (long long e = 0; e < static_cast<long long>(n); ++e) {
    try {
      one_element(mesh, static_cast<std::size_t>(e), g);
    } catch (const MeshError&) {
#pragma omp critical(gradhom_bad_tet)
      if (bad < 0 || e < bad) bad = e;
    }
  }
  if (bad >= 0) one_element(mesh, static_cast<std::size_t>(bad), g);
  return g;
}

std::array<Vec3, 4> quadrature_points(const TetMesh& mesh, std::size_t e) {
  const auto& t = mesh.tets[e];
  std::array<Vec3, 4> q;
  for (int p = 0; p < 4; ++p) {
    q[p] = Vec3::Zero();
    for (int a = 0; a < 4; ++a) q[p] += (a == p ? kQuadA : kQuadB) * mesh.nodes[t[a]];
  }
  return q;
}

DenseMaterials dense_materials(const TetMesh& mesh, const MaterialField& materials) {
  DenseMaterials out;
  std::unordered_map<int, int> table_index;
  for (const auto& [tag, c] : materials.by_region) {
    table_index[tag] = static_cast<int>(out.tables.size());
    out.tables.push_back(voigt_unpack4(c));
  }
  out.table_of_tet.resize(mesh.num_tets());
  for (std::size_t e = 0; e < mesh.num_tets(); ++e) {
    const auto it = table_index.find(mesh.region[e]);
    if (it == table_index.end()) throw MeshError("no stiffness assigned to region " + std::to_string(mesh.region[e]));
    out.table_of_tet[e] = it->second;
  }
  return out;
}

void element_stiffness(const ShapeGradients& g, double vol, const Rank4& C, Matrix12& K) {
  for (int a = 0; a < 4; ++a) {
    for (int b = a; b < 4; ++b) {
      for (int i = 0; i < 3; ++i) {
        for (int k = 0; k < 3; ++k) {
          double s = 0.0;
          for (int j = 0; j < 3; ++j)
            for (int l = 0; l < 3; ++l) s += C[idx4(i, j, k, l)] * g[a][j] * g[b][l];
          K(3 * a + i, 3 * b + k) = vol * s;
          K(3 * b + k, 3 * a + i) = vol * s;
        }
      }
    }
  }
}

void assemble_values(const ElementGeometry& geom, const DenseMaterials& mats, std::span<const int> slot,
                     std::span<double> values, Execution exec) {
  const std::size_t n = geom.volume.size();
  auto scatter = [&](std::size_t e, const Matrix12& K) {
    const int* s = slot.data() + 144 * e;
    for (int r = 0; r < 12; ++r)
      for (int c = 0; c < 12; ++c) {
        const int k = s[12 * r + c];
        if (k >= 0) values[k] += K(r, c);
      }
  };

  if (exec == Execution::Serial) {
    Matrix12 K;
    for (std::size_t e = 0; e < n; ++e) {
      element_stiffness(geom.grad[e], geom.volume[e], mats.tables[mats.table_of_tet[e]], K);
      scatter(e, K);
    }
    return;
  }

  // Element matrices are computed in parallel per block and scattered in
  // element order afterwards.
  constexpr std::size_t kBlock = 8192;
  std::vector<Matrix12> block(std::min(n, kBlock));
  for (std::size_t lo = 0; lo < n; lo += kBlock) {
    const std::size_t hi = std::min(n, lo + kBlock);
#pragma omp parallel for schedule(static)
    for (long long e = static_cast<long long>(lo); e < static_cast<long long>(hi); ++e) {
      element_stiffness(geom.grad[e], geom.volume[e], mats.tables[mats.table_of_tet[e]], block[e - lo]);
    }
    for (std::size_t e = lo; e < hi; ++e) scatter(e, block[e - lo]);
  }
}

}  // namespace gradhom
