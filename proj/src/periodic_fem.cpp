#include "gradhom/periodic_fem.hpp"

#include <algorithm>
#include <chrono>
#include <limits>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>

#include "gradhom/error.hpp"
#include "linear_solver.hpp"

namespace gradhom {

DofClass PeriodicMap::classify(int node, int comp) const {
  if (reduced[3 * node + comp] < 0) return DofClass::Fixed;
  return master_of[node] == node ? DofClass::Master : DofClass::Slave;
}

double default_match_tolerance(const TetMesh& mesh) { return 1e-8 * mesh.box.diagonal(); }

namespace {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), 0); }
  int find(int x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(int a, int b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<int> parent_;
};

}  // namespace

PeriodicMap build_periodic_map(const TetMesh& mesh, double tolerance, RigidModePolicy policy) {
  const std::size_t n = mesh.num_nodes();
  UnionFind uf(n);
  PeriodicMap map;
  map.policy = policy;
  for (int axis = 0; axis < 3; ++axis) {
    const FacePairing pairing = pair_faces(mesh, axis, tolerance);
    map.pairs_per_axis[axis] = static_cast<int>(pairing.pairs.size());
    for (const auto& [lo, hi] : pairing.pairs) uf.unite(lo, hi);
  }

  // The master of each class is its only node not lying on a max face.
  auto on_max_face = [&](std::size_t i) {
    for (int k = 0; k < 3; ++k) {
      if (std::abs(mesh.nodes[i][k] - mesh.box.hi[k]) <= tolerance) return true;
    }
    return false;
  };
  std::vector<int> master_of_root(n, -1);
  for (std::size_t i = 0; i < n; ++i) {
    if (on_max_face(i)) continue;
    int& m = master_of_root[uf.find(static_cast<int>(i))];
    if (m >= 0) {
      throw PeriodicityError("periodic class of node " + std::to_string(i) + " has two candidate masters (" +
                             std::to_string(m) + " and " + std::to_string(i) + ")");
    }
    m = static_cast<int>(i);
  }
  map.master_of.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int m = master_of_root[uf.find(static_cast<int>(i))];
    if (m < 0) throw PeriodicityError("node " + std::to_string(i) + " does not resolve to a master node");
    map.master_of[i] = m;
  }

  if (policy == RigidModePolicy::PinCenterNode) {
    const Vec3 c = geometric_center(mesh);
    double best = INFINITY;
    for (std::size_t i = 0; i < n; ++i) {
      if (map.master_of[i] != static_cast<int>(i)) continue;
      const double d = (mesh.nodes[i] - c).squaredNorm();
      if (d < best) {
        best = d;
        map.pinned_node = static_cast<int>(i);
      }
    }
  }

  map.reduced.assign(3 * n, -1);
  int next = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (map.master_of[i] != static_cast<int>(i) || static_cast<int>(i) == map.pinned_node) continue;
    for (int k = 0; k < 3; ++k) map.reduced[3 * i + k] = next++;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) map.reduced[3 * i + k] = map.reduced[3 * map.master_of[i] + k];
  }
  map.n_reduced = next;
  return map;
}

AssemblyPattern assembly_pattern(const TetMesh& mesh, const PeriodicMap& map) {
  AssemblyPattern out;
  const std::size_t ne = mesh.num_tets();
  out.element_dofs.resize(12 * ne);
  for (std::size_t e = 0; e < ne; ++e)
    for (int a = 0; a < 4; ++a)
      for (int i = 0; i < 3; ++i) out.element_dofs[12 * e + 3 * a + i] = map.reduced[3 * mesh.tets[e][a] + i];

  // Reduced unknowns come in triples per free master node, so the pattern is
  // built from master-node adjacency.
  const int nm = map.n_reduced / 3;
  std::vector<std::vector<int>> adj(nm);
  for (std::size_t e = 0; e < ne; ++e) {
    for (int a = 0; a < 4; ++a) {
      const int ka = out.element_dofs[12 * e + 3 * a];
      if (ka < 0) continue;
      for (int b = 0; b < 4; ++b) {
        const int kb = out.element_dofs[12 * e + 3 * b];
        if (kb >= 0) adj[ka / 3].push_back(kb / 3);
      }
    }
  }
  std::vector<int> outer(map.n_reduced + 1, 0);
  for (int k = 0; k < nm; ++k) {
    auto& v = adj[k];
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    for (int c = 0; c < 3; ++c) outer[3 * k + c + 1] = outer[3 * k + c] + 3 * static_cast<int>(v.size());
  }
  std::vector<int> inner(outer.back());
  for (int k = 0; k < nm; ++k)
    for (int c = 0; c < 3; ++c) {
      int pos = outer[3 * k + c];
      for (int m : adj[k])
        for (int r = 0; r < 3; ++r) inner[pos++] = 3 * m + r;
    }
  std::vector<double> zeros(inner.size(), 0.0);
  out.matrix = Eigen::Map<const SparseMatrix>(map.n_reduced, map.n_reduced, static_cast<Eigen::Index>(inner.size()),
                                              outer.data(), inner.data(), zeros.data());

  out.slot.assign(144 * ne, -1);
  for (std::size_t e = 0; e < ne; ++e) {
    const int* d = out.element_dofs.data() + 12 * e;
    for (int c = 0; c < 12; ++c) {
      if (d[c] < 0) continue;
      const int* first = inner.data() + outer[d[c]];
      const int* last = inner.data() + outer[d[c] + 1];
      for (int r = 0; r < 12; ++r) {
        if (d[r] < 0) continue;
        out.slot[144 * e + 12 * r + c] = static_cast<int>(std::lower_bound(first, last, d[r]) - inner.data());
      }
    }
  }
  return out;
}

ReducedSystem::ReducedSystem(const TetMesh& mesh, const MaterialField& materials, const PeriodicMap& map,
                             Execution exec)
    : map_(map) {
  if (map.num_nodes() != mesh.num_nodes()) throw MeshError("periodic map does not belong to this mesh");
  const ElementGeometry geom = element_geometry(mesh, exec);
  const DenseMaterials mats = dense_materials(mesh, materials);
  AssemblyPattern pattern = assembly_pattern(mesh, map);
  matrix_ = std::move(pattern.matrix);
  element_dofs_ = std::move(pattern.element_dofs);
  assemble_values(geom, mats, pattern.slot, std::span<double>(matrix_.valuePtr(), matrix_.nonZeros()), exec);
  Eigen::VectorXd row_sums = Eigen::VectorXd::Zero(matrix_.rows());
  for (int c = 0; c < matrix_.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(matrix_, c); it; ++it) row_sums[it.row()] += std::abs(it.value());
  matrix_norm_ = row_sums.size() ? row_sums.maxCoeff() : 0.0;
}

ReducedSystem::~ReducedSystem() = default;

void ReducedSystem::factorize(const SolverOptions& options) {
  if (solver_) throw SolverError("reduced system is already factorized");
  if (map_.policy != RigidModePolicy::PinCenterNode) {
    throw SolverError("cannot factorize a system without a rigid-mode policy (translation nullspace)");
  }
  if (map_.n_reduced == 0) throw SolverError("reduced system has no unknowns; refine the mesh");
  for (int k = 0; k < matrix_.cols(); ++k) {
    if (!(matrix_.coeff(k, k) > 0.0)) {
      throw SolverError("reduced unknown " + std::to_string(k) + " has non-positive stiffness " +
                        std::to_string(matrix_.coeff(k, k)));
    }
  }
  options_ = options;
  const auto t0 = std::chrono::steady_clock::now();
  solver_ = options.kind == SolverKind::Direct ? make_direct_solver(matrix_)
                                                : make_iterative_solver(matrix_, options.cg_tolerance);
  const double dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::lock_guard lock(stats_mutex_);
  stats_.factorizations += 1;
  stats_.factor_seconds += dt;
}

Eigen::MatrixXd ReducedSystem::solve(const Eigen::MatrixXd& rhs) const {
  if (!solver_) throw SolverError("solve requested before factorization");
  if (rhs.rows() != map_.n_reduced) throw SolverError("right-hand side has the wrong length");

  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(rhs.rows(), rhs.cols());
  std::vector<Eigen::Index> active;
  for (Eigen::Index c = 0; c < rhs.cols(); ++c) {
    if (rhs.col(c).squaredNorm() > 0.0) active.push_back(c);
  }
  double worst = 0.0;
  double worst_backward = 0.0;
  if (!active.empty()) {
    Eigen::MatrixXd f(rhs.rows(), static_cast<Eigen::Index>(active.size()));
    for (std::size_t j = 0; j < active.size(); ++j) f.col(j) = rhs.col(active[j]);
    Eigen::MatrixXd u = solver_->solve(f);
    const Eigen::VectorXd fnorm = f.colwise().norm().transpose();
    double previous = std::numeric_limits<double>::infinity();
    for (int pass = 0;; ++pass) {
      const Eigen::MatrixXd r = f - matrix_ * u;
      const Eigen::VectorXd rnorm = r.colwise().norm().transpose();
      worst = rnorm.cwiseQuotient(fnorm).maxCoeff();
      if (worst <= options_.residual_limit) break;
      // Refinement that no longer gains a factor of two has hit the rounding
      // floor eps |K| |u| / |f|. Accept when the backward error is at that
      // floor, which is the best any double precision solve can do.
      const bool stalled = worst > 0.5 * previous;
      if (stalled || pass >= options_.max_refinements) {
        const Eigen::VectorXd unorm = u.colwise().norm().transpose();
        double backward = 0.0;
        for (Eigen::Index j = 0; j < rnorm.size(); ++j)
          backward = std::max(backward, rnorm[j] / (matrix_norm_ * unorm[j] + fnorm[j]));
        if (backward <= kBackwardErrorLimit) {
          worst_backward = std::max(worst_backward, backward);
          break;
        }
        std::ostringstream os;
        os << "linear solve residual " << worst << " exceeds the limit " << options_.residual_limit << " after "
           << pass << " refinement steps (backward error " << backward << ")";
        throw SolverError(os.str());
      }
      previous = worst;
      u += solver_->solve(r);
    }
    for (std::size_t j = 0; j < active.size(); ++j) x.col(active[j]) = u.col(j);
  }

  std::lock_guard lock(stats_mutex_);
  stats_.solve_calls += 1;
  stats_.columns_solved += static_cast<int>(rhs.cols());
  stats_.max_relative_residual = std::max(stats_.max_relative_residual, worst);
  stats_.max_backward_error = std::max(stats_.max_backward_error, worst_backward);
  return x;
}

SolverStats ReducedSystem::stats() const {
  std::lock_guard lock(stats_mutex_);
  return stats_;
}

void ReducedSystem::write_matrix_market(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw SolverError("cannot write matrix dump " + path.string());
  long long nnz = 0;
  for (int c = 0; c < matrix_.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(matrix_, c); it; ++it) nnz += it.row() >= c;
  out << "%%MatrixMarket matrix coordinate real symmetric\n";
  out << matrix_.rows() << ' ' << matrix_.cols() << ' ' << nnz << '\n';
  out << std::setprecision(17);
  for (int c = 0; c < matrix_.outerSize(); ++c)
    for (SparseMatrix::InnerIterator it(matrix_, c); it; ++it) {
      if (it.row() >= c) out << it.row() + 1 << ' ' << c + 1 << ' ' << it.value() << '\n';
    }
}

Eigen::VectorXd restrict_to_reduced(const PeriodicMap& map, const Eigen::VectorXd& nodal) {
  Eigen::VectorXd out = Eigen::VectorXd::Zero(map.n_reduced);
  for (std::size_t d = 0; d < map.reduced.size(); ++d) {
    if (map.reduced[d] >= 0) out[map.reduced[d]] += nodal[static_cast<Eigen::Index>(d)];
  }
  return out;
}

NodalField expand(const PeriodicMap& map, const Eigen::Ref<const Eigen::VectorXd>& reduced) {
  NodalField field(map.num_nodes());
  for (std::size_t i = 0; i < field.size(); ++i)
    for (int k = 0; k < 3; ++k) {
      const int d = map.reduced[3 * i + k];
      field[i][k] = d >= 0 ? reduced[d] : 0.0;
    }
  return field;
}

std::vector<double> nodal_volumes(const TetMesh& mesh, const ElementGeometry& geom) {
  std::vector<double> w(mesh.num_nodes(), 0.0);
  for (std::size_t e = 0; e < mesh.num_tets(); ++e)
    for (int v : mesh.tets[e]) w[v] += 0.25 * geom.volume[e];
  return w;
}

Vec3 field_mean(const NodalField& field, std::span<const double> weights) {
  Vec3 s = Vec3::Zero();
  double total = 0.0;
  for (std::size_t i = 0; i < field.size(); ++i) {
    s += weights[i] * field[i];
    total += weights[i];
  }
  return s / total;
}

void remove_mean(NodalField& field, std::span<const double> weights) {
  const Vec3 m = field_mean(field, weights);
  for (Vec3& v : field) v -= m;
}

std::vector<NodalField> solve_multi(const ReducedSystem& system, const Eigen::MatrixXd& rhs) {
  const Eigen::MatrixXd x = system.solve(rhs);
  std::vector<NodalField> out;
  out.reserve(static_cast<std::size_t>(x.cols()));
  for (Eigen::Index c = 0; c < x.cols(); ++c) out.push_back(expand(system.map(), x.col(c)));
  return out;
}

}  // namespace gradhom
