#pragma once

#include <memory>

#include "gradhom/periodic_fem.hpp"

namespace gradhom {

class LinearSolver {
 public:
  virtual ~LinearSolver() = default;
  /// Solves for every column of rhs. Throws SolverError.
  virtual Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const = 0;
};

/// Supernodal sparse Cholesky (CHOLMOD). Throws SolverError naming the
/// failing pivot column when the matrix is not positive definite.
std::unique_ptr<LinearSolver> make_direct_solver(const SparseMatrix& matrix);

/// Conjugate gradients with a diagonal preconditioner.
std::unique_ptr<LinearSolver> make_iterative_solver(const SparseMatrix& matrix, double tolerance);

}  // namespace gradhom
