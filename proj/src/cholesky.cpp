#include <mutex>
#include <sstream>

#include <Eigen/CholmodSupport>
#include <Eigen/IterativeLinearSolvers>

#include "gradhom/error.hpp"
#include "linear_solver.hpp"

namespace gradhom {
namespace {

// Exposes the failing column CHOLMOD records in the factor.
class SupernodalLLT : public Eigen::CholmodSupernodalLLT<SparseMatrix, Eigen::Lower> {
 public:
  long minor_column() const { return m_cholmodFactor ? static_cast<long>(m_cholmodFactor->minor) : -1; }
};

class DirectSolver final : public LinearSolver {
 public:
  explicit DirectSolver(const SparseMatrix& matrix) {
    llt_.compute(matrix);
    if (llt_.info() != Eigen::Success) {
      std::ostringstream os;
      const long col = llt_.minor_column();
      os << "sparse Cholesky factorization failed: matrix is not positive definite";
      if (col >= 0 && col < matrix.cols()) {
        os << " (non-positive pivot at reduced column " << col << ", diagonal entry "
           << matrix.coeff(col, col) << ")";
      }
      os << "; check for disconnected or zero-stiffness regions";
      throw SolverError(os.str());
    }
  }

  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const override {
    // The CHOLMOD workspace lives in a shared common block.
    std::lock_guard lock(mutex_);
    Eigen::MatrixXd x = llt_.solve(rhs);
    if (llt_.info() != Eigen::Success) throw SolverError("sparse Cholesky back-substitution failed");
    return x;
  }

 private:
  SupernodalLLT llt_;
  mutable std::mutex mutex_;
};

class IterativeSolver final : public LinearSolver {
 public:
  IterativeSolver(const SparseMatrix& matrix, double tolerance) {
    cg_.setTolerance(tolerance);
    cg_.setMaxIterations(std::max<Eigen::Index>(1000, 10 * matrix.rows()));
    cg_.compute(matrix);
    if (cg_.info() != Eigen::Success) throw SolverError("conjugate-gradient setup failed");
  }

  Eigen::MatrixXd solve(const Eigen::MatrixXd& rhs) const override {
    std::lock_guard lock(mutex_);  // convergence info is stored in the solver
    Eigen::MatrixXd x(rhs.rows(), rhs.cols());
    for (Eigen::Index c = 0; c < rhs.cols(); ++c) {
      Eigen::VectorXd xc = cg_.solve(rhs.col(c));
      if (cg_.info() != Eigen::Success) {
        std::ostringstream os;
        os << "conjugate gradients did not converge for column " << c << " after " << cg_.iterations()
           << " iterations (estimated error " << cg_.error() << ")";
        throw SolverError(os.str());
      }
      x.col(c) = xc;
    }
    return x;
  }

 private:
  Eigen::ConjugateGradient<SparseMatrix, Eigen::Lower | Eigen::Upper, Eigen::DiagonalPreconditioner<double>> cg_;
  mutable std::mutex mutex_;
};

}  // namespace

std::unique_ptr<LinearSolver> make_direct_solver(const SparseMatrix& matrix) {
  return std::make_unique<DirectSolver>(matrix);
}

std::unique_ptr<LinearSolver> make_iterative_solver(const SparseMatrix& matrix, double tolerance) {
  return std::make_unique<IterativeSolver>(matrix, tolerance);
}

}  // namespace gradhom
