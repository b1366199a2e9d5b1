#pragma once

#include <Eigen/Sparse>

#include "fiml/solver.hpp"

namespace fiml {

/// Solve the transposed linear system J^T phi = rhs with a sparse direct
/// factorization and verify the solve: ||J^T phi - rhs|| <= tol * ||rhs||.
/// Throws SolverError on factorization failure or residual check failure.
Eigen::VectorXd solve_adjoint(const Eigen::SparseMatrix<double>& jacobian,
                              const Eigen::VectorXd& rhs, double tol = 1e-8);

}  // namespace fiml
