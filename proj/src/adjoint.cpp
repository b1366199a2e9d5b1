#include "fiml/adjoint.hpp"

#include <Eigen/SparseLU>

namespace fiml {

Eigen::VectorXd solve_adjoint(const Eigen::SparseMatrix<double>& jacobian,
                              const Eigen::VectorXd& rhs, double tol) {
    if (jacobian.rows() != jacobian.cols() || jacobian.rows() != rhs.size())
        throw std::invalid_argument("solve_adjoint: dimension mismatch");

    Eigen::SparseMatrix<double> jt = jacobian.transpose();
    jt.makeCompressed();

    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.compute(jt);
    if (lu.info() != Eigen::Success)
        throw SolverError(SolverError::Kind::NumericalFailure,
                          "solve_adjoint: factorization failed (singular Jacobian?)",
                          ResidualHistory{});

    Eigen::VectorXd phi = lu.solve(rhs);
    const double rhs_norm = rhs.norm();
    const double res = (jt * phi - rhs).norm();
    if (!(res <= tol * std::max(rhs_norm, 1e-300))) {
        ResidualHistory hist;
        hist.equations = {"adjoint"};
        hist.norms = {{res / std::max(rhs_norm, 1e-300)}};
        throw SolverError(SolverError::Kind::NonConvergence,
                          "solve_adjoint: residual check failed", hist);
    }
    return phi;
}

}  // namespace fiml
