#pragma once

#include <Eigen/Sparse>

#include "fiml/solver.hpp"

namespace fiml {

struct JacobianOptions {
    /// Relative perturbation; the per-component step is fd_step * (1 + |w|).
    double fd_step = 1e-6;
    /// Central differences halve truncation error for two residual sweeps
    /// per color; forward differencing is available for speed.
    bool central = true;
};

/// Sparse state Jacobian dR/dw assembled by graph-colored finite differences
/// of the residual operator. Structured-grid coloring: cells are grouped by
/// index modulo (2*reach + 1) per axis, so perturbed cells of one color are
/// farther apart than the residual stencil and every difference attributes
/// to a unique column.
Eigen::SparseMatrix<double> assemble_state_jacobian(const DiscreteCase& cs,
                                                    const FlowState& state,
                                                    const CorrectionField& beta,
                                                    const JacobianOptions& opts = {});

}  // namespace fiml
