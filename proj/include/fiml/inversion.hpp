#pragma once

#include <Eigen/Sparse>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "fiml/jacobian.hpp"
#include "fiml/solver.hpp"

namespace fiml {

/// Reference velocity samples at selected cells.
struct AssimilationData {
    std::vector<int> cells;          // selected cell ids (unblanked)
    std::vector<double> u_ref;       // x velocity per selected cell
    std::vector<double> v_ref;       // y velocity (ignored in 1D)
    std::string source = "reference";

    int n_samples() const { return static_cast<int>(cells.size()); }
};

struct OptimizerSettings {
    int max_iterations = 100;
    double initial_step = 0.0;       // 0 = auto (scaled from the first gradient)
    double armijo_c1 = 1e-4;
    int max_backtracks = 25;
    double plateau_rel_change = 1e-3;
    int plateau_window = 5;
    double target_reduction = 0.0;   // stop when J <= target_reduction * J0 (0 = off)
    double beta_min = 1e-3;          // solver stability bound on beta_c
    double step_growth = 2.0;        // trial-step growth after an accepted step
};

struct InversionProblem {
    Mesh mesh;
    FlowConditions conditions;
    SolverSettings solver;
    AssimilationData data;
    double lambda = 1e-2;
    std::vector<std::uint8_t> activity;  // cells where beta_c may differ from 1
    OptimizerSettings optimizer;
    JacobianOptions jacobian;
};

struct InversionResult {
    CorrectionField beta;
    FlowState state;                       // converged at the final beta
    std::vector<double> objective_history; // J per accepted iterate (incl. initial)
    std::vector<double> gradient_norm_history;
    std::string termination;               // plateau | max_iterations | target | no_descent
    int iterations = 0;
};

/// Data-mismatch + regularization objective:
/// J = (1/n_a) sum_selected |u - u_ref|^2 + (lambda/n) sum_cells (beta - 1)^2.
double objective(const FlowState& state, const InversionProblem& problem,
                 const CorrectionField& beta);

/// dJ/dw at fixed beta (the adjoint right-hand side).
Eigen::VectorXd objective_state_gradient(const DiscreteCase& cs, const FlowState& state,
                                         const InversionProblem& problem);

/// Total gradient dJ/dbeta = dJ/dbeta - phi^T dR/dbeta, restricted to active
/// cells (zero elsewhere). dR/dbeta is analytic: beta enters linearly through
/// the omega production source.
std::vector<double> total_gradient(const Eigen::VectorXd& phi, const DiscreteCase& cs,
                                   const FlowState& state, const CorrectionField& beta,
                                   const InversionProblem& problem);

/// Adjoint gradient at a converged state (assembles the Jacobian, solves the
/// transposed system, applies total_gradient).
std::vector<double> adjoint_gradient(const DiscreteCase& cs, const FlowState& state,
                                     const CorrectionField& beta,
                                     const InversionProblem& problem);

/// Steepest-descent inversion with Armijo backtracking; every accepted step
/// re-converges the primal solver (warm-started from the previous state).
InversionResult invert(const InversionProblem& problem, const CorrectionField& initial);

}  // namespace fiml
