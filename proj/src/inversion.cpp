#include "fiml/inversion.hpp"

#include <algorithm>
#include <cmath>

#include "fiml/adjoint.hpp"

namespace fiml {

namespace {

void validate_problem(const InversionProblem& p) {
    if (p.data.cells.empty())
        throw std::invalid_argument("inversion: assimilation mask is empty");
    if (p.data.u_ref.size() != p.data.cells.size())
        throw std::invalid_argument("inversion: u_ref size mismatch");
    if (p.mesh.dim == 2 && p.data.v_ref.size() != p.data.cells.size())
        throw std::invalid_argument("inversion: v_ref size mismatch");
    if (!(p.lambda >= 0.0))
        throw std::invalid_argument("inversion: lambda must be >= 0");
    const int n = p.mesh.n_cells();
    for (int c : p.data.cells) {
        if (c < 0 || c >= n || p.mesh.blanked[c])
            throw std::invalid_argument("inversion: selected cell out of range or blanked");
    }
    if (!p.activity.empty() && static_cast<int>(p.activity.size()) != n)
        throw std::invalid_argument("inversion: activity mask size mismatch");
}

std::vector<std::uint8_t> effective_activity(const InversionProblem& p) {
    const int n = p.mesh.n_cells();
    std::vector<std::uint8_t> act(n, 1);
    if (!p.activity.empty()) act = p.activity;
    for (int c = 0; c < n; ++c)
        if (p.mesh.blanked[c]) act[c] = 0;
    return act;
}

}  // namespace

double objective(const FlowState& state, const InversionProblem& problem,
                 const CorrectionField& beta) {
    validate_problem(problem);
    const int n = problem.mesh.n_cells();
    if (beta.n_cells() != n)
        throw std::invalid_argument("objective: beta size mismatch");

    const int na = problem.data.n_samples();
    double data_term = 0.0;
    for (int s = 0; s < na; ++s) {
        const int c = problem.data.cells[s];
        const double du = state.u[c] - problem.data.u_ref[s];
        data_term += du * du;
        if (problem.mesh.dim == 2) {
            const double dv = state.v[c] - problem.data.v_ref[s];
            data_term += dv * dv;
        }
    }
    data_term /= na;

    double reg = 0.0;
    for (int c = 0; c < n; ++c) {
        const double d = beta.beta[c] - 1.0;
        reg += d * d;
    }
    reg *= problem.lambda / n;
    return data_term + reg;
}

Eigen::VectorXd objective_state_gradient(const DiscreteCase& cs, const FlowState& state,
                                         const InversionProblem& problem) {
    const int n = cs.n_cells();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(static_cast<long>(n) * cs.n_eq());
    const int na = problem.data.n_samples();
    const double scale = 2.0 / na;
    for (int s = 0; s < na; ++s) {
        const int c = problem.data.cells[s];
        g[c] += scale * (state.u[c] - problem.data.u_ref[s]);  // u block is first
        if (cs.mesh().dim == 2)
            g[n + c] += scale * (state.v[c] - problem.data.v_ref[s]);
    }
    return g;
}

std::vector<double> total_gradient(const Eigen::VectorXd& phi, const DiscreteCase& cs,
                                   const FlowState& state, const CorrectionField& beta,
                                   const InversionProblem& problem) {
    const int n = cs.n_cells();
    const std::vector<std::uint8_t> act = effective_activity(problem);
    const std::vector<double> prod = cs.omega_production_coefficient(state);

    // omega rows sit in the last equation block
    const int omega_block = cs.n_eq() - 1;
    std::vector<double> grad(n, 0.0);
    for (int c = 0; c < n; ++c) {
        if (!act[c]) continue;
        const double dj_dbeta = 2.0 * problem.lambda * (beta.beta[c] - 1.0) / n;
        const double dr_dbeta = prod[c];
        grad[c] = dj_dbeta - phi[omega_block * n + c] * dr_dbeta;
    }
    return grad;
}

std::vector<double> adjoint_gradient(const DiscreteCase& cs, const FlowState& state,
                                     const CorrectionField& beta,
                                     const InversionProblem& problem) {
    const Eigen::SparseMatrix<double> jac =
        assemble_state_jacobian(cs, state, beta, problem.jacobian);
    const Eigen::VectorXd rhs = objective_state_gradient(cs, state, problem);
    const Eigen::VectorXd phi = solve_adjoint(jac, rhs);
    return total_gradient(phi, cs, state, beta, problem);
}

InversionResult invert(const InversionProblem& problem, const CorrectionField& initial) {
    validate_problem(problem);
    const int n = problem.mesh.n_cells();
    if (initial.n_cells() != n)
        throw std::invalid_argument("invert: initial beta size mismatch");

    const std::vector<std::uint8_t> act = effective_activity(problem);
    if (std::none_of(act.begin(), act.end(), [](std::uint8_t a) { return a != 0; }))
        throw std::invalid_argument("invert: activity mask excludes every cell");

    const DiscreteCase cs(problem.mesh, problem.conditions, problem.solver);
    const OptimizerSettings& opt = problem.optimizer;

    CorrectionField beta = initial;
    RansSolution sol = cs.solve(beta);

    InversionResult result;
    result.beta = beta;
    result.state = sol.state;

    double J = objective(sol.state, problem, beta);
    const double J0 = J;
    result.objective_history.push_back(J);

    auto grad_inf = [](const std::vector<double>& g) {
        double m = 0.0;
        for (double v : g) m = std::max(m, std::abs(v));
        return m;
    };

    double step = opt.initial_step;
    int plateau_count = 0;
    result.termination = "max_iterations";

    for (int it = 1; it <= opt.max_iterations; ++it) {
        std::vector<double> grad = adjoint_gradient(cs, sol.state, beta, problem);
        const double gnorm = grad_inf(grad);
        result.gradient_norm_history.push_back(gnorm);
        if (gnorm == 0.0) {
            result.termination = "stationary";
            break;
        }

        double g2 = 0.0;
        for (double v : grad) g2 += v * v;

        if (step <= 0.0) step = 0.1 / gnorm;  // first trial moves beta by ~0.1

        bool accepted = false;
        for (int bt = 0; bt <= opt.max_backtracks; ++bt) {
            CorrectionField trial = beta;
            for (int c = 0; c < n; ++c) {
                if (!act[c]) continue;
                trial.beta[c] =
                    std::max(beta.beta[c] - step * grad[c], opt.beta_min);
            }
            RansSolution trial_sol;
            try {
                trial_sol = cs.solve(trial, &sol.state);
            } catch (const SolverError&) {
                step *= 0.5;  // primal diverged: reject and halve
                continue;
            }
            const double Jtrial = objective(trial_sol.state, problem, trial);
            if (Jtrial <= J - opt.armijo_c1 * step * g2) {
                const double rel_change = (J - Jtrial) / std::max(J, 1e-300);
                beta = trial;
                sol = std::move(trial_sol);
                J = Jtrial;
                accepted = true;
                plateau_count = (rel_change < opt.plateau_rel_change)
                                    ? plateau_count + 1
                                    : 0;
                break;
            }
            step *= 0.5;
        }

        if (!accepted) {
            result.termination = "no_descent";
            result.iterations = it;
            break;
        }

        result.objective_history.push_back(J);
        result.iterations = it;
        step *= opt.step_growth;

        if (opt.target_reduction > 0.0 && J <= opt.target_reduction * J0) {
            result.termination = "target";
            break;
        }
        if (plateau_count >= opt.plateau_window) {
            result.termination = "plateau";
            break;
        }
    }

    result.beta = beta;
    result.state = sol.state;
    return result;
}

}  // namespace fiml
