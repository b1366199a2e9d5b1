#include <algorithm>
#include <cmath>

#include "fiml/solver.hpp"

namespace fiml {
namespace detail {

namespace {

constexpr double kOmegaFloor = 1e-30;

/// Thomas algorithm for tridiagonal systems (in-place on copies).
void solve_tridiagonal(std::vector<double> lower, std::vector<double> diag,
                       std::vector<double> upper, std::vector<double> rhs,
                       std::vector<double>& x) {
    const int n = static_cast<int>(diag.size());
    for (int i = 1; i < n; ++i) {
        const double m = lower[i] / diag[i - 1];
        diag[i] -= m * upper[i - 1];
        rhs[i] -= m * rhs[i - 1];
    }
    x.resize(n);
    x[n - 1] = rhs[n - 1] / diag[n - 1];
    for (int i = n - 2; i >= 0; --i) x[i] = (rhs[i] - upper[i] * x[i + 1]) / diag[i];
}

struct ChannelCoeffs {
    std::vector<TurbulenceCellCoeffs> cells;
    std::vector<double> dudy, dkdy, dwdy;
};

ChannelCoeffs evaluate_cells(const DiscreteCase& cs, const FlowState& state) {
    const Mesh& mesh = cs.mesh();
    const int n = mesh.n_cells();
    ChannelCoeffs out;
    std::vector<double> gx;
    gradient(mesh, state.u, gx, out.dudy);
    if (cs.conditions().model != TurbulenceModel::Laminar) {
        gradient(mesh, state.k, gx, out.dkdy);
        gradient(mesh, state.omega, gx, out.dwdy);
    } else {
        out.dkdy.assign(n, 0.0);
        out.dwdy.assign(n, 0.0);
    }
    out.cells.resize(n);
    for (int j = 0; j < n; ++j) {
        TurbulenceCellInputs in;
        in.k = (j < static_cast<int>(state.k.size())) ? state.k[j] : 0.0;
        in.omega = (j < static_cast<int>(state.omega.size())) ? state.omega[j] : 1.0;
        in.strain_mag = std::abs(out.dudy[j]);
        in.wall_distance = mesh.wall_distance[j];
        in.nu = state.nu;
        in.dkdy = out.dkdy[j];
        in.dwdy = out.dwdy[j];
        out.cells[j] = evaluate_closure(in, cs.conditions().constants,
                                        cs.conditions().model);
    }
    return out;
}

double face_diffusivity(double nu, double coeff_lo, double coeff_hi) {
    return nu + 0.5 * (coeff_lo + coeff_hi);
}

/// Cells [0, count) carry Dirichlet omega rows with the analytic sublayer
/// value; always at least the wall-adjacent cell.
int omega_dirichlet_count(const DiscreteCase& cs) {
    const Mesh& mesh = cs.mesh();
    const double force = cs.conditions().body_force_x;
    const double u_tau = std::sqrt(std::max(force, 0.0) * mesh.yface.back());
    int count = 1;
    if (u_tau > 0.0) {
        const double cutoff = cs.settings().omega_sublayer_yplus;
        while (count < mesh.ny &&
               mesh.cy[count] * u_tau / cs.conditions().nu < cutoff)
            ++count;
    }
    return count;
}

}  // namespace

void ChannelOps::residual(const DiscreteCase& cs, const Eigen::VectorXd& w,
                          const CorrectionField& beta, Eigen::VectorXd& r,
                          Eigen::VectorXd* scale) {
    const Mesh& mesh = cs.mesh();
    const FlowConditions& cond = cs.conditions();
    const int n = mesh.n_cells();
    const bool turb = cond.model != TurbulenceModel::Laminar;

    FlowState state = cs.unpack(w);
    const ChannelCoeffs cc = evaluate_cells(cs, state);

    r = Eigen::VectorXd::Zero(w.size());
    if (scale) *scale = Eigen::VectorXd::Zero(w.size());
    auto add = [&](int row, double term) {
        r[row] += term;
        if (scale) (*scale)[row] += std::abs(term);
    };

    const double force = cond.body_force_x;
    const int n_pin = turb ? omega_dirichlet_count(cs) : 0;
    auto c2c = [&](int j) { return mesh.cy[j + 1] - mesh.cy[j]; };

    for (int j = 0; j < n; ++j) {
        const double h = mesh.hy[j];

        // Momentum: d/dy[(nu + nu_t) du/dy] + F = 0
        if (j == 0) {
            add(j, -cond.nu * (state.u[0] - 0.0) / (mesh.cy[0] * h));  // no-slip wall
        } else {
            const double mu = face_diffusivity(cond.nu, cc.cells[j - 1].nu_t,
                                               cc.cells[j].nu_t);
            add(j, -mu * (state.u[j] - state.u[j - 1]) / (c2c(j - 1) * h));
        }
        if (j < n - 1) {  // symmetry plane carries zero flux
            const double mu = face_diffusivity(cond.nu, cc.cells[j].nu_t,
                                               cc.cells[j + 1].nu_t);
            add(j, mu * (state.u[j + 1] - state.u[j]) / (c2c(j) * h));
        }
        add(j, force);

        if (!turb) continue;

        // k equation
        {
            if (j == 0) {
                add(n + j, -cond.nu * (state.k[0] - 0.0) / (mesh.cy[0] * h));  // k = 0 at wall
            } else {
                const double mu = face_diffusivity(
                    cond.nu, cc.cells[j - 1].sigma_k * cc.cells[j - 1].nu_t,
                    cc.cells[j].sigma_k * cc.cells[j].nu_t);
                add(n + j, -mu * (state.k[j] - state.k[j - 1]) / (c2c(j - 1) * h));
            }
            if (j < n - 1) {
                const double mu = face_diffusivity(
                    cond.nu, cc.cells[j].sigma_k * cc.cells[j].nu_t,
                    cc.cells[j + 1].sigma_k * cc.cells[j + 1].nu_t);
                add(n + j, mu * (state.k[j + 1] - state.k[j]) / (c2c(j) * h));
            }
            add(n + j, cc.cells[j].prod_k);
            add(n + j, -cond.constants.beta_star * state.k[j] * state.omega[j]);
        }

        // omega equation; sublayer cells carry the low-Re Dirichlet rows
        if (j < n_pin) {
            add(2 * n + j, state.omega[j]);
            add(2 * n + j, -omega_wall_value(cond.nu, mesh.wall_distance[j],
                                             cond.constants));
        } else {
            {
                const double mu = face_diffusivity(
                    cond.nu, cc.cells[j - 1].sigma_w * cc.cells[j - 1].nu_t,
                    cc.cells[j].sigma_w * cc.cells[j].nu_t);
                add(2 * n + j,
                    -mu * (state.omega[j] - state.omega[j - 1]) / (c2c(j - 1) * h));
            }
            if (j < n - 1) {
                const double mu = face_diffusivity(
                    cond.nu, cc.cells[j].sigma_w * cc.cells[j].nu_t,
                    cc.cells[j + 1].sigma_w * cc.cells[j + 1].nu_t);
                add(2 * n + j,
                    mu * (state.omega[j + 1] - state.omega[j]) / (c2c(j) * h));
            }
            add(2 * n + j, beta.beta[j] * cc.cells[j].prod_w_coeff);
            add(2 * n + j,
                -cc.cells[j].beta_w * state.omega[j] * state.omega[j]);
            add(2 * n + j, cc.cells[j].cross_diffusion);
        }
    }
}

FlowState ChannelOps::initial_state(const DiscreteCase& cs) {
    const Mesh& mesh = cs.mesh();
    const FlowConditions& cond = cs.conditions();
    const int n = mesh.n_cells();
    const double height = mesh.yface.back();

    FlowState state;
    state.nu = cond.nu;
    state.u.assign(n, 0.0);
    state.k.assign(n, 0.0);
    state.nu_t.assign(n, 0.0);

    if (cond.model == TurbulenceModel::Laminar) {
        state.omega.assign(n, cond.nu / (height * height));
        return state;
    }

    const double u_tau = std::sqrt(std::max(cond.body_force_x, 0.0) * height);
    const double kappa = 0.41;
    const double sqrt_bstar = std::sqrt(cond.constants.beta_star);
    state.omega.assign(n, 1.0);
    for (int j = 0; j < n; ++j) {
        const double y = mesh.cy[j];
        const double yplus = std::max(y * u_tau / cond.nu, 1e-12);
        state.u[j] = (yplus < 11.0) ? u_tau * yplus
                                    : u_tau * (std::log(yplus) / kappa + 5.1);
        state.k[j] = u_tau * u_tau / sqrt_bstar * std::min(1.0, yplus / 20.0);
        const double omega_vis = omega_wall_value(cond.nu, y, cond.constants);
        const double omega_log = u_tau / (sqrt_bstar * kappa * y);
        state.omega[j] = omega_vis + omega_log;
    }
    std::vector<double> gx, dudy;
    gradient(mesh, state.u, gx, dudy);
    update_eddy_viscosity_1d(state, dudy, mesh.wall_distance, cond.constants, cond.model);
    return state;
}

std::vector<double> ChannelOps::production_coeff(const DiscreteCase& cs,
                                                 const FlowState& state) {
    const ChannelCoeffs cc = evaluate_cells(cs, state);
    const int n = cs.n_cells();
    const int n_pin = omega_dirichlet_count(cs);
    std::vector<double> coeff(n, 0.0);
    // Dirichlet omega rows carry no beta_c dependence.
    for (int j = n_pin; j < n; ++j) coeff[j] = cc.cells[j].prod_w_coeff;
    return coeff;
}

RansSolution ChannelOps::solve(const DiscreteCase& cs, const CorrectionField& beta,
                               const FlowState* warm_start) {
    const Mesh& mesh = cs.mesh();
    const FlowConditions& cond = cs.conditions();
    const SolverSettings& set = cs.settings();
    const int n = mesh.n_cells();
    const bool turb = cond.model != TurbulenceModel::Laminar;

    FlowState state = warm_start ? *warm_start : cs.canonical_initial_state();
    state.nu = cond.nu;
    state.clip_events = 0;

    const double relax_u = turb ? set.relax_momentum : 1.0;
    const double relax_t = set.relax_turbulence;

    RansSolution out;
    out.info.equations = cs.equations();
    out.info.history.equations = cs.equations();

    const int n_pin = turb ? omega_dirichlet_count(cs) : 0;
    auto c2c = [&](int j) { return mesh.cy[j + 1] - mesh.cy[j]; };

    std::vector<double> lower(n), diag(n), upper(n), rhs(n), xsol(n);

    for (int iter = 1; iter <= set.max_iterations; ++iter) {
        const ChannelCoeffs cc = evaluate_cells(cs, state);

        // --- momentum ---
        for (int j = 0; j < n; ++j) {
            const double h = mesh.hy[j];
            double ap = 0.0, as = 0.0, an = 0.0;
            if (j == 0) {
                ap += cond.nu / (mesh.cy[0] * h);
            } else {
                const double mu = face_diffusivity(cond.nu, cc.cells[j - 1].nu_t,
                                                   cc.cells[j].nu_t);
                const double d = mu / (c2c(j - 1) * h);
                ap += d;
                as -= d;
            }
            if (j < n - 1) {
                const double mu = face_diffusivity(cond.nu, cc.cells[j].nu_t,
                                                   cc.cells[j + 1].nu_t);
                const double d = mu / (c2c(j) * h);
                ap += d;
                an -= d;
            }
            lower[j] = as;
            diag[j] = ap;
            upper[j] = an;
            rhs[j] = cond.body_force_x;
        }
        solve_tridiagonal(lower, diag, upper, rhs, xsol);
        for (int j = 0; j < n; ++j)
            state.u[j] += relax_u * (xsol[j] - state.u[j]);

        if (turb) {
            const ChannelCoeffs cu = evaluate_cells(cs, state);

            // --- k ---
            for (int j = 0; j < n; ++j) {
                const double h = mesh.hy[j];
                double ap = 0.0, as = 0.0, an = 0.0, b = 0.0;
                if (j == 0) {
                    ap += cond.nu / (mesh.cy[0] * h);
                } else {
                    const double mu = face_diffusivity(
                        cond.nu, cu.cells[j - 1].sigma_k * cu.cells[j - 1].nu_t,
                        cu.cells[j].sigma_k * cu.cells[j].nu_t);
                    const double d = mu / (c2c(j - 1) * h);
                    ap += d;
                    as -= d;
                }
                if (j < n - 1) {
                    const double mu = face_diffusivity(
                        cond.nu, cu.cells[j].sigma_k * cu.cells[j].nu_t,
                        cu.cells[j + 1].sigma_k * cu.cells[j + 1].nu_t);
                    const double d = mu / (c2c(j) * h);
                    ap += d;
                    an -= d;
                }
                ap += cond.constants.beta_star * std::max(state.omega[j], kOmegaFloor);
                b = cu.cells[j].prod_k;
                lower[j] = as;
                diag[j] = ap;
                upper[j] = an;
                rhs[j] = b;
            }
            solve_tridiagonal(lower, diag, upper, rhs, xsol);
            for (int j = 0; j < n; ++j) {
                double knew = state.k[j] + relax_t * (xsol[j] - state.k[j]);
                if (knew < 0.0) {
                    knew = 0.0;
                    ++state.clip_events;
                }
                state.k[j] = knew;
            }

            // --- omega ---
            for (int j = 0; j < n; ++j) {
                const double h = mesh.hy[j];
                if (j < n_pin) {
                    lower[j] = 0.0;
                    diag[j] = 1.0;
                    upper[j] = 0.0;
                    rhs[j] = omega_wall_value(cond.nu, mesh.wall_distance[j],
                                              cond.constants);
                    continue;
                }
                double ap = 0.0, as = 0.0, an = 0.0, b = 0.0;
                {
                    const double mu = face_diffusivity(
                        cond.nu, cu.cells[j - 1].sigma_w * cu.cells[j - 1].nu_t,
                        cu.cells[j].sigma_w * cu.cells[j].nu_t);
                    const double d = mu / (c2c(j - 1) * h);
                    ap += d;
                    as -= d;
                }
                if (j < n - 1) {
                    const double mu = face_diffusivity(
                        cond.nu, cu.cells[j].sigma_w * cu.cells[j].nu_t,
                        cu.cells[j + 1].sigma_w * cu.cells[j + 1].nu_t);
                    const double d = mu / (c2c(j) * h);
                    ap += d;
                    an -= d;
                }
                const double w_old = std::max(state.omega[j], kOmegaFloor);
                ap += cu.cells[j].beta_w * w_old;  // linearized destruction
                b = beta.beta[j] * cu.cells[j].prod_w_coeff;
                const double cd = cu.cells[j].cross_diffusion;
                if (cd >= 0.0) {
                    b += cd;
                } else {
                    ap += -cd / w_old;  // implicit sink for stability
                }
                lower[j] = as;
                diag[j] = ap;
                upper[j] = an;
                rhs[j] = b;
            }
            solve_tridiagonal(lower, diag, upper, rhs, xsol);
            for (int j = 0; j < n; ++j) {
                double wnew = (j < n_pin)
                                  ? xsol[j]
                                  : state.omega[j] +
                                        relax_t * (xsol[j] - state.omega[j]);
                if (wnew <= 0.0) {
                    wnew = kOmegaFloor;
                    ++state.clip_events;
                }
                state.omega[j] = wnew;
            }

            std::vector<double> gx, dudy;
            gradient(mesh, state.u, gx, dudy);
            update_eddy_viscosity_1d(state, dudy, mesh.wall_distance,
                                     cond.constants, cond.model);
        }

        // --- convergence on the pure residual ---
        const std::vector<double> norms = cs.residual_norms(state, beta);
        bool nan = false, done = true, diverged = false;
        for (double v : norms) {
            if (!std::isfinite(v)) nan = true;
            if (v > set.tolerance) done = false;
            if (v > set.divergence_factor) diverged = true;
        }
        if (iter % set.history_stride == 0 || done || nan || diverged)
            out.info.history.norms.push_back(norms);
        out.info.iterations = iter;
        out.info.final_residuals = norms;

        if (nan)
            throw SolverError(SolverError::Kind::NumericalFailure,
                              "channel solve produced non-finite residuals",
                              out.info.history, state);
        if (diverged)
            throw SolverError(SolverError::Kind::NonConvergence,
                              "channel solve diverged (residual growth)",
                              out.info.history, state);
        if (done) {
            out.info.converged = true;
            break;
        }
    }

    if (!out.info.converged)
        throw SolverError(SolverError::Kind::NonConvergence,
                          "channel solve did not reach tolerance within max iterations",
                          out.info.history, state);

    out.info.clip_events = state.clip_events;
    out.state = std::move(state);
    return out;
}

}  // namespace detail
}  // namespace fiml
