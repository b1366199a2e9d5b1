#include <Eigen/Sparse>
#include <algorithm>
#include <cmath>

#include "fiml/solver.hpp"

namespace fiml {
namespace detail {

namespace {

constexpr double kOmegaFloor = 1e-30;

/// Precomputed per-iteration quantities shared by the residual operator and
/// the SIMPLE assembly. Everything here is a pure function of (state, mesh,
/// conditions), which keeps the converged state consistent with residual().
struct Fields2d {
    std::vector<double> dudx, dudy, dvdx, dvdy;
    std::vector<double> dpdx, dpdy;
    std::vector<double> dkdx, dkdy, dwdx, dwdy;
    std::vector<TurbulenceCellCoeffs> closure;
    std::vector<double> d_cell;  // fixed momentum-interpolation coefficient
    std::vector<std::uint8_t> omega_dirichlet;
};

enum class FieldKind { U, V, P, K, Omega };

double boundary_face_value(const DiscreteCase& cs, const std::vector<double>& f,
                           int c, BoundaryTag tag, FieldKind kind) {
    const FlowConditions& cond = cs.conditions();
    switch (tag) {
        case BoundaryTag::Wall:
            if (kind == FieldKind::U || kind == FieldKind::V) return 0.0;
            if (kind == FieldKind::K) return 0.0;
            return f[c];  // p, omega: zero-gradient closure
        case BoundaryTag::Inlet:
            if (kind == FieldKind::U) return cond.inlet_u;
            if (kind == FieldKind::V) return 0.0;
            if (kind == FieldKind::K) return std::max(cond.inlet_k, 0.0);
            if (kind == FieldKind::Omega) return std::max(cond.inlet_omega, kOmegaFloor);
            return f[c];
        case BoundaryTag::Outlet:
            if (kind == FieldKind::P) return 0.0;  // pressure reference
            return f[c];
        default:
            return f[c];
    }
}

void gradient_bc(const DiscreteCase& cs, const std::vector<double>& f, FieldKind kind,
                 std::vector<double>& gx, std::vector<double>& gy) {
    const Mesh& mesh = cs.mesh();
    const int n = mesh.n_cells();
    gx.assign(n, 0.0);
    gy.assign(n, 0.0);
    for (int c = 0; c < n; ++c) {
        if (!mesh.is_active(c)) continue;
        double sx = 0.0, sy = 0.0;
        for (int side = 0; side < Mesh::kSides; ++side) {
            const int nb = mesh.neighbor(c, side);
            double fv;
            if (nb >= 0) {
                fv = 0.5 * (f[c] + f[nb]);
            } else {
                fv = boundary_face_value(cs, f, c, mesh.boundary_tag(c, side), kind);
            }
            const double area = mesh.face_area(side);
            switch (side) {
                case 0: sx -= area * fv; break;
                case 1: sx += area * fv; break;
                case 2: sy -= area * fv; break;
                case 3: sy += area * fv; break;
            }
        }
        gx[c] = sx / mesh.vol[c];
        gy[c] = sy / mesh.vol[c];
    }
}

Fields2d evaluate_fields(const DiscreteCase& cs, const FlowState& s) {
    const Mesh& mesh = cs.mesh();
    const FlowConditions& cond = cs.conditions();
    const int n = mesh.n_cells();
    const bool turb = cond.model != TurbulenceModel::Laminar;

    Fields2d f;
    gradient_bc(cs, s.u, FieldKind::U, f.dudx, f.dudy);
    gradient_bc(cs, s.v, FieldKind::V, f.dvdx, f.dvdy);
    gradient_bc(cs, s.p, FieldKind::P, f.dpdx, f.dpdy);
    if (turb) {
        gradient_bc(cs, s.k, FieldKind::K, f.dkdx, f.dkdy);
        gradient_bc(cs, s.omega, FieldKind::Omega, f.dwdx, f.dwdy);
    } else {
        f.dkdx.assign(n, 0.0);
        f.dkdy.assign(n, 0.0);
        f.dwdx.assign(n, 0.0);
        f.dwdy.assign(n, 0.0);
    }

    f.closure.resize(n);
    f.omega_dirichlet.assign(n, 0);
    for (int c = 0; c < n; ++c) {
        if (!mesh.is_active(c)) continue;
        TurbulenceCellInputs in;
        in.k = turb ? s.k[c] : 0.0;
        in.omega = turb ? s.omega[c] : 1.0;
        const double sq = 2.0 * (f.dudx[c] * f.dudx[c] + f.dvdy[c] * f.dvdy[c]) +
                          (f.dudy[c] + f.dvdx[c]) * (f.dudy[c] + f.dvdx[c]);
        in.strain_mag = std::sqrt(std::max(sq, 0.0));
        in.wall_distance = mesh.wall_distance[c];
        in.nu = cond.nu;
        in.dkdx = f.dkdx[c];
        in.dkdy = f.dkdy[c];
        in.dwdx = f.dwdx[c];
        in.dwdy = f.dwdy[c];
        f.closure[c] = evaluate_closure(in, cond.constants, cond.model);

        if (turb) {
            for (int side = 0; side < Mesh::kSides; ++side) {
                if (mesh.neighbor(c, side) < 0 &&
                    mesh.boundary_tag(c, side) == BoundaryTag::Wall) {
                    f.omega_dirichlet[c] = 1;
                    break;
                }
            }
        }
    }

    // Fixed interpolation coefficient: geometry + config only, so the
    // residual stencil stays compact and the converged state does not
    // depend on relaxation factors.
    f.d_cell.assign(n, 0.0);
    const double u_ref = std::max(std::abs(cond.inlet_u), 1e-12);
    for (int c = 0; c < n; ++c) {
        if (!mesh.is_active(c)) continue;
        double a = 0.0;
        for (int side = 0; side < Mesh::kSides; ++side) {
            const double area = mesh.face_area(side);
            const double delta = (side < 2) ? mesh.dx : mesh.dy;
            a += area * (cond.nu / delta + 0.5 * u_ref);
        }
        f.d_cell[c] = mesh.vol[c] / a;
    }
    return f;
}

/// Outward mass flux (unit depth) through `side` of active cell c.
double outward_mass_flux(const DiscreteCase& cs, const Fields2d& f, const FlowState& s,
                         int c, int side) {
    const Mesh& mesh = cs.mesh();
    const int nb = mesh.neighbor(c, side);
    const double area = mesh.face_area(side);

    if (nb < 0) {
        const BoundaryTag tag = mesh.boundary_tag(c, side);
        if (tag == BoundaryTag::Inlet) {
            // inlet velocity is (inlet_u, 0)
            switch (side) {
                case 0: return -area * cs.conditions().inlet_u;
                case 1: return area * cs.conditions().inlet_u;
                default: return 0.0;
            }
        }
        if (tag == BoundaryTag::Outlet) {
            switch (side) {
                case 0: return -area * s.u[c];
                case 1: return area * s.u[c];
                case 2: return -area * s.v[c];
                default: return area * s.v[c];
            }
        }
        return 0.0;  // wall / symmetry
    }

    // Canonical east/north orientation keeps the flux antisymmetric.
    int p = c, q = nb, sgn = 1;
    if (side == 0 || side == 2) {
        std::swap(p, q);
        sgn = -1;
    }
    const bool xface = (side < 2);
    const double delta = xface ? mesh.dx : mesh.dy;
    const double df = 0.5 * (f.d_cell[p] + f.d_cell[q]);
    double vbar, dpdn_face, dpdn_avg;
    if (xface) {
        vbar = 0.5 * (s.u[p] + s.u[q]);
        dpdn_face = (s.p[q] - s.p[p]) / delta;
        dpdn_avg = 0.5 * (f.dpdx[p] + f.dpdx[q]);
    } else {
        vbar = 0.5 * (s.v[p] + s.v[q]);
        dpdn_face = (s.p[q] - s.p[p]) / delta;
        dpdn_avg = 0.5 * (f.dpdy[p] + f.dpdy[q]);
    }
    const double flux = area * (vbar - df * (dpdn_face - dpdn_avg));
    return sgn * flux;
}

struct FaceOffsets {
    double ox, oy;
};

FaceOffsets face_offset_from(const Mesh& mesh, int side) {
    switch (side) {
        case 0: return {-0.5 * mesh.dx, 0.0};
        case 1: return {0.5 * mesh.dx, 0.0};
        case 2: return {0.0, -0.5 * mesh.dy};
        default: return {0.0, 0.5 * mesh.dy};
    }
}

/// Second-order-upwind face value; falls back to first order when requested.
double convected_face_value(const DiscreteCase& cs, const Mesh& mesh,
                            const std::vector<double>& phi,
                            const std::vector<double>& gx,
                            const std::vector<double>& gy, FieldKind kind, int c,
                            int side, double m) {
    const int nb = mesh.neighbor(c, side);
    if (nb < 0) {
        const BoundaryTag tag = mesh.boundary_tag(c, side);
        return boundary_face_value(cs, phi, c, tag, kind);
    }
    const int up = (m >= 0.0) ? c : nb;
    double val = phi[up];
    if (!cs.settings().first_order_convection) {
        FaceOffsets off = face_offset_from(mesh, side);
        if (up == nb) {
            // face offset seen from the neighbor
            const int opposite = (side == 0) ? 1 : (side == 1) ? 0 : (side == 2) ? 3 : 2;
            off = face_offset_from(mesh, opposite);
        }
        val += gx[up] * off.ox + gy[up] * off.oy;
    }
    return val;
}

double face_diffusivity_2d(const DiscreteCase& cs, const Fields2d& f, int c, int side,
                           FieldKind kind) {
    const Mesh& mesh = cs.mesh();
    const double nu = cs.conditions().nu;
    auto eff = [&](int cell) {
        const double nut = f.closure[cell].nu_t;
        switch (kind) {
            case FieldKind::K: return f.closure[cell].sigma_k * nut;
            case FieldKind::Omega: return f.closure[cell].sigma_w * nut;
            default: return nut;
        }
    };
    const int nb = mesh.neighbor(c, side);
    if (nb < 0) {
        const BoundaryTag tag = mesh.boundary_tag(c, side);
        if (tag == BoundaryTag::Wall) return nu;  // nu_t vanishes at walls
        return nu + eff(c);
    }
    return nu + 0.5 * (eff(c) + eff(nb));
}

}  // namespace

void Simple2dOps::residual(const DiscreteCase& cs, const Eigen::VectorXd& w,
                           const CorrectionField& beta, Eigen::VectorXd& r,
                           Eigen::VectorXd* scale) {
    const Mesh& mesh = cs.mesh();
    const FlowConditions& cond = cs.conditions();
    const int n = mesh.n_cells();
    const bool turb = cond.model != TurbulenceModel::Laminar;
    const int n_eq = cs.n_eq();

    FlowState s = cs.unpack(w);
    const Fields2d f = evaluate_fields(cs, s);

    r = Eigen::VectorXd::Zero(w.size());
    if (scale) *scale = Eigen::VectorXd::Zero(w.size());
    auto add = [&](int eq, int c, double term) {
        r[eq * n + c] += term;
        if (scale) (*scale)[eq * n + c] += std::abs(term);
    };

    for (int c = 0; c < n; ++c) {
        if (!mesh.is_active(c)) {
            for (int e = 0; e < n_eq; ++e) {
                add(e, c, w[e * n + c]);
                if (scale) (*scale)[e * n + c] += 1.0;  // pinned rows
            }
            continue;
        }
        const double vol = mesh.vol[c];

        for (int side = 0; side < Mesh::kSides; ++side) {
            const double m = outward_mass_flux(cs, f, s, c, side);
            add(2, c, -m / vol);  // continuity
            const int nb = mesh.neighbor(c, side);
            const double area = mesh.face_area(side);
            const double delta = (nb >= 0) ? mesh.center_to_center(c, side)
                                           : mesh.center_to_face(c, side);
            const bool outlet =
                nb < 0 && mesh.boundary_tag(c, side) == BoundaryTag::Outlet;

            // u momentum
            {
                const double mu = face_diffusivity_2d(cs, f, c, side, FieldKind::U);
                if (!outlet) {
                    const double ub =
                        (nb >= 0) ? s.u[nb]
                                  : boundary_face_value(cs, s.u, c,
                                                        mesh.boundary_tag(c, side),
                                                        FieldKind::U);
                    add(0, c, mu * area * (ub - s.u[c]) / (delta * vol));
                }
                add(0, c,
                    -m / vol * convected_face_value(cs, mesh, s.u, f.dudx, f.dudy,
                                                    FieldKind::U, c, side, m));
            }
            // v momentum
            {
                const double mu = face_diffusivity_2d(cs, f, c, side, FieldKind::V);
                if (!outlet) {
                    const double vb =
                        (nb >= 0) ? s.v[nb]
                                  : boundary_face_value(cs, s.v, c,
                                                        mesh.boundary_tag(c, side),
                                                        FieldKind::V);
                    add(1, c, mu * area * (vb - s.v[c]) / (delta * vol));
                }
                add(1, c,
                    -m / vol * convected_face_value(cs, mesh, s.v, f.dvdx, f.dvdy,
                                                    FieldKind::V, c, side, m));
            }
            if (turb) {
                const double mu_k = face_diffusivity_2d(cs, f, c, side, FieldKind::K);
                if (!outlet) {
                    const double kb =
                        (nb >= 0) ? s.k[nb]
                                  : boundary_face_value(cs, s.k, c,
                                                        mesh.boundary_tag(c, side),
                                                        FieldKind::K);
                    add(3, c, mu_k * area * (kb - s.k[c]) / (delta * vol));
                }
                add(3, c,
                    -m / vol * convected_face_value(cs, mesh, s.k, f.dkdx, f.dkdy,
                                                    FieldKind::K, c, side, m));

                if (!f.omega_dirichlet[c]) {
                    const double mu_w =
                        face_diffusivity_2d(cs, f, c, side, FieldKind::Omega);
                    const bool wall =
                        nb < 0 && mesh.boundary_tag(c, side) == BoundaryTag::Wall;
                    if (!outlet && !wall) {
                        const double wb =
                            (nb >= 0) ? s.omega[nb]
                                      : boundary_face_value(
                                            cs, s.omega, c,
                                            mesh.boundary_tag(c, side),
                                            FieldKind::Omega);
                        add(4, c, mu_w * area * (wb - s.omega[c]) / (delta * vol));
                    }
                    add(4, c,
                        -m / vol * convected_face_value(cs, mesh, s.omega, f.dwdx,
                                                        f.dwdy, FieldKind::Omega, c,
                                                        side, m));
                }
            }
        }

        add(0, c, -f.dpdx[c]);
        add(0, c, cond.body_force_x);
        add(1, c, -f.dpdy[c]);

        if (turb) {
            add(3, c, f.closure[c].prod_k);
            add(3, c, -cond.constants.beta_star * s.k[c] * s.omega[c]);
            if (f.omega_dirichlet[c]) {
                add(4, c, s.omega[c]);
                add(4, c, -omega_wall_value(cond.nu, mesh.wall_distance[c],
                                            cond.constants));
            } else {
                add(4, c, beta.beta[c] * f.closure[c].prod_w_coeff);
                add(4, c, -f.closure[c].beta_w * s.omega[c] * s.omega[c]);
                add(4, c, f.closure[c].cross_diffusion);
            }
        }
    }
}

FlowState Simple2dOps::initial_state(const DiscreteCase& cs) {
    const Mesh& mesh = cs.mesh();
    const FlowConditions& cond = cs.conditions();
    const int n = mesh.n_cells();
    const bool turb = cond.model != TurbulenceModel::Laminar;

    FlowState s;
    s.nu = cond.nu;
    s.u.assign(n, 0.0);
    s.v.assign(n, 0.0);
    s.p.assign(n, 0.0);
    s.k.assign(n, 0.0);
    s.nu_t.assign(n, 0.0);
    if (turb) {
        s.omega.assign(n, std::max(cond.inlet_omega, kOmegaFloor));
    } else {
        const double href = std::max(mesh.dx, mesh.dy);
        s.omega.assign(n, cond.nu / (href * href));
    }
    for (int c = 0; c < n; ++c) {
        if (!mesh.is_active(c)) {
            s.omega[c] = 0.0;
            continue;
        }
        s.u[c] = cond.inlet_u;
        if (turb) s.k[c] = std::max(cond.inlet_k, 0.0);
    }
    if (turb) {
        for (int c = 0; c < n; ++c)
            if (mesh.is_active(c))
                s.nu_t[c] = s.k[c] / std::max(s.omega[c], kOmegaFloor);
    }
    return s;
}

std::vector<double> Simple2dOps::production_coeff(const DiscreteCase& cs,
                                                  const FlowState& state) {
    const Fields2d f = evaluate_fields(cs, state);
    const int n = cs.n_cells();
    std::vector<double> coeff(n, 0.0);
    for (int c = 0; c < n; ++c) {
        if (!cs.mesh().is_active(c) || f.omega_dirichlet[c]) continue;
        coeff[c] = f.closure[c].prod_w_coeff;
    }
    return coeff;
}

RansSolution Simple2dOps::solve(const DiscreteCase& cs, const CorrectionField& beta,
                                const FlowState* warm_start) {
    const Mesh& mesh = cs.mesh();
    const FlowConditions& cond = cs.conditions();
    const SolverSettings& set = cs.settings();
    const int n = mesh.n_cells();
    const bool turb = cond.model != TurbulenceModel::Laminar;

    FlowState s = warm_start ? *warm_start : cs.canonical_initial_state();
    s.nu = cond.nu;
    s.clip_events = 0;

    RansSolution out;
    out.info.equations = cs.equations();
    out.info.history.equations = cs.equations();

    using Trip = Eigen::Triplet<double>;
    Eigen::SparseMatrix<double> A(n, n);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;

    auto solve_system = [&](const std::vector<Trip>& trips, const Eigen::VectorXd& b,
                            Eigen::VectorXd& x) {
        A.setZero();
        A.setFromTriplets(trips.begin(), trips.end());
        lu.compute(A);
        if (lu.info() != Eigen::Success)
            throw SolverError(SolverError::Kind::NumericalFailure,
                              "2D solve: sparse factorization failed", out.info.history);
        x = lu.solve(b);
    };

    for (int iter = 1; iter <= set.max_iterations; ++iter) {
        Fields2d f = evaluate_fields(cs, s);

        // --- momentum (shared matrix, separate rhs for u and v) ---
        std::vector<Trip> trips;
        Eigen::VectorXd bu = Eigen::VectorXd::Zero(n);
        Eigen::VectorXd bv = Eigen::VectorXd::Zero(n);
        const double alpha_u = set.relax_momentum;

        for (int c = 0; c < n; ++c) {
            if (!mesh.is_active(c)) {
                trips.emplace_back(c, c, 1.0);
                continue;
            }
            double ap = 0.0;
            double rhs_u = 0.0, rhs_v = 0.0;
            for (int side = 0; side < Mesh::kSides; ++side) {
                const double m = outward_mass_flux(cs, f, s, c, side);
                const int nb = mesh.neighbor(c, side);
                const double area = mesh.face_area(side);
                const double delta = (nb >= 0) ? mesh.center_to_center(c, side)
                                               : mesh.center_to_face(c, side);
                const double mu = face_diffusivity_2d(cs, f, c, side, FieldKind::U);
                const double diff = mu * area / delta;

                if (nb >= 0) {
                    ap += diff + std::max(m, 0.0);
                    trips.emplace_back(c, nb, std::min(m, 0.0) - diff);
                    // deferred second-order correction
                    const double uf = convected_face_value(cs, mesh, s.u, f.dudx,
                                                           f.dudy, FieldKind::U, c,
                                                           side, m);
                    const double vf = convected_face_value(cs, mesh, s.v, f.dvdx,
                                                           f.dvdy, FieldKind::V, c,
                                                           side, m);
                    const double uf_fou = (m >= 0.0) ? s.u[c] : s.u[nb];
                    const double vf_fou = (m >= 0.0) ? s.v[c] : s.v[nb];
                    rhs_u -= m * (uf - uf_fou);
                    rhs_v -= m * (vf - vf_fou);
                } else {
                    const BoundaryTag tag = mesh.boundary_tag(c, side);
                    if (tag == BoundaryTag::Outlet) {
                        ap += std::max(m, 0.0);  // zero-gradient convection
                    } else {
                        const double ub =
                            boundary_face_value(cs, s.u, c, tag, FieldKind::U);
                        const double vb =
                            boundary_face_value(cs, s.v, c, tag, FieldKind::V);
                        ap += diff;
                        rhs_u += diff * ub - m * ub;
                        rhs_v += diff * vb - m * vb;
                    }
                }
            }
            const double vol = mesh.vol[c];
            rhs_u += -vol * f.dpdx[c] + vol * cond.body_force_x;
            rhs_v += -vol * f.dpdy[c];

            // implicit under-relaxation
            trips.emplace_back(c, c, ap / alpha_u);
            bu[c] = rhs_u + (1.0 - alpha_u) / alpha_u * ap * s.u[c];
            bv[c] = rhs_v + (1.0 - alpha_u) / alpha_u * ap * s.v[c];
        }

        Eigen::VectorXd ustar, vstar;
        solve_system(trips, bu, ustar);
        vstar = lu.solve(bv);
        for (int c = 0; c < n; ++c) {
            if (!mesh.is_active(c)) continue;
            s.u[c] = ustar[c];
            s.v[c] = vstar[c];
        }

        // --- pressure correction ---
        f = evaluate_fields(cs, s);
        trips.clear();
        Eigen::VectorXd bp = Eigen::VectorXd::Zero(n);
        for (int c = 0; c < n; ++c) {
            if (!mesh.is_active(c)) {
                trips.emplace_back(c, c, 1.0);
                continue;
            }
            double ap = 0.0, mass = 0.0;
            for (int side = 0; side < Mesh::kSides; ++side) {
                const double m = outward_mass_flux(cs, f, s, c, side);
                mass += m;
                const int nb = mesh.neighbor(c, side);
                const double area = mesh.face_area(side);
                if (nb >= 0) {
                    const double delta = mesh.center_to_center(c, side);
                    const double coeff =
                        area * 0.5 * (f.d_cell[c] + f.d_cell[nb]) / delta;
                    ap += coeff;
                    trips.emplace_back(c, nb, -coeff);
                } else if (mesh.boundary_tag(c, side) == BoundaryTag::Outlet) {
                    const double delta = mesh.center_to_face(c, side);
                    ap += area * f.d_cell[c] / delta;  // p' = 0 at outlet
                }
            }
            if (ap == 0.0) ap = 1.0;
            trips.emplace_back(c, c, ap);
            bp[c] = -mass;
        }
        Eigen::VectorXd pprime;
        solve_system(trips, bp, pprime);

        std::vector<double> pp(n, 0.0);
        for (int c = 0; c < n; ++c) pp[c] = mesh.is_active(c) ? pprime[c] : 0.0;
        std::vector<double> gppx, gppy;
        gradient_bc(cs, pp, FieldKind::P, gppx, gppy);
        for (int c = 0; c < n; ++c) {
            if (!mesh.is_active(c)) continue;
            s.p[c] += set.relax_pressure * pp[c];
            s.u[c] -= f.d_cell[c] * gppx[c];
            s.v[c] -= f.d_cell[c] * gppy[c];
        }

        // --- turbulence transport ---
        if (turb) {
            f = evaluate_fields(cs, s);
            const double alpha_t = set.relax_turbulence;

            for (FieldKind kind : {FieldKind::K, FieldKind::Omega}) {
                trips.clear();
                Eigen::VectorXd bt = Eigen::VectorXd::Zero(n);
                std::vector<double>& phi = (kind == FieldKind::K) ? s.k : s.omega;
                const std::vector<double>& gx =
                    (kind == FieldKind::K) ? f.dkdx : f.dwdx;
                const std::vector<double>& gy =
                    (kind == FieldKind::K) ? f.dkdy : f.dwdy;

                for (int c = 0; c < n; ++c) {
                    if (!mesh.is_active(c)) {
                        trips.emplace_back(c, c, 1.0);
                        continue;
                    }
                    if (kind == FieldKind::Omega && f.omega_dirichlet[c]) {
                        trips.emplace_back(c, c, 1.0);
                        bt[c] = omega_wall_value(cond.nu, mesh.wall_distance[c],
                                                 cond.constants);
                        continue;
                    }
                    double ap = 0.0, rhs = 0.0;
                    for (int side = 0; side < Mesh::kSides; ++side) {
                        const double m = outward_mass_flux(cs, f, s, c, side);
                        const int nb = mesh.neighbor(c, side);
                        const double area = mesh.face_area(side);
                        const double delta = (nb >= 0)
                                                 ? mesh.center_to_center(c, side)
                                                 : mesh.center_to_face(c, side);
                        const double mu = face_diffusivity_2d(cs, f, c, side, kind);
                        const double diff = mu * area / delta;
                        if (nb >= 0) {
                            ap += diff + std::max(m, 0.0);
                            trips.emplace_back(c, nb, std::min(m, 0.0) - diff);
                            const double pf = convected_face_value(
                                cs, mesh, phi, gx, gy, kind, c, side, m);
                            const double pf_fou = (m >= 0.0) ? phi[c] : phi[nb];
                            rhs -= m * (pf - pf_fou);
                        } else {
                            const BoundaryTag tag = mesh.boundary_tag(c, side);
                            const bool wall_omega =
                                (kind == FieldKind::Omega && tag == BoundaryTag::Wall);
                            if (tag == BoundaryTag::Outlet || wall_omega) {
                                ap += std::max(m, 0.0);
                            } else {
                                const double pb =
                                    boundary_face_value(cs, phi, c, tag, kind);
                                ap += diff;
                                rhs += diff * pb - m * pb;
                            }
                        }
                    }
                    const double vol = mesh.vol[c];
                    if (kind == FieldKind::K) {
                        ap += vol * cond.constants.beta_star *
                              std::max(s.omega[c], kOmegaFloor);
                        rhs += vol * f.closure[c].prod_k;
                    } else {
                        const double w_old = std::max(s.omega[c], kOmegaFloor);
                        ap += vol * f.closure[c].beta_w * w_old;
                        rhs += vol * beta.beta[c] * f.closure[c].prod_w_coeff;
                        const double cd = f.closure[c].cross_diffusion;
                        if (cd >= 0.0)
                            rhs += vol * cd;
                        else
                            ap += vol * (-cd) / w_old;
                    }
                    trips.emplace_back(c, c, ap / alpha_t);
                    bt[c] = rhs + (1.0 - alpha_t) / alpha_t * ap * phi[c];
                }
                Eigen::VectorXd sol;
                solve_system(trips, bt, sol);
                for (int c = 0; c < n; ++c) {
                    if (!mesh.is_active(c)) continue;
                    if (kind == FieldKind::Omega && f.omega_dirichlet[c]) {
                        s.omega[c] = sol[c];
                        continue;
                    }
                    double v = sol[c];
                    if (kind == FieldKind::K) {
                        if (v < 0.0) {
                            v = 0.0;
                            ++s.clip_events;
                        }
                        s.k[c] = v;
                    } else {
                        if (v <= 0.0) {
                            v = kOmegaFloor;
                            ++s.clip_events;
                        }
                        s.omega[c] = v;
                    }
                }
            }
            Fields2d fn = evaluate_fields(cs, s);
            for (int c = 0; c < n; ++c)
                s.nu_t[c] = mesh.is_active(c) ? fn.closure[c].nu_t : 0.0;
        }

        // --- convergence on the pure residual ---
        const std::vector<double> norms = cs.residual_norms(s, beta);
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
                              "2D solve produced non-finite residuals",
                              out.info.history, s);
        if (diverged)
            throw SolverError(SolverError::Kind::NonConvergence,
                              "2D solve diverged (residual growth)",
                              out.info.history, s);
        if (done) {
            out.info.converged = true;
            break;
        }
    }

    if (!out.info.converged)
        throw SolverError(SolverError::Kind::NonConvergence,
                          "2D solve did not reach tolerance within max iterations",
                          out.info.history, s);

    out.info.clip_events = s.clip_events;
    out.state = std::move(s);
    return out;
}

}  // namespace detail
}  // namespace fiml
