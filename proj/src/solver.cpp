#include "fiml/solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace fiml {

namespace {

std::vector<std::string> equation_set(const Mesh& mesh, const FlowConditions& cond) {
    const bool turb = cond.model != TurbulenceModel::Laminar;
    if (mesh.dim == 1) {
        if (!turb) return {"u"};
        return {"u", "k", "omega"};
    }
    if (!turb) return {"u", "v", "p"};
    return {"u", "v", "p", "k", "omega"};
}

}  // namespace

DiscreteCase::DiscreteCase(Mesh mesh, FlowConditions conditions, SolverSettings settings)
    : mesh_(std::move(mesh)),
      conditions_(conditions),
      settings_(settings),
      equations_(equation_set(mesh_, conditions_)) {
    if (!(std::isfinite(conditions_.nu) && conditions_.nu > 0.0))
        throw std::invalid_argument("DiscreteCase: nu must be finite and > 0");
    if (mesh_.dim == 2 && conditions_.model != TurbulenceModel::Laminar) {
        if (conditions_.inlet_k < 0.0 || conditions_.inlet_omega <= 0.0)
            throw std::invalid_argument(
                "DiscreteCase: 2D turbulent cases require inlet_k >= 0 and inlet_omega > 0");
    }
}

Eigen::VectorXd DiscreteCase::pack(const FlowState& state) const {
    const int n = n_cells();
    Eigen::VectorXd w(n * n_eq());
    for (int e = 0; e < n_eq(); ++e) {
        const std::string& name = equations_[e];
        const std::vector<double>* src = nullptr;
        if (name == "u") src = &state.u;
        else if (name == "v") src = &state.v;
        else if (name == "p") src = &state.p;
        else if (name == "k") src = &state.k;
        else src = &state.omega;
        if (static_cast<int>(src->size()) != n)
            throw std::invalid_argument("pack: field '" + name + "' has wrong size");
        for (int c = 0; c < n; ++c) w[e * n + c] = (*src)[c];
    }
    return w;
}

FlowState DiscreteCase::unpack(const Eigen::VectorXd& w) const {
    const int n = n_cells();
    FlowState state;
    state.nu = conditions_.nu;
    state.u.assign(n, 0.0);
    if (mesh_.dim == 2) {
        state.v.assign(n, 0.0);
        state.p.assign(n, 0.0);
    }
    const bool turb = conditions_.model != TurbulenceModel::Laminar;
    if (turb) {
        state.k.assign(n, 0.0);
        state.omega.assign(n, 0.0);
    } else {
        state.k.assign(n, 0.0);
        // Positive viscous-scale fill so feature formulas stay total.
        double href = (mesh_.dim == 1) ? mesh_.yface.back() : std::max(mesh_.dx, mesh_.dy);
        state.omega.assign(n, conditions_.nu / (href * href));
    }
    state.nu_t.assign(n, 0.0);

    for (int e = 0; e < n_eq(); ++e) {
        const std::string& name = equations_[e];
        std::vector<double>* dst = nullptr;
        if (name == "u") dst = &state.u;
        else if (name == "v") dst = &state.v;
        else if (name == "p") dst = &state.p;
        else if (name == "k") dst = &state.k;
        else dst = &state.omega;
        for (int c = 0; c < n; ++c) (*dst)[c] = w[e * n + c];
    }
    return state;
}

Eigen::VectorXd DiscreteCase::residual_packed(const Eigen::VectorXd& w,
                                              const CorrectionField& beta) const {
    Eigen::VectorXd r;
    Eigen::VectorXd scale;
    residual_and_scale(w, beta, r, scale);
    return r;
}

void DiscreteCase::residual_and_scale(const Eigen::VectorXd& w,
                                      const CorrectionField& beta, Eigen::VectorXd& r,
                                      Eigen::VectorXd& scale) const {
    if (w.size() != static_cast<long>(n_cells()) * n_eq())
        throw std::invalid_argument("residual: state vector has wrong size");
    if (beta.n_cells() != n_cells())
        throw std::invalid_argument("residual: correction field has wrong size");
    if (mesh_.dim == 1)
        detail::ChannelOps::residual(*this, w, beta, r, &scale);
    else
        detail::Simple2dOps::residual(*this, w, beta, r, &scale);
}

Eigen::MatrixXd DiscreteCase::residual_matrix(const FlowState& state,
                                              const CorrectionField& beta) const {
    const Eigen::VectorXd r = residual_packed(pack(state), beta);
    Eigen::MatrixXd out(n_cells(), n_eq());
    for (int e = 0; e < n_eq(); ++e)
        for (int c = 0; c < n_cells(); ++c) out(c, e) = r[e * n_cells() + c];
    return out;
}

std::vector<double> DiscreteCase::residual_norms(const FlowState& state,
                                                 const CorrectionField& beta) const {
    Eigen::VectorXd r, scale;
    residual_and_scale(pack(state), beta, r, scale);
    const int n = n_cells();
    std::vector<double> norms(n_eq(), 0.0);
    for (int e = 0; e < n_eq(); ++e) {
        double worst = 0.0;
        for (int c = 0; c < n; ++c) {
            const double s = scale[e * n + c];
            const double res = std::abs(r[e * n + c]);
            if (s > 0.0)
                worst = std::max(worst, res / s);
            else if (res > 0.0)
                worst = std::max(worst, 1.0);
        }
        norms[e] = worst;
    }
    return norms;
}

FlowState DiscreteCase::canonical_initial_state() const {
    if (mesh_.dim == 1) return detail::ChannelOps::initial_state(*this);
    return detail::Simple2dOps::initial_state(*this);
}

RansSolution DiscreteCase::solve(const CorrectionField& beta,
                                 const FlowState* warm_start) const {
    if (beta.n_cells() != n_cells())
        throw std::invalid_argument("solve: correction field has wrong size");
    for (double b : beta.beta)
        if (!std::isfinite(b) || b <= 0.0)
            throw std::invalid_argument("solve: beta_c must be finite and > 0");
    if (mesh_.dim == 1) return detail::ChannelOps::solve(*this, beta, warm_start);
    return detail::Simple2dOps::solve(*this, beta, warm_start);
}

std::vector<double> DiscreteCase::omega_production_coefficient(const FlowState& state) const {
    if (conditions_.model == TurbulenceModel::Laminar)
        return std::vector<double>(n_cells(), 0.0);
    if (mesh_.dim == 1) return detail::ChannelOps::production_coeff(*this, state);
    return detail::Simple2dOps::production_coeff(*this, state);
}

std::vector<double> DiscreteCase::omega_production(const FlowState& state,
                                                   const CorrectionField& beta) const {
    std::vector<double> coeff = omega_production_coefficient(state);
    for (int c = 0; c < n_cells(); ++c) coeff[c] *= beta.beta[c];
    return coeff;
}

RansSolution solve_rans(const Mesh& mesh, const FlowConditions& conditions,
                        const CorrectionField& beta, const SolverSettings& settings) {
    DiscreteCase cs(mesh, conditions, settings);
    return cs.solve(beta);
}

Eigen::MatrixXd residual(const FlowState& state, const CorrectionField& beta,
                         const Mesh& mesh, const FlowConditions& conditions,
                         const SolverSettings& settings) {
    DiscreteCase cs(mesh, conditions, settings);
    return cs.residual_matrix(state, beta);
}

}  // namespace fiml
