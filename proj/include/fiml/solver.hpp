#pragma once

#include <Eigen/Dense>
#include <memory>
#include <string>
#include <vector>

#include "fiml/errors.hpp"
#include "fiml/fields.hpp"
#include "fiml/mesh.hpp"
#include "fiml/turbulence.hpp"

namespace fiml {

/// Physical setup of a case. 1D channels are driven by the constant body
/// force; 2D cases are driven by the inlet. Inlet turbulence quantities have
/// no defaults: 2D turbulent cases must set them explicitly.
struct FlowConditions {
    double nu = 1e-3;
    double body_force_x = 0.0;
    TurbulenceModel model = TurbulenceModel::SstMenter;
    TurbulenceConstants constants;

    double inlet_u = 0.0;
    double inlet_k = -1.0;      // negative = unset
    double inlet_omega = -1.0;  // negative = unset
};

struct SolverSettings {
    double tolerance = 1e-6;        // on normalized residual norms
    int max_iterations = 20000;
    double relax_momentum = 0.7;
    double relax_pressure = 0.3;
    double relax_turbulence = 0.5;
    double divergence_factor = 1e6;
    bool first_order_convection = false;
    int history_stride = 1;  // record residual norms every N iterations

    /// 1D channels pin omega to the analytic sublayer profile 6 nu/(beta1 y^2)
    /// on cells below this y+ (at least the wall-adjacent cell). The discrete
    /// diffusion operator cannot follow the y^-2 singularity on its own.
    double omega_sublayer_yplus = 2.5;
};

struct SolveInfo {
    bool converged = false;
    int iterations = 0;
    std::vector<std::string> equations;
    std::vector<double> final_residuals;  // normalized, per equation
    ResidualHistory history;
    long clip_events = 0;
};

struct RansSolution {
    FlowState state;
    SolveInfo info;
};

/// One discretized steady case: mesh + conditions + numerical settings.
/// Provides the nonlinear residual operator R(w, beta_c) whose root the
/// solver returns, the packing between FlowState and the stacked state
/// vector w, and the solve itself. The residual path and the solve path
/// share the same flux and closure code so that converged states satisfy
/// R = 0 to the solver tolerance.
class DiscreteCase {
public:
    DiscreteCase(Mesh mesh, FlowConditions conditions, SolverSettings settings);

    const Mesh& mesh() const { return mesh_; }
    const FlowConditions& conditions() const { return conditions_; }
    const SolverSettings& settings() const { return settings_; }
    SolverSettings& settings() { return settings_; }

    int n_cells() const { return mesh_.n_cells(); }
    int n_eq() const { return static_cast<int>(equations_.size()); }
    const std::vector<std::string>& equations() const { return equations_; }

    /// Chebyshev index-space radius of the residual stencil (for coloring).
    int stencil_reach() const { return 2; }

    /// Stacked state vector: w[eq * n_cells + cell].
    Eigen::VectorXd pack(const FlowState& state) const;
    FlowState unpack(const Eigen::VectorXd& w) const;

    /// Steady residual at a packed state. Blanked cells carry identity rows.
    Eigen::VectorXd residual_packed(const Eigen::VectorXd& w,
                                    const CorrectionField& beta) const;

    /// Residual plus a per-row scale (sum of absolute term magnitudes), used
    /// to measure convergence cell-by-cell: near-wall omega scales exceed the
    /// core scales by orders of magnitude, so a global norm would mask an
    /// under-converged core.
    void residual_and_scale(const Eigen::VectorXd& w, const CorrectionField& beta,
                            Eigen::VectorXd& r, Eigen::VectorXd& scale) const;

    /// Residual reshaped to n_cells x n_eq.
    Eigen::MatrixXd residual_matrix(const FlowState& state,
                                    const CorrectionField& beta) const;

    /// Per-equation infinity norms of the scale-normalized residual.
    std::vector<double> residual_norms(const FlowState& state,
                                       const CorrectionField& beta) const;

    FlowState canonical_initial_state() const;

    RansSolution solve(const CorrectionField& beta,
                       const FlowState* warm_start = nullptr) const;

    /// Analytic dR_omega/dbeta_c per cell (the omega production source at
    /// beta_c = 1); zero on cells with Dirichlet omega rows.
    std::vector<double> omega_production_coefficient(const FlowState& state) const;

    /// Omega production source per cell for the given correction field.
    std::vector<double> omega_production(const FlowState& state,
                                         const CorrectionField& beta) const;

private:
    Mesh mesh_;
    FlowConditions conditions_;
    SolverSettings settings_;
    std::vector<std::string> equations_;
};

/// Convenience wrappers mirroring the operation-level interface.
RansSolution solve_rans(const Mesh& mesh, const FlowConditions& conditions,
                        const CorrectionField& beta, const SolverSettings& settings);

Eigen::MatrixXd residual(const FlowState& state, const CorrectionField& beta,
                         const Mesh& mesh, const FlowConditions& conditions,
                         const SolverSettings& settings);

// --- internals shared between the 1D and 2D paths ---------------------------
namespace detail {

struct ChannelOps {
    static void residual(const DiscreteCase& cs, const Eigen::VectorXd& w,
                         const CorrectionField& beta, Eigen::VectorXd& r,
                         Eigen::VectorXd* scale);
    static RansSolution solve(const DiscreteCase& cs, const CorrectionField& beta,
                              const FlowState* warm_start);
    static FlowState initial_state(const DiscreteCase& cs);
    static std::vector<double> production_coeff(const DiscreteCase& cs,
                                                const FlowState& state);
};

struct Simple2dOps {
    static void residual(const DiscreteCase& cs, const Eigen::VectorXd& w,
                         const CorrectionField& beta, Eigen::VectorXd& r,
                         Eigen::VectorXd* scale);
    static RansSolution solve(const DiscreteCase& cs, const CorrectionField& beta,
                              const FlowState* warm_start);
    static FlowState initial_state(const DiscreteCase& cs);
    static std::vector<double> production_coeff(const DiscreteCase& cs,
                                                const FlowState& state);
};

}  // namespace detail

}  // namespace fiml
