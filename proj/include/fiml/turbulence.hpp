#pragma once

#include <vector>

#include "fiml/fields.hpp"

namespace fiml {

enum class TurbulenceModel { Laminar, KOmegaWilcox, SstMenter };

/// Closure coefficients of the two-equation models. SST blends inner (1)
/// and outer (2) sets through F1; the Wilcox variant uses a single set.
struct TurbulenceConstants {
    double beta_star = 0.09;
    double a1 = 0.31;

    // SST inner (k-omega) set
    double sigma_k1 = 0.85;
    double sigma_w1 = 0.5;
    double beta_1 = 0.075;
    double gamma_1 = 5.0 / 9.0;

    // SST outer (k-epsilon) set
    double sigma_k2 = 1.0;
    double sigma_w2 = 0.856;
    double beta_2 = 0.0828;
    double gamma_2 = 0.44;

    // Wilcox k-omega set
    double wilcox_sigma = 0.5;
    double wilcox_beta = 0.075;
    double wilcox_gamma = 5.0 / 9.0;

    double blend(double inner, double outer, double f1) const {
        return f1 * inner + (1.0 - f1) * outer;
    }
};

/// Per-cell closure quantities evaluated from the current state. All inputs
/// are cell-centered; grad_* are the mesh gradient-operator outputs.
struct TurbulenceCellInputs {
    double k = 0.0;
    double omega = 1.0;
    double strain_mag = 0.0;    // sqrt(2 S_ij S_ij)
    double wall_distance = 1.0;
    double nu = 1e-6;
    double dkdx = 0.0, dkdy = 0.0;
    double dwdx = 0.0, dwdy = 0.0;
};

struct TurbulenceCellCoeffs {
    double f1 = 1.0;          // SST blending function
    double f2 = 1.0;          // eddy-viscosity limiter blending
    double nu_t = 0.0;        // eddy viscosity
    double prod_k = 0.0;      // limited k production
    double prod_w_coeff = 0.0;  // omega production at beta_c = 1
    double cross_diffusion = 0.0;
    double sigma_k = 1.0;
    double sigma_w = 1.0;
    double beta_w = 0.075;    // omega destruction coefficient
};

/// Evaluate the SST (or Wilcox) closure at one cell. The omega production
/// source in the transport equation is beta_c * prod_w_coeff.
TurbulenceCellCoeffs evaluate_closure(const TurbulenceCellInputs& in,
                                      const TurbulenceConstants& constants,
                                      TurbulenceModel model);

/// SST eddy viscosity: a1 k / max(a1 omega, S F2); reduces to k/omega where
/// the limiter is inactive. Wilcox: k/omega.
double eddy_viscosity(double k, double omega, double strain_mag, double f2,
                      const TurbulenceConstants& constants, TurbulenceModel model);

/// Low-Re wall value for omega at a wall-adjacent cell center (distance d).
double omega_wall_value(double nu, double d, const TurbulenceConstants& constants);

/// Recompute nu_t for every cell of a state (1D channel variant).
void update_eddy_viscosity_1d(FlowState& state, const std::vector<double>& dudy,
                              const std::vector<double>& wall_distance,
                              const TurbulenceConstants& constants,
                              TurbulenceModel model);

}  // namespace fiml
