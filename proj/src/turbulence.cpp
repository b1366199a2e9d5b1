#include "fiml/turbulence.hpp"

#include <algorithm>
#include <cmath>

namespace fiml {

namespace {
constexpr double kTiny = 1e-30;
}

double eddy_viscosity(double k, double omega, double strain_mag, double f2,
                      const TurbulenceConstants& c, TurbulenceModel model) {
    if (model == TurbulenceModel::Laminar) return 0.0;
    if (model == TurbulenceModel::KOmegaWilcox) return k / std::max(omega, kTiny);
    return c.a1 * k / std::max(c.a1 * omega, strain_mag * f2);
}

double omega_wall_value(double nu, double d, const TurbulenceConstants& c) {
    return 6.0 * nu / (c.beta_1 * d * d);
}

TurbulenceCellCoeffs evaluate_closure(const TurbulenceCellInputs& in,
                                      const TurbulenceConstants& c,
                                      TurbulenceModel model) {
    TurbulenceCellCoeffs out;
    if (model == TurbulenceModel::Laminar) return out;

    const double k = std::max(in.k, 0.0);
    const double w = std::max(in.omega, kTiny);
    const double d = std::max(in.wall_distance, kTiny);
    const double s = in.strain_mag;

    if (model == TurbulenceModel::KOmegaWilcox) {
        out.f1 = 1.0;
        out.f2 = 1.0;
        out.nu_t = k / w;
        out.prod_k = out.nu_t * s * s;
        out.prod_w_coeff = c.wilcox_gamma * s * s;
        out.cross_diffusion = 0.0;
        out.sigma_k = c.wilcox_sigma;
        out.sigma_w = c.wilcox_sigma;
        out.beta_w = c.wilcox_beta;
        return out;
    }

    const double grad_kw = in.dkdx * in.dwdx + in.dkdy * in.dwdy;
    const double cd_kw = std::max(2.0 * c.sigma_w2 / w * grad_kw, 1e-10);

    const double sqrt_k = std::sqrt(k);
    const double arg1 = std::min(
        std::max(sqrt_k / (c.beta_star * w * d), 500.0 * in.nu / (d * d * w)),
        4.0 * c.sigma_w2 * k / (cd_kw * d * d));
    out.f1 = std::tanh(arg1 * arg1 * arg1 * arg1);

    const double arg2 =
        std::max(2.0 * sqrt_k / (c.beta_star * w * d), 500.0 * in.nu / (d * d * w));
    out.f2 = std::tanh(arg2 * arg2);

    out.nu_t = c.a1 * k / std::max(c.a1 * w, s * out.f2);

    const double gamma = c.blend(c.gamma_1, c.gamma_2, out.f1);
    out.sigma_k = c.blend(c.sigma_k1, c.sigma_k2, out.f1);
    out.sigma_w = c.blend(c.sigma_w1, c.sigma_w2, out.f1);
    out.beta_w = c.blend(c.beta_1, c.beta_2, out.f1);

    // Production limiter of Menter 2003; the omega source uses the limited
    // production divided by nu_t so beta_c scales it linearly.
    const double prod_raw = out.nu_t * s * s;
    out.prod_k = std::min(prod_raw, 10.0 * c.beta_star * k * w);
    if (out.nu_t > kTiny) {
        out.prod_w_coeff = gamma * out.prod_k / out.nu_t;
    } else {
        out.prod_w_coeff = gamma * s * s;
    }

    out.cross_diffusion = 2.0 * (1.0 - out.f1) * c.sigma_w2 / w * grad_kw;
    return out;
}

void update_eddy_viscosity_1d(FlowState& state, const std::vector<double>& dudy,
                              const std::vector<double>& wall_distance,
                              const TurbulenceConstants& constants,
                              TurbulenceModel model) {
    const int n = state.n_cells();
    state.nu_t.assign(n, 0.0);
    if (model == TurbulenceModel::Laminar) return;
    for (int j = 0; j < n; ++j) {
        TurbulenceCellInputs in;
        in.k = state.k[j];
        in.omega = state.omega[j];
        in.strain_mag = std::abs(dudy[j]);  // sqrt(2 S_ij S_ij) for 1D shear
        in.wall_distance = wall_distance[j];
        in.nu = state.nu;
        const TurbulenceCellCoeffs cc = evaluate_closure(in, constants, model);
        state.nu_t[j] = cc.nu_t;
    }
}

}  // namespace fiml
