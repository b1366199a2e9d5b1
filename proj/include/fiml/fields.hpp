#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace fiml {

/// Per-cell flow fields. 1D channel solves leave v and p empty (the channel
/// is driven by a constant body force, so no pressure field is carried).
struct FlowState {
    std::vector<double> u;      // x velocity (1D: streamwise u(y))
    std::vector<double> v;      // y velocity (2D only)
    std::vector<double> p;      // kinematic pressure (2D only)
    std::vector<double> k;      // turbulent kinetic energy
    std::vector<double> omega;  // specific dissipation rate
    std::vector<double> nu_t;   // eddy viscosity
    double nu = 0.0;            // molecular kinematic viscosity
    long clip_events = 0;       // k/omega positivity clips during the solve

    int n_cells() const { return static_cast<int>(u.size()); }
};

/// Spatially varying multiplier on the omega-equation production term.
/// beta_c = 1 everywhere reproduces the uncorrected model.
struct CorrectionField {
    std::vector<double> beta;

    CorrectionField() = default;
    explicit CorrectionField(int n_cells, double value = 1.0) : beta(n_cells, value) {}

    static CorrectionField uniform(int n_cells, double value = 1.0) {
        return CorrectionField(n_cells, value);
    }

    int n_cells() const { return static_cast<int>(beta.size()); }

    /// Cells where the correction differs from 1.
    std::vector<std::uint8_t> active_mask() const {
        std::vector<std::uint8_t> mask(beta.size(), 0);
        for (std::size_t i = 0; i < beta.size(); ++i) mask[i] = (beta[i] != 1.0);
        return mask;
    }
};

}  // namespace fiml
