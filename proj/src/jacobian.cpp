#include "fiml/jacobian.hpp"

#include <cmath>
#include <stdexcept>
#include <vector>

namespace fiml {

Eigen::SparseMatrix<double> assemble_state_jacobian(const DiscreteCase& cs,
                                                    const FlowState& state,
                                                    const CorrectionField& beta,
                                                    const JacobianOptions& opts) {
    if (!(opts.fd_step > 0.0) || !std::isfinite(opts.fd_step))
        throw std::invalid_argument("assemble_state_jacobian: fd_step must be > 0");

    const Mesh& mesh = cs.mesh();
    const int n = cs.n_cells();
    const int n_eq = cs.n_eq();
    const int reach = cs.stencil_reach();
    const int stride = 2 * reach + 1;
    const int n_colors = (mesh.dim == 1) ? stride : stride * stride;

    const Eigen::VectorXd w0 = cs.pack(state);
    const Eigen::VectorXd r0 = cs.residual_packed(w0, beta);

    auto color_of = [&](int c) {
        const int ci = mesh.cell_i(c) % stride;
        const int cj = mesh.cell_j(c) % stride;
        return (mesh.dim == 1) ? cj : ci + stride * cj;
    };

    // For each residual row cell, the unique perturbed cell of the current
    // color within stencil reach (if any).
    std::vector<std::vector<int>> cells_of_color(n_colors);
    for (int c = 0; c < n; ++c) cells_of_color[color_of(c)].push_back(c);

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<std::size_t>(n) * n_eq * n_eq * stride * 2);

    Eigen::VectorXd wp = w0, wm = w0;
    std::vector<double> steps(n);

    for (int color = 0; color < n_colors; ++color) {
        const std::vector<int>& group = cells_of_color[color];
        if (group.empty()) continue;

        // owner[cell] = perturbed cell of this color within reach, else -1
        std::vector<int> owner(n, -1);
        for (int pc : group) {
            const int pi = mesh.cell_i(pc), pj = mesh.cell_j(pc);
            for (int dj = -reach; dj <= reach; ++dj) {
                for (int di = -reach; di <= reach; ++di) {
                    const int i = pi + di, j = pj + dj;
                    if (!mesh.in_range(i, j)) continue;
                    owner[mesh.index(i, j)] = pc;
                }
            }
        }

        for (int e = 0; e < n_eq; ++e) {
            for (int pc : group) {
                const int idx = e * n + pc;
                steps[pc] = opts.fd_step * (1.0 + std::abs(w0[idx]));
                wp[idx] = w0[idx] + steps[pc];
                if (opts.central) wm[idx] = w0[idx] - steps[pc];
            }
            const Eigen::VectorXd rp = cs.residual_packed(wp, beta);
            const Eigen::VectorXd rm = opts.central ? cs.residual_packed(wm, beta) : r0;

            for (int row = 0; row < static_cast<int>(r0.size()); ++row) {
                const double diff = rp[row] - rm[row];
                if (diff == 0.0) continue;
                const int row_cell = row % n;
                const int pc = owner[row_cell];
                if (pc < 0) continue;  // outside any stencil: round-off only
                const double denom = opts.central ? 2.0 * steps[pc] : steps[pc];
                trips.emplace_back(row, e * n + pc, diff / denom);
            }

            for (int pc : group) {
                const int idx = e * n + pc;
                wp[idx] = w0[idx];
                wm[idx] = w0[idx];
            }
        }
    }

    Eigen::SparseMatrix<double> jac(n * n_eq, n * n_eq);
    jac.setFromTriplets(trips.begin(), trips.end());
    return jac;
}

}  // namespace fiml
