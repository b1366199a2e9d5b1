/// @file test_inversion.cpp
/// @brief Objective evaluation, adjoint gradients against finite
/// differences, and descent behavior on desk-scale channels.

#include <doctest.h>

#include <cmath>

#include "fiml/inversion.hpp"
#include "support/oracles.hpp"

using namespace fiml;

namespace {

InversionProblem channel_problem(int n_cells, double retau, double lambda,
                                 double tol = 1e-10) {
    InversionProblem p;
    p.mesh = build_channel_1d(n_cells, 1.1, 1.0);
    p.conditions.nu = 1.0 / retau;
    p.conditions.body_force_x = 1.0;
    p.conditions.model = TurbulenceModel::SstMenter;
    p.solver.tolerance = tol;
    p.solver.max_iterations = 60000;
    p.lambda = lambda;
    for (int c = 0; c < n_cells; ++c) p.data.cells.push_back(c);
    p.data.u_ref.assign(n_cells, 0.0);
    return p;
}

CorrectionField gaussian_bump_beta(const Mesh& mesh, double depth, double center,
                                   double width) {
    CorrectionField beta(mesh.n_cells());
    for (int j = 0; j < mesh.n_cells(); ++j) {
        const double z = (mesh.cy[j] - center) / width;
        beta.beta[j] = 1.0 - depth * std::exp(-z * z);
    }
    return beta;
}

}  // namespace

TEST_CASE("objective evaluates the data and regularization terms directly") {
    InversionProblem p = channel_problem(16, 180.0, 1.0);
    const DiscreteCase cs(p.mesh, p.conditions, p.solver);
    FlowState state = cs.canonical_initial_state();

    SUBCASE("exact match with inactive correction gives zero") {
        for (int c = 0; c < 16; ++c) p.data.u_ref[c] = state.u[c];
        CHECK(objective(state, p, CorrectionField(16)) == doctest::Approx(0.0));
    }

    SUBCASE("one beta cell away from 1 contributes lambda/n (beta-1)^2") {
        for (int c = 0; c < 16; ++c) p.data.u_ref[c] = state.u[c];
        CorrectionField beta(16);
        beta.beta[4] = 2.0;
        CHECK(objective(state, p, beta) == doctest::Approx(1.0 / 16.0).epsilon(1e-14));
    }

    SUBCASE("two-cell synthetic case matches the hand-computed sum") {
        InversionProblem q = channel_problem(16, 180.0, 0.5);
        q.data.cells = {3, 7};
        q.data.u_ref = {state.u[3] - 0.2, state.u[7] + 0.1};
        CorrectionField beta(16);
        beta.beta[0] = 1.3;
        const double expected = (0.2 * 0.2 + 0.1 * 0.1) / 2.0 + 0.5 / 16.0 * 0.09;
        CHECK(objective(state, q, beta) == doctest::Approx(expected).epsilon(1e-12));
    }

    SUBCASE("empty assimilation mask is rejected") {
        InversionProblem q = channel_problem(16, 180.0, 0.5);
        q.data.cells.clear();
        q.data.u_ref.clear();
        CHECK_THROWS_AS(objective(state, q, CorrectionField(16)), std::invalid_argument);
    }
}

TEST_CASE("gradient vanishes at an exact fit with beta_c = 1") {
    InversionProblem p = channel_problem(32, 180.0, 0.1);
    const DiscreteCase cs(p.mesh, p.conditions, p.solver);
    const CorrectionField beta(32);
    const RansSolution sol = cs.solve(beta);
    for (int c = 0; c < 32; ++c) p.data.u_ref[c] = sol.state.u[c];

    const std::vector<double> grad = adjoint_gradient(cs, sol.state, beta, p);
    for (double g : grad) CHECK(std::abs(g) < 1e-8);
}

TEST_CASE("regularization part of the gradient is linear in lambda") {
    InversionProblem p = channel_problem(32, 180.0, 0.05);
    const DiscreteCase cs(p.mesh, p.conditions, p.solver);
    const CorrectionField beta = gaussian_bump_beta(p.mesh, 0.3, 0.5, 0.15);
    const RansSolution sol = cs.solve(beta);
    for (int c = 0; c < 32; ++c) p.data.u_ref[c] = sol.state.u[c];  // data term flat

    // at u == u_ref the adjoint right-hand side vanishes, leaving only the
    // analytic 2 lambda (beta - 1)/n term
    const std::vector<double> g1 = adjoint_gradient(cs, sol.state, beta, p);
    InversionProblem p2 = p;
    p2.lambda = 0.1;
    const std::vector<double> g2 = adjoint_gradient(cs, sol.state, beta, p2);
    for (int c = 0; c < 32; ++c)
        CHECK(g2[c] == doctest::Approx(2.0 * g1[c]).epsilon(1e-9));
}

TEST_CASE("adjoint gradient matches central finite differences") {
    InversionProblem p = channel_problem(32, 395.0, 1e-3);
    const DiscreteCase cs(p.mesh, p.conditions, p.solver);

    // reference flow from a known bump; gradient probed at beta = 1
    const CorrectionField beta_star = gaussian_bump_beta(p.mesh, 0.5, 0.5, 0.15);
    const RansSolution ref = cs.solve(beta_star);
    for (int c = 0; c < 32; ++c) p.data.u_ref[c] = ref.state.u[c];

    CorrectionField beta(32);
    const RansSolution sol = cs.solve(beta);
    const std::vector<double> grad = adjoint_gradient(cs, sol.state, beta, p);

    for (int cell : {6, 16, 26}) {
        const double h = 1e-4;
        CorrectionField plus = beta, minus = beta;
        plus.beta[cell] += h;
        minus.beta[cell] -= h;
        const RansSolution sp = cs.solve(plus, &sol.state);
        const RansSolution sm = cs.solve(minus, &sol.state);
        const double fd =
            (objective(sp.state, p, plus) - objective(sm.state, p, minus)) / (2.0 * h);
        CHECK(grad[cell] == doctest::Approx(fd).epsilon(1e-3));
    }
}

TEST_CASE("inversion terminates immediately when the reference is the baseline") {
    InversionProblem p = channel_problem(32, 180.0, 1e-2);
    const DiscreteCase cs(p.mesh, p.conditions, p.solver);
    const RansSolution sol = cs.solve(CorrectionField(32));
    for (int c = 0; c < 32; ++c) p.data.u_ref[c] = sol.state.u[c];

    const InversionResult result = invert(p, CorrectionField(32));
    CHECK(result.termination == "stationary");
    for (double b : result.beta.beta) CHECK(b == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("activity mask excluding all cells is rejected") {
    InversionProblem p = channel_problem(16, 180.0, 1e-2);
    p.activity.assign(16, 0);
    CHECK_THROWS_AS(invert(p, CorrectionField(16)), std::invalid_argument);
}

TEST_CASE("twin experiment: descent recovers most of the objective") {
    InversionProblem p = channel_problem(32, 395.0, 1e-4);
    p.solver.tolerance = 1e-10;
    p.optimizer.max_iterations = 30;
    const DiscreteCase cs(p.mesh, p.conditions, p.solver);

    const CorrectionField beta_star = gaussian_bump_beta(p.mesh, 0.5, 0.5, 0.15);
    const RansSolution ref = cs.solve(beta_star);
    for (int c = 0; c < 32; ++c) p.data.u_ref[c] = ref.state.u[c];

    const InversionResult result = invert(p, CorrectionField(32));
    REQUIRE(result.objective_history.size() >= 2);
    const double j0 = result.objective_history.front();
    const double jn = result.objective_history.back();
    CHECK(jn < 0.2 * j0);

    // monotone descent
    for (std::size_t i = 1; i < result.objective_history.size(); ++i)
        CHECK(result.objective_history[i] <= result.objective_history[i - 1] + 1e-300);
}

TEST_CASE("constrained activity leaves beta_c = 1 outside the mask") {
    InversionProblem p = channel_problem(32, 395.0, 1e-4);
    p.optimizer.max_iterations = 8;
    const DiscreteCase cs(p.mesh, p.conditions, p.solver);

    const CorrectionField beta_star = gaussian_bump_beta(p.mesh, 0.4, 0.5, 0.15);
    const RansSolution ref = cs.solve(beta_star);
    for (int c = 0; c < 32; ++c) p.data.u_ref[c] = ref.state.u[c];

    p.activity.assign(32, 0);
    for (int c = 10; c < 22; ++c) p.activity[c] = 1;
    const InversionResult result = invert(p, CorrectionField(32));
    for (int c = 0; c < 32; ++c) {
        if (c < 10 || c >= 22) CHECK(result.beta.beta[c] == 1.0);
    }
}

TEST_CASE("strong regularization pins beta_c to 1") {
    InversionProblem p = channel_problem(32, 395.0, 1e6);
    p.optimizer.max_iterations = 20;
    const DiscreteCase cs(p.mesh, p.conditions, p.solver);

    const CorrectionField beta_star = gaussian_bump_beta(p.mesh, 0.5, 0.5, 0.15);
    const RansSolution ref = cs.solve(beta_star);
    for (int c = 0; c < 32; ++c) p.data.u_ref[c] = ref.state.u[c];

    const InversionResult result = invert(p, CorrectionField(32));
    for (double b : result.beta.beta) CHECK(std::abs(b - 1.0) <= 1e-2);
}
