/// @file test_jacobian_adjoint.cpp
/// @brief Colored-FD Jacobian against dense finite differences and hand
/// assemblies; adjoint linear-solve checks against an independent dense
/// elimination.

#include <doctest.h>

#include <Eigen/Dense>

#include "fiml/adjoint.hpp"
#include "fiml/jacobian.hpp"
#include "support/oracles.hpp"

using namespace fiml;

TEST_CASE("laminar 1D Jacobian matches a hand-assembled diffusion matrix") {
    Mesh mesh = build_channel_1d(8, 1.0, 1.0);
    FlowConditions cond;
    cond.nu = 0.05;
    cond.body_force_x = 1.0;
    cond.model = TurbulenceModel::Laminar;
    SolverSettings set;
    const DiscreteCase cs(mesh, cond, set);
    const FlowState state = cs.canonical_initial_state();
    const CorrectionField beta(8);

    const Eigen::SparseMatrix<double> jac = assemble_state_jacobian(cs, state, beta);
    const Eigen::MatrixXd dense = Eigen::MatrixXd(jac);

    // hand assembly: residual_j = [flux(j+1/2) - flux(j-1/2)]/h + F
    const double h = 0.125;
    Eigen::MatrixXd expected = Eigen::MatrixXd::Zero(8, 8);
    for (int j = 0; j < 8; ++j) {
        double diag = 0.0;
        if (j == 0) {
            diag -= cond.nu / (mesh.cy[0] * h);  // wall face, u_wall = 0
        } else {
            const double d = cond.nu / (h * h);
            diag -= d;
            expected(j, j - 1) += d;
        }
        if (j < 7) {
            const double d = cond.nu / (h * h);
            diag -= d;
            expected(j, j + 1) += d;
        }
        expected(j, j) = diag;
    }
    CHECK((dense - expected).lpNorm<Eigen::Infinity>() < 1e-7);

    // rows sum to boundary-consistent values: interior rows sum to zero
    for (int j = 1; j < 7; ++j)
        CHECK(dense.row(j).sum() == doctest::Approx(0.0).epsilon(1e-7));
}

TEST_CASE("colored assembly equals the dense FD Jacobian on a 2D toy case") {
    Mesh mesh = build_channel_2d(4, 4, 1.0, 1.0);
    FlowConditions cond;
    cond.nu = 0.1;
    cond.inlet_u = 1.0;
    cond.model = TurbulenceModel::Laminar;
    SolverSettings set;
    const DiscreteCase cs(mesh, cond, set);
    const FlowState state = cs.canonical_initial_state();
    const CorrectionField beta(16);

    const Eigen::MatrixXd colored =
        Eigen::MatrixXd(assemble_state_jacobian(cs, state, beta));
    const Eigen::MatrixXd dense = oracle::dense_fd_jacobian(cs, state, beta);

    const double scale = dense.cwiseAbs().maxCoeff();
    CHECK((colored - dense).cwiseAbs().maxCoeff() / scale < 1e-6);
}

TEST_CASE("colored assembly matches dense FD on the turbulent channel") {
    Mesh mesh = build_channel_1d(16, 1.1, 1.0);
    FlowConditions cond;
    cond.nu = 1.0 / 180.0;
    cond.body_force_x = 1.0;
    cond.model = TurbulenceModel::SstMenter;
    SolverSettings set;
    set.tolerance = 1e-9;
    set.max_iterations = 40000;
    const DiscreteCase cs(mesh, cond, set);
    const RansSolution sol = cs.solve(CorrectionField(16));

    const Eigen::MatrixXd colored =
        Eigen::MatrixXd(assemble_state_jacobian(cs, sol.state, CorrectionField(16)));
    const Eigen::MatrixXd dense =
        oracle::dense_fd_jacobian(cs, sol.state, CorrectionField(16));
    const double scale = dense.cwiseAbs().maxCoeff();
    CHECK((colored - dense).cwiseAbs().maxCoeff() / scale < 2e-5);
}

TEST_CASE("zero perturbation step is rejected") {
    Mesh mesh = build_channel_1d(8, 1.0, 1.0);
    FlowConditions cond;
    cond.nu = 0.05;
    cond.model = TurbulenceModel::Laminar;
    const DiscreteCase cs(mesh, cond, SolverSettings{});
    JacobianOptions opts;
    opts.fd_step = 0.0;
    CHECK_THROWS_AS(
        assemble_state_jacobian(cs, cs.canonical_initial_state(), CorrectionField(8), opts),
        std::invalid_argument);
}

TEST_CASE("adjoint solve: identity system returns the right-hand side") {
    Eigen::SparseMatrix<double> eye(5, 5);
    eye.setIdentity();
    Eigen::VectorXd rhs(5);
    rhs << 1, -2, 3, 0.5, -0.25;
    const Eigen::VectorXd phi = solve_adjoint(eye, rhs);
    CHECK((phi - rhs).norm() == doctest::Approx(0.0).epsilon(1e-14));
}

TEST_CASE("adjoint solve: zero right-hand side gives zero") {
    Eigen::SparseMatrix<double> a(4, 4);
    a.insert(0, 0) = 2.0;
    a.insert(1, 1) = 3.0;
    a.insert(2, 2) = 1.5;
    a.insert(3, 3) = 4.0;
    a.insert(0, 1) = 0.5;
    const Eigen::VectorXd phi = solve_adjoint(a, Eigen::VectorXd::Zero(4));
    CHECK(phi.norm() == 0.0);
}

TEST_CASE("adjoint solve matches an independent dense elimination on an SPD system") {
    const int n = 12;
    Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        dense(i, i) = 4.0 + 0.1 * i;
        if (i > 0) {
            dense(i, i - 1) = -1.0;
            dense(i - 1, i) = -1.0;
        }
    }
    Eigen::VectorXd rhs(n);
    for (int i = 0; i < n; ++i) rhs[i] = std::sin(1.0 + i);

    Eigen::SparseMatrix<double> sparse = dense.sparseView();
    const Eigen::VectorXd phi = solve_adjoint(sparse, rhs);

    // oracle: Gaussian elimination on the transposed system
    std::vector<std::vector<double>> at(n, std::vector<double>(n));
    std::vector<double> b(n);
    for (int i = 0; i < n; ++i) {
        b[i] = rhs[i];
        for (int j = 0; j < n; ++j) at[i][j] = dense(j, i);
    }
    const std::vector<double> ref = oracle::gauss_solve(at, b);
    for (int i = 0; i < n; ++i) CHECK(phi[i] == doctest::Approx(ref[i]).epsilon(1e-10));
}

TEST_CASE("adjoint solve reports singular systems") {
    Eigen::SparseMatrix<double> a(3, 3);
    a.insert(0, 0) = 1.0;
    a.insert(1, 1) = 1.0;  // row/col 2 empty -> singular
    a.makeCompressed();
    Eigen::VectorXd rhs = Eigen::VectorXd::Ones(3);
    CHECK_THROWS_AS(solve_adjoint(a, rhs), SolverError);
}
