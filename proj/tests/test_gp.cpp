/// @file test_gp.cpp
/// @brief GP regression against an independent dense-elimination oracle,
/// prior reversion, degenerate fits, sparse-mode contract, persistence.

#include <doctest.h>

#include <cmath>
#include <nlohmann/json.hpp>

#include "fiml/gp.hpp"
#include "fiml/rng.hpp"
#include "support/oracles.hpp"

using namespace fiml;

namespace {

struct Synthetic {
    Eigen::MatrixXd X;
    Eigen::VectorXd y;
};

Synthetic sine_data(int n, double noise, std::uint64_t seed, int dim = 1) {
    Rng rng(seed);
    Synthetic s;
    s.X.resize(n, dim);
    s.y.resize(n);
    for (int i = 0; i < n; ++i) {
        for (int d = 0; d < dim; ++d) s.X(i, d) = rng.uniform(-3.0, 3.0);
        s.y[i] = std::sin(s.X(i, 0)) + noise * rng.normal();
    }
    return s;
}

}  // namespace

TEST_CASE("posterior matches the dense oracle over random instances") {
    Rng rng(77);
    for (int trial = 0; trial < 6; ++trial) {
        const int n = 5 + static_cast<int>(rng.bounded(60));
        const int d = 1 + static_cast<int>(rng.bounded(3));
        Eigen::MatrixXd X(n, d);
        Eigen::VectorXd y(n);
        for (int i = 0; i < n; ++i) {
            for (int c = 0; c < d; ++c) X(i, c) = rng.uniform(-2.0, 2.0);
            y[i] = std::cos(X(i, 0)) + 0.1 * rng.normal();
        }
        Eigen::VectorXd ell(d);
        for (int c = 0; c < d; ++c) ell[c] = rng.uniform(0.5, 2.0);
        const double sf = rng.uniform(0.5, 2.0);
        const double sn = rng.uniform(0.05, 0.3);
        const double mu0 = rng.uniform(-1.0, 1.0);

        const GpModel gp = GpModel::from_hyperparameters(X, y, ell, sf, sn, mu0);
        for (int t = 0; t < 8; ++t) {
            Eigen::VectorXd q(d);
            for (int c = 0; c < d; ++c) q[c] = rng.uniform(-3.0, 3.0);
            const auto [mean, sd] = gp.predict(q);
            const auto ref = oracle::gp_posterior(X, y, ell, sf, sn, mu0, q);
            CHECK(std::abs(mean - ref.mean) <= 1e-8 * std::max(1.0, std::abs(ref.mean)));
            CHECK(std::abs(sd * sd - ref.variance) <=
                  1e-8 * std::max(sf * sf, std::abs(ref.variance)));
        }
    }
}

TEST_CASE("interpolation limit: tiny noise reproduces training targets") {
    const Synthetic s = sine_data(12, 0.0, 3);
    Eigen::VectorXd ell = Eigen::VectorXd::Constant(1, 1.0);
    const GpModel gp = GpModel::from_hyperparameters(s.X, s.y, ell, 1.0, 1e-6, 0.0);
    for (int i = 0; i < 5; ++i) {
        const auto [mean, sd] = gp.predict(s.X.row(i).transpose());
        CHECK(mean == doctest::Approx(s.y[i]).epsilon(1e-5));
        CHECK(sd < 1e-2);
    }
}

TEST_CASE("prior reversion far from the data") {
    const Synthetic s = sine_data(20, 0.05, 4);
    Eigen::VectorXd ell = Eigen::VectorXd::Constant(1, 0.8);
    const double sf = 1.3, mu0 = 0.4;
    const GpModel gp = GpModel::from_hyperparameters(s.X, s.y, ell, sf, 0.05, mu0);
    Eigen::VectorXd far(1);
    far << 250.0;
    const auto [mean, sd] = gp.predict(far);
    CHECK(mean == doctest::Approx(mu0).epsilon(1e-10));
    CHECK(sd == doctest::Approx(sf).epsilon(1e-10));
}

TEST_CASE("trained GP beats a loose multiple of the known-hyperparameter oracle") {
    const Synthetic train = sine_data(50, 0.1, 5);
    const Synthetic test = sine_data(80, 0.0, 6);

    GpOptions opts;
    opts.seed = 9;
    const GpModel gp = GpModel::train(train.X, train.y, opts);

    // oracle GP with hand-picked true-ish hyperparameters
    Eigen::VectorXd ell = Eigen::VectorXd::Constant(1, 1.2);
    const GpModel reference =
        GpModel::from_hyperparameters(train.X, train.y, ell, 1.0, 0.1, 0.0);

    double rmse_fit = 0.0, rmse_ref = 0.0;
    for (int i = 0; i < test.X.rows(); ++i) {
        const double truth = std::sin(test.X(i, 0));
        rmse_fit += std::pow(gp.predict(test.X.row(i).transpose()).first - truth, 2);
        rmse_ref += std::pow(reference.predict(test.X.row(i).transpose()).first - truth, 2);
    }
    rmse_fit = std::sqrt(rmse_fit / test.X.rows());
    rmse_ref = std::sqrt(rmse_ref / test.X.rows());
    CHECK(rmse_fit <= 1.5 * rmse_ref);
}

TEST_CASE("constant targets give a degenerate but usable fit") {
    Eigen::MatrixXd X(10, 2);
    Rng rng(8);
    for (int i = 0; i < 10; ++i) {
        X(i, 0) = rng.uniform(-1, 1);
        X(i, 1) = rng.uniform(-1, 1);
    }
    const Eigen::VectorXd y = Eigen::VectorXd::Constant(10, 3.25);
    GpOptions opts;
    opts.seed = 2;
    opts.restarts = 2;
    opts.opt_iterations = 80;
    const GpModel gp = GpModel::train(X, y, opts);
    Eigen::VectorXd q(2);
    q << 0.2, -0.4;
    const auto [mean, sd] = gp.predict(q);
    CHECK(mean == doctest::Approx(3.25).epsilon(1e-3));
    CHECK(sd < 0.05);  // about the (near-zero) fitted noise level
}

TEST_CASE("sparse mode stays within 5 percent of exact inference") {
    const Synthetic s = sine_data(400, 0.05, 10);
    GpOptions exact_opts;
    exact_opts.seed = 3;
    exact_opts.sparse_threshold = 100000;
    exact_opts.restarts = 2;
    exact_opts.opt_iterations = 120;
    const GpModel exact = GpModel::train(s.X, s.y, exact_opts);

    GpOptions sparse_opts = exact_opts;
    sparse_opts.sparse_threshold = 300;  // force the inducing-point path
    const GpModel sparse = GpModel::train(s.X, s.y, sparse_opts);
    CHECK(sparse.sparse());
    CHECK_FALSE(exact.sparse());

    Rng rng(12);
    for (int t = 0; t < 10; ++t) {
        Eigen::VectorXd q(1);
        q << rng.uniform(-2.5, 2.5);
        const double me = exact.predict(q).first;
        const double ms = sparse.predict(q).first;
        CHECK(std::abs(ms - me) <= 0.05 * std::max(1.0, std::abs(me)));
    }
}

TEST_CASE("query dimension mismatch is rejected") {
    const Synthetic s = sine_data(10, 0.1, 1);
    Eigen::VectorXd ell = Eigen::VectorXd::Constant(1, 1.0);
    const GpModel gp = GpModel::from_hyperparameters(s.X, s.y, ell, 1.0, 0.1, 0.0);
    Eigen::VectorXd q(3);
    q.setZero();
    CHECK_THROWS_AS(gp.predict(q), std::invalid_argument);
}

TEST_CASE("JSON round trip reproduces predictions bit for bit") {
    const Synthetic s = sine_data(30, 0.1, 21);
    GpOptions opts;
    opts.seed = 5;
    opts.restarts = 2;
    opts.opt_iterations = 60;
    const GpModel gp = GpModel::train(s.X, s.y, opts);

    const nlohmann::json j = nlohmann::json::parse(gp.to_json().dump());
    const GpModel loaded = GpModel::from_json(j);

    Rng rng(6);
    for (int t = 0; t < 10; ++t) {
        Eigen::VectorXd q(1);
        q << rng.uniform(-3, 3);
        const auto a = gp.predict(q);
        const auto b = loaded.predict(q);
        CHECK(a.first == b.first);    // bit identical
        CHECK(a.second == b.second);
    }
}
