/// @file test_lof.cpp
/// @brief Local Outlier Factor against a naive O(n^2) oracle.

#include <doctest.h>

#include <cmath>

#include "fiml/lof.hpp"
#include "fiml/rng.hpp"
#include "support/oracles.hpp"

using namespace fiml;

namespace {

Eigen::MatrixXd lattice_10x10() {
    Eigen::MatrixXd X(100, 2);
    for (int i = 0; i < 10; ++i)
        for (int j = 0; j < 10; ++j) {
            X(10 * i + j, 0) = i;
            X(10 * i + j, 1) = j;
        }
    return X;
}

std::vector<std::vector<double>> rows_of(const Eigen::MatrixXd& X) {
    std::vector<std::vector<double>> out(X.rows(), std::vector<double>(X.cols()));
    for (int i = 0; i < X.rows(); ++i)
        for (int c = 0; c < X.cols(); ++c) out[i][c] = X(i, c);
    return out;
}

}  // namespace

TEST_CASE("lattice interior points score within [0.95, 1.05]") {
    const LofModel lof = LofModel::fit(lattice_10x10(), 8);
    // three layers in, the neighborhood densities are fully uniform
    for (int i = 3; i < 7; ++i)
        for (int j = 3; j < 7; ++j) {
            Eigen::VectorXd q(2);
            q << i, j;
            const double s = lof.score(q);
            CHECK(s > 0.95);
            CHECK(s < 1.05);
        }
}

TEST_CASE("identical reference points degrade gracefully to score 1") {
    Eigen::MatrixXd X = Eigen::MatrixXd::Zero(12, 3);
    const LofModel lof = LofModel::fit(X, 4);
    const double s = lof.score(Eigen::VectorXd::Zero(3));
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("neighbor count out of range is rejected") {
    const Eigen::MatrixXd X = lattice_10x10();
    CHECK_THROWS_AS(LofModel::fit(X, 0), std::invalid_argument);
    CHECK_THROWS_AS(LofModel::fit(X, 100), std::invalid_argument);
    CHECK_NOTHROW(LofModel::fit(X, 99));
}

TEST_CASE("query width mismatch is rejected") {
    const LofModel lof = LofModel::fit(lattice_10x10(), 8);
    CHECK_THROWS_AS(lof.score(Eigen::VectorXd::Zero(3)), std::invalid_argument);
}

TEST_CASE("scores agree with the brute-force oracle on random clouds") {
    Rng rng(123);
    for (int trial = 0; trial < 4; ++trial) {
        const int n = 60 + static_cast<int>(rng.bounded(120));
        const int d = 2 + static_cast<int>(rng.bounded(3));
        Eigen::MatrixXd X(n, d);
        for (int i = 0; i < n; ++i)
            for (int c = 0; c < d; ++c) X(i, c) = rng.normal();
        const int k = 5 + static_cast<int>(rng.bounded(10));
        const LofModel lof = LofModel::fit(X, k);
        const auto ref_rows = rows_of(X);

        for (int t = 0; t < 10; ++t) {
            std::vector<double> q(d);
            Eigen::VectorXd qe(d);
            for (int c = 0; c < d; ++c) {
                q[c] = rng.normal() * 1.5;
                qe[c] = q[c];
            }
            const double mine = lof.score(qe);
            const double ref = oracle::lof_score(ref_rows, k, q);
            CHECK(std::abs(mine - ref) <= 1e-9 * std::max(1.0, std::abs(ref)));
        }
    }
}

TEST_CASE("cluster members score low and far points score high") {
    Rng rng(55);
    Eigen::MatrixXd X(150, 2);
    for (int i = 0; i < 150; ++i) {
        X(i, 0) = rng.normal();
        X(i, 1) = rng.normal();
    }
    const LofModel lof = LofModel::fit(X, 20);

    const double member = lof.score(X.row(12).transpose());
    CHECK(member <= 1.2);

    Eigen::VectorXd far(2);
    far << 500.0, -500.0;  // ~100x the data diameter
    CHECK(lof.score(far) > 10.0);

    Eigen::VectorXd near(2), nearer(2);
    near << 4.0, 4.0;
    nearer << 2.0, 2.0;
    CHECK(lof.score(nearer) < lof.score(near));
}

TEST_CASE("translation invariance") {
    Rng rng(9);
    Eigen::MatrixXd X(80, 2);
    for (int i = 0; i < 80; ++i) {
        X(i, 0) = rng.normal();
        X(i, 1) = rng.normal();
    }
    Eigen::VectorXd q(2);
    q << 0.7, -0.3;
    const LofModel a = LofModel::fit(X, 10);
    const double base = a.score(q);

    Eigen::MatrixXd Xs = X;
    Xs.col(0).array() += 1234.5;
    Xs.col(1).array() -= 77.7;
    Eigen::VectorXd qs = q;
    qs[0] += 1234.5;
    qs[1] -= 77.7;
    const LofModel b = LofModel::fit(Xs, 10);
    CHECK(b.score(qs) == doctest::Approx(base).epsilon(1e-9));
}
