/// @file test_ensemble.cpp
/// @brief Mixture-moment arithmetic, Monte Carlo oracle, gating semantics.

#include <doctest.h>

#include <cmath>

#include "fiml/ensemble.hpp"
#include "fiml/rng.hpp"

using namespace fiml;

TEST_CASE("symmetric two-member mixture") {
    const EnsemblePrediction p = ensemble_predict({0.0, 2.0}, {1.0, 1.0});
    CHECK(p.weights[0] == doctest::Approx(0.5));
    CHECK(p.weights[1] == doctest::Approx(0.5));
    CHECK(p.mu_star == doctest::Approx(1.0));
    CHECK(p.sigma_mu * p.sigma_mu == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p.sigma_sigma * p.sigma_sigma == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(p.sigma_star * p.sigma_star == doctest::Approx(2.0).epsilon(1e-14));
}

TEST_CASE("inverse-variance weights") {
    const EnsemblePrediction p =
        ensemble_predict({1.0, 1.0}, {1.0, std::sqrt(2.0)});
    CHECK(p.weights[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-14));
    CHECK(p.weights[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
    CHECK(p.mu_star == doctest::Approx(1.0));
    CHECK(p.sigma_mu == doctest::Approx(0.0));
    CHECK(p.sigma_sigma * p.sigma_sigma == doctest::Approx(4.0 / 3.0).epsilon(1e-14));
}

TEST_CASE("single submodel is valid with unit weight") {
    const EnsemblePrediction p = ensemble_predict({1.4}, {0.2});
    CHECK(p.weights[0] == doctest::Approx(1.0));
    CHECK(p.mu_star == doctest::Approx(1.4));
    CHECK(p.sigma_mu == doctest::Approx(0.0));
    CHECK(p.sigma_star == doctest::Approx(0.2));
}

TEST_CASE("mixture-moment identity holds to 1e-12 for random instances") {
    Rng rng(42);
    for (int trial = 0; trial < 500; ++trial) {
        const int m = 1 + static_cast<int>(rng.bounded(6));
        std::vector<double> means(m), sds(m);
        for (int k = 0; k < m; ++k) {
            means[k] = rng.uniform(-3.0, 3.0);
            sds[k] = rng.uniform(1e-3, 2.0);
        }
        const EnsemblePrediction p = ensemble_predict(means, sds);

        double wsum = 0.0, second = 0.0;
        for (int k = 0; k < m; ++k) {
            wsum += p.weights[k];
            second += p.weights[k] * (sds[k] * sds[k] + means[k] * means[k]);
        }
        CHECK(wsum == doctest::Approx(1.0).epsilon(1e-13));
        const double analytic_var = second - p.mu_star * p.mu_star;
        CHECK(std::abs(p.sigma_star * p.sigma_star - analytic_var) <= 1e-12);

        // mean bracketed by member means
        const double lo = *std::min_element(means.begin(), means.end());
        const double hi = *std::max_element(means.begin(), means.end());
        CHECK(p.mu_star >= lo - 1e-12);
        CHECK(p.mu_star <= hi + 1e-12);
    }
}

TEST_CASE("total variance matches a large Monte Carlo draw of the mixture") {
    Rng rng(7);
    for (int trial = 0; trial < 3; ++trial) {
        const int m = 3;
        std::vector<double> means(m), sds(m);
        for (int k = 0; k < m; ++k) {
            means[k] = rng.uniform(-1.0, 2.0);
            sds[k] = rng.uniform(0.1, 1.0);
        }
        const EnsemblePrediction p = ensemble_predict(means, sds);

        const long samples = 10'000'000;
        Rng draw(1000 + trial);
        double sum = 0.0, sum2 = 0.0;
        for (long i = 0; i < samples; ++i) {
            const double u = draw.uniform();
            int k = 0;
            double acc = p.weights[0];
            while (u > acc && k + 1 < m) acc += p.weights[++k];
            const double x = draw.normal(means[k], sds[k]);
            sum += x;
            sum2 += x * x;
        }
        const double mc_var = sum2 / samples - (sum / samples) * (sum / samples);
        CHECK(std::abs(mc_var - p.sigma_star * p.sigma_star) /
                  (p.sigma_star * p.sigma_star) <
              0.01);
    }
}

TEST_CASE("a vanishing member spread concentrates the weights") {
    for (double sd : {1e-2, 1e-4, 1e-6}) {
        const EnsemblePrediction p = ensemble_predict({2.0, 0.0}, {sd, 1.0});
        CHECK(p.weights[0] > 1.0 - 2.0 * sd * sd);
        CHECK(p.mu_star == doctest::Approx(2.0).epsilon(1e-3));
    }
}

TEST_CASE("acceptance gate branches exactly at the boundary") {
    EnsemblePrediction p = ensemble_predict({1.5}, {0.19});
    CHECK(apply_acceptance(p, 0.2) == doctest::Approx(1.5));  // accept
    p = ensemble_predict({1.5}, {0.21});
    CHECK(apply_acceptance(p, 0.2) == 1.0);  // reject
    p = ensemble_predict({1.5}, {0.2});
    CHECK(apply_acceptance(p, 0.2) == doctest::Approx(1.5));  // boundary accepts
}

TEST_CASE("gated active set grows monotonically with sigma_bar") {
    Rng rng(17);
    std::vector<EnsemblePrediction> cells;
    for (int c = 0; c < 200; ++c) {
        cells.push_back(ensemble_predict({rng.uniform(0.5, 1.5), rng.uniform(0.5, 1.5)},
                                         {rng.uniform(0.01, 0.4), rng.uniform(0.01, 0.4)}));
    }
    int previous = -1;
    for (double sigma_bar : {0.05, 0.1, 0.15, 0.2, 0.25}) {
        int active = 0;
        for (const auto& p : cells)
            if (p.sigma_star <= sigma_bar) ++active;
        CHECK(active >= previous);
        previous = active;
    }
}

TEST_CASE("degenerate inputs are rejected") {
    CHECK_THROWS_AS(ensemble_predict({}, {}), std::invalid_argument);
    CHECK_THROWS_AS(ensemble_predict({1.0}, {0.1, 0.2}), std::invalid_argument);
}
