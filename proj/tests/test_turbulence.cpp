/// @file test_turbulence.cpp
/// @brief Closure-level checks of the SST eddy viscosity and source terms.

#include <doctest.h>

#include <cmath>

#include "fiml/turbulence.hpp"

using namespace fiml;

TEST_CASE("eddy viscosity vanishes with k") {
    TurbulenceConstants c;
    CHECK(eddy_viscosity(0.0, 10.0, 5.0, 1.0, c, TurbulenceModel::SstMenter) == 0.0);
    CHECK(eddy_viscosity(0.0, 10.0, 5.0, 1.0, c, TurbulenceModel::KOmegaWilcox) == 0.0);
}

TEST_CASE("limiter-off branch gives k/omega") {
    TurbulenceConstants c;
    // zero strain: max(a1 w, 0) = a1 w
    CHECK(eddy_viscosity(2.0, 8.0, 0.0, 1.0, c, TurbulenceModel::SstMenter) ==
          doctest::Approx(0.25));
}

TEST_CASE("high-strain cell matches the hand-evaluated SST limiter") {
    TurbulenceConstants c;
    const double k = 1.5, w = 2.0, s = 40.0, f2 = 0.9;
    // a1 w = 0.62 << s f2 = 36 -> nu_t = a1 k / (s f2)
    const double expected = 0.31 * 1.5 / (40.0 * 0.9);
    CHECK(eddy_viscosity(k, w, s, f2, c, TurbulenceModel::SstMenter) ==
          doctest::Approx(expected).epsilon(1e-14));
}

TEST_CASE("blending functions stay within bounds") {
    TurbulenceConstants c;
    TurbulenceCellInputs in;
    in.k = 0.5;
    in.omega = 30.0;
    in.strain_mag = 12.0;
    in.wall_distance = 0.05;
    in.nu = 1e-4;
    in.dkdy = 1.0;
    in.dwdy = -20.0;
    const TurbulenceCellCoeffs cc = evaluate_closure(in, c, TurbulenceModel::SstMenter);
    CHECK(cc.f1 >= 0.0);
    CHECK(cc.f1 <= 1.0);
    CHECK(cc.f2 >= 0.0);
    CHECK(cc.f2 <= 1.0);
    CHECK(cc.nu_t >= 0.0);
    CHECK(cc.sigma_k > 0.0);
    CHECK(cc.sigma_w > 0.0);
    CHECK(cc.beta_w > 0.0);
}

TEST_CASE("omega wall value follows nu/(beta1 d^2)") {
    TurbulenceConstants c;
    const double nu = 2e-3, d = 0.01;
    CHECK(omega_wall_value(nu, d, c) ==
          doctest::Approx(6.0 * nu / (c.beta_1 * d * d)).epsilon(1e-14));
}

TEST_CASE("production limiter caps k production at 10 beta* k omega") {
    TurbulenceConstants c;
    TurbulenceCellInputs in;
    in.k = 1e-3;
    in.omega = 1.0;
    in.strain_mag = 100.0;  // enormous strain
    in.wall_distance = 1.0;
    in.nu = 1e-5;
    const TurbulenceCellCoeffs cc = evaluate_closure(in, c, TurbulenceModel::SstMenter);
    CHECK(cc.prod_k <= 10.0 * c.beta_star * in.k * in.omega * (1.0 + 1e-12));
}
