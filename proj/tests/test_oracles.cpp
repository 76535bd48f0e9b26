#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "affine/oracles.hpp"
#include "affine/riccati.hpp"

#include <cmath>
#include <functional>

using namespace affine;

namespace {

// The closed forms must solve phi' = rhs_phi(psi), psi' = rhs_psi(psi); checked
// against centered differences, whose error here is far below the tolerance.
void check_solves_ode(const AffineModelD& model, const PricingKernelSpecD& pk,
                      const std::function<double(double)>& psi,
                      const std::function<double(double)>& phi) {
    const double h = 1e-5;
    for (int k = 1; k <= 20; ++k) {
        const double t = 0.25 * k;
        const VecD p = VecD::Constant(1, psi(t));
        const auto rhs = riccati_rhs(model, pk, p);
        const double dpsi = (psi(t + h) - psi(t - h)) / (2.0 * h);
        const double dphi = (phi(t + h) - phi(t - h)) / (2.0 * h);
        CHECK(std::abs(dpsi - rhs.psi_dot(0)) < 2e-7 * (1.0 + std::abs(rhs.psi_dot(0))));
        CHECK(std::abs(dphi - rhs.phi_dot) < 2e-7 * (1.0 + std::abs(rhs.phi_dot)));
    }
}

void check_bond_routes_agree(const CirClosedForm& cf, double u) {
    for (double t : {0.5, 2.0, 10.0, 30.0})
        for (double x : {0.0, 0.04, 0.2}) {
            const double via_transform =
                std::exp(-cf.phi_of_t(t) - (cf.psi_of_t(t) - u) * x);
            CHECK(cf.bond_price(t, x) ==
                  doctest::Approx(via_transform).epsilon(1e-10));
        }
}

}  // namespace

TEST_CASE("cir closed form freezes the default fixed point") {
    const CirParams p;
    const auto cf = cir_closed_form(p);
    // v = (sqrt(kappa^2 + 2 sigma^2 delta) - kappa) / sigma^2 with delta = 1
    CHECK(cf.v == doctest::Approx(1.8614066163450715).epsilon(1e-13));
    CHECK(cf.lambda == doctest::Approx(0.0372281323269014).epsilon(1e-13));
    CHECK(cf.kappa_q == 0.5);
    CHECK(cf.kappa_l == doctest::Approx(std::sqrt(0.33)).epsilon(1e-15));
    CHECK(cf.kappa_l > cf.kappa_q);  // the L-tilt reverts faster than the Q-tilt

    // The stationarity system at v evaluates to zero and its phi-rate is lambda.
    const auto model = cir_model(p);
    const auto pk = cir_kernel(p);
    const VecD v_vec = VecD::Constant(1, cf.v);
    const auto at_v = riccati_rhs(model, pk, v_vec);
    CHECK(std::abs(at_v.psi_dot(0)) < 1e-14);
    CHECK(at_v.phi_dot == doctest::Approx(cf.lambda).epsilon(1e-13));
}

TEST_CASE("cir closed form solves the transform ode") {
    for (double u : {0.0, 1.5, -3.0}) {
        CirParams p;
        p.u = u;
        const auto cf = cir_closed_form(p);
        CHECK(std::abs(cf.psi_of_t(0.0) - u) < 1e-14);
        CHECK(cf.phi_of_t(0.0) == 0.0);
        check_solves_ode(cir_model(p), cir_kernel(p), cf.psi_of_t, cf.phi_of_t);
        // The gap to v shrinks monotonically and is numerically closed by t = 50.
        for (double t = 0.0; t < 45.1; t += 5.0) {
            const double now = std::abs(cf.psi_of_t(t) - cf.v);
            const double later = std::abs(cf.psi_of_t(t + 5.0) - cf.v);
            CHECK((later < now || now < 1e-12));
        }
        CHECK(std::abs(cf.psi_of_t(50.0) - cf.v) < 1e-9);
    }
}

TEST_CASE("cir bond price: classical route equals transform route") {
    for (double u : {0.0, 0.7}) {
        CirParams p;
        p.u = u;
        check_bond_routes_agree(cir_closed_form(p), u);
    }
}

TEST_CASE("cir degenerate a = 0 has zero eigenvalue") {
    CirParams p;
    p.a = 0.0;
    const auto cf = cir_closed_form(p);
    CHECK(cf.lambda == 0.0);
    CHECK(cf.v == doctest::Approx(1.8614066163450715).epsilon(1e-13));
    // phi carries the state-independent part; with a = 0 it vanishes.
    CHECK(cf.phi_of_t(25.0) == 0.0);
}

TEST_CASE("cir flow started at the smaller root stays there") {
    // Exact dyadic setup: -1/2 sigma^2 psi^2 - kappa psi + delta has roots -2, -4.
    CirParams p;
    p.kappa_p = 0.75;
    p.sigma = 0.5;
    p.u = -4.0;
    p.delta_override = -1.0;
    const auto cf = cir_closed_form(p);
    CHECK(cf.v == -2.0);  // generic flow limit; the start sits at the other root
    CHECK(cf.psi_of_t(7.3) == -4.0);
    // gamma defaults to -a u, so the phi slope gamma + a u cancels exactly.
    CHECK(cf.phi_of_t(7.3) == 0.0);

    p.u = -2.0;  // started at the larger root: constant as well
    const auto top = cir_closed_form(p);
    CHECK(top.psi_of_t(3.1) == -2.0);
}

TEST_CASE("cir double-root branch") {
    // disc = kappa^2 + 2 sigma^2 delta = 1/4 - 1/4 = 0 exactly.
    CirParams p;
    p.kappa_p = 0.5;
    p.sigma = 0.5;
    p.delta_override = -0.5;
    const auto cf = cir_closed_form(p);
    CHECK(cf.kappa_l == 0.0);
    CHECK(cf.v == -2.0);
    CHECK(cf.psi_of_t(0.0) == 0.0);
    check_solves_ode(cir_model(p), cir_kernel(p), cf.psi_of_t, cf.phi_of_t);
    // Algebraic (not exponential) settling toward the double root.
    CHECK(cf.psi_of_t(1e6) == doctest::Approx(-2.0).epsilon(1e-4));

    p.u = -3.0;  // below the double root the flow explodes in finite time
    CHECK_THROWS_AS(cir_closed_form(p), Unsupported);
}

TEST_CASE("cir rejects parameters without a real fixed point") {
    CirParams p;
    p.delta_override = -10.0;  // kappa^2 + 2 sigma^2 delta < 0
    CHECK_THROWS_AS(cir_closed_form(p), Unsupported);

    CirParams below;  // roots -2, -4; the flow from u = -5 < r_minus explodes
    below.kappa_p = 0.75;
    below.sigma = 0.5;
    below.delta_override = -1.0;
    below.u = -5.0;
    CHECK_THROWS_AS(cir_closed_form(below), Unsupported);

    CirParams bad;
    bad.sigma = 0.0;
    CHECK_THROWS_AS(cir_closed_form(bad), std::invalid_argument);
    bad.sigma = 0.2;
    bad.a = -0.01;
    CHECK_THROWS_AS(cir_model(bad), std::invalid_argument);
}

TEST_CASE("cir transition-independent kernel recovers v = 0") {
    // u solving delta(u) = 0 makes the kernel's eigenfunction constant, so the
    // long-term tilt is trivial and the fixed point sits at the origin.
    CirParams p;
    REQUIRE(p.kappa_p * p.kappa_p >= 2.0 * p.sigma * p.sigma);
    p.u = (-p.kappa_p + std::sqrt(p.kappa_p * p.kappa_p - 2.0 * p.sigma * p.sigma)) /
          (p.sigma * p.sigma);
    CHECK(std::abs(p.delta()) < 1e-14);
    const auto cf = cir_closed_form(p);
    CHECK(std::abs(cf.v) < 1e-12);
    CHECK(cf.lambda == doctest::Approx(p.gamma()).epsilon(1e-12));
}

TEST_CASE("vasicek closed form freezes the fixed point") {
    const VasicekParams p;
    const auto cf = vasicek_closed_form(p);
    CHECK(cf.v == 2.0);  // delta / kappa = 1 / 0.5
    CHECK(cf.lambda == doctest::Approx(0.0492).epsilon(1e-14));
    CHECK(cf.theta_q == 0.05);
    CHECK(cf.theta_l == doctest::Approx(0.0484).epsilon(1e-14));

    const auto model = vasicek_model(p);
    const auto pk = vasicek_kernel(p);
    const VecD v_vec = VecD::Constant(1, cf.v);
    const auto at_v = riccati_rhs(model, pk, v_vec);
    CHECK(std::abs(at_v.psi_dot(0)) < 1e-15);
    CHECK(at_v.phi_dot == doctest::Approx(cf.lambda).epsilon(1e-14));
}

TEST_CASE("vasicek closed form solves the transform ode") {
    for (double u : {0.0, 0.5, -2.0}) {
        VasicekParams p;
        p.u = u;
        const auto cf = vasicek_closed_form(p);
        CHECK(cf.psi_of_t(0.0) == u);
        CHECK(cf.phi_of_t(0.0) == 0.0);
        check_solves_ode(vasicek_model(p), vasicek_kernel(p), cf.psi_of_t,
                         cf.phi_of_t);
    }
}

TEST_CASE("vasicek bond price: classical route equals transform route") {
    for (double u : {0.0, 0.5}) {
        VasicekParams p;
        p.u = u;
        const auto cf = vasicek_closed_form(p);
        for (double t : {0.5, 2.0, 10.0, 30.0})
            for (double x : {-0.02, 0.05, 0.2}) {
                const double via_transform =
                    std::exp(-cf.phi_of_t(t) - (cf.psi_of_t(t) - u) * x);
                CHECK(cf.bond_price(t, x) ==
                      doctest::Approx(via_transform).epsilon(1e-10));
            }
    }
}

TEST_CASE("non-mean-reverting gaussian model builds but has no closed form") {
    VasicekParams p;
    p.kappa = -0.1;
    CHECK_THROWS_AS(vasicek_closed_form(p), std::invalid_argument);
    const auto model = vasicek_model(p);
    CHECK(validate_admissibility(model).passed);
    // The bond loading explodes with maturity instead of flattening.
    CHECK(vasicek_bond_B(-0.1, 1000.0) > 1e10);
    CHECK(vasicek_bond_B(0.5, 1e9) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK_THROWS_AS(vasicek_bond_B(0.0, 1.0), std::invalid_argument);
}

TEST_CASE("breeden closed form freezes the preset") {
    const BreedenParams p;
    const auto cf = breeden_closed_form(p);
    CHECK(cf.v1 == doctest::Approx(-11.715728752538099).epsilon(1e-13));
    CHECK(cf.v2 == 2.75);
    CHECK(cf.gamma == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(cf.lambda == doctest::Approx(-0.16095100025381).epsilon(1e-12));
    CHECK(cf.l_vol_reversion == doctest::Approx(std::sqrt(0.005)).epsilon(1e-15));
    CHECK(cf.l_growth_level == doctest::Approx(0.018625).epsilon(1e-13));

    // Builders and closed form agree: the stationarity system vanishes at
    // (v1, v2) and its phi-rate is lambda.
    const auto model = breeden_model(p);
    const auto pk = breeden_kernel(p);
    CHECK(pk.gamma == doctest::Approx(cf.gamma).epsilon(1e-14));
    VecD v(2);
    v << cf.v1, cf.v2;
    const auto at_v = riccati_rhs(model, pk, v);
    CHECK(std::abs(at_v.psi_dot(0)) < 1e-14);
    CHECK(std::abs(at_v.psi_dot(1)) < 1e-14);
    CHECK(at_v.phi_dot == doctest::Approx(cf.lambda).epsilon(1e-12));
}

TEST_CASE("breeden rejects risk aversion beyond the existence bound") {
    BreedenParams p;
    p.a = 2.0;  // kappa_v^2 + 2 a kappa_v sigma_v = 0.01 - 0.02 < 0
    CHECK_THROWS_AS(breeden_closed_form(p), Unsupported);

    BreedenParams bad;
    bad.sigma_v = 0.05;
    CHECK_THROWS_AS(breeden_closed_form(bad), std::invalid_argument);
    CHECK_THROWS_AS(breeden_model(bad), std::invalid_argument);

    BreedenParams feller;
    feller.sigma_v = -0.9;  // 2 kappa_v theta_v < sigma_v^2
    CHECK_THROWS_AS(breeden_model(feller), std::invalid_argument);
}

TEST_CASE("bhs fixed point oracle matches the published values") {
    const auto fp = bhs_fixed_point();
    CHECK(fp.v(2) == -1.0);
    CHECK(fp.v(1) == doctest::Approx(47.61904761904762).epsilon(1e-15));
    CHECK(std::abs(fp.v(0) - (-0.2449)) < 5e-4);
    CHECK(std::abs(fp.lambda - 0.0003163) < 1e-6);

    // Independent residual check through the rhs evaluator.
    const auto [model, pk] = bhs_model();
    const auto at_v = riccati_rhs(model, pk, fp.v);
    CHECK(at_v.psi_dot.cwiseAbs().maxCoeff() < 1e-15);
    CHECK(at_v.phi_dot == doctest::Approx(fp.lambda).epsilon(1e-13));
}

TEST_CASE("bhs model matches its published building blocks") {
    const auto [model, pk] = bhs_model();
    CHECK(model.time_unit == "months");
    CHECK(model.m == 1);
    CHECK(model.n == 2);
    // Total squared volatility of the log kernel row and the implied
    // short-rate slope at u.
    CHECK(model.alpha[0](2, 2) == doctest::Approx(0.02466104).epsilon(1e-12));
    const auto at_u = riccati_rhs(model, pk, pk.u);
    CHECK(at_u.psi_dot(0) == doctest::Approx(-0.00057798).epsilon(1e-10));
    CHECK(at_u.psi_dot(1) == 1.0);
    CHECK(at_u.psi_dot(2) == 0.0);
    CHECK(at_u.phi_dot == doctest::Approx(0.0035).epsilon(1e-14));
}

TEST_CASE("example models pass admissibility") {
    CHECK(validate_admissibility(cir_model({})).passed);
    CHECK(validate_admissibility(vasicek_model({})).passed);
    CHECK(validate_admissibility(breeden_model({})).passed);
    CHECK(validate_admissibility(bhs_model().first).passed);
    VasicekParams nonrev;
    nonrev.kappa = -0.1;
    CHECK(validate_admissibility(vasicek_model(nonrev)).passed);
}
