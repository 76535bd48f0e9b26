#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "affine/oracles.hpp"
#include "affine/riccati.hpp"

#include <cmath>

using namespace affine;

namespace {

PricingKernelSpecD zero_kernel(Eigen::Index d) {
    PricingKernelSpecD pk;
    pk.gamma = 0.0;
    pk.u = VecD::Zero(d);
    pk.delta = VecD::Zero(d);
    return pk;
}

}  // namespace

TEST_CASE("zero kernel is stationary") {
    const auto model = cir_model({});
    const auto sol = integrate(model, zero_kernel(1), 10.0);
    for (std::size_t k = 0; k < sol.grid.size(); ++k) {
        CHECK(sol.phi(static_cast<Eigen::Index>(k)) == 0.0);
        CHECK(sol.psi(0, static_cast<Eigen::Index>(k)) == 0.0);
    }
    CHECK(sol.phi_at(7.31) == 0.0);
    CHECK(sol.psi_at(7.31)(0) == 0.0);
}

TEST_CASE("rhs reproduces the hand-evaluated examples") {
    const auto model = cir_model({});
    const auto zero = riccati_rhs(model, zero_kernel(1), VecD(VecD::Zero(1)));
    CHECK(zero.phi_dot == 0.0);
    CHECK(zero.psi_dot(0) == 0.0);

    // delta is built as 1 + u kappa + u^2 sigma^2/2, so the rhs at psi = u is 1.
    for (double u : {0.0, 1.5, -2.0}) {
        CirParams p;
        p.u = u;
        const auto at_u = riccati_rhs(cir_model(p), cir_kernel(p), cir_kernel(p).u);
        CHECK(at_u.psi_dot(0) == doctest::Approx(1.0).epsilon(1e-14));
    }

    const auto [bhs, bhs_pk] = bhs_model();
    const auto at_u = riccati_rhs(bhs, bhs_pk, bhs_pk.u);
    CHECK(at_u.psi_dot(1) == 1.0);
    CHECK(at_u.psi_dot(2) == 0.0);
}

TEST_CASE("initial conditions are stored exactly") {
    CirParams p;
    p.u = 1.5;
    const auto sol = integrate(cir_model(p), cir_kernel(p), 5.0);
    CHECK(sol.grid[0] == 0.0);
    CHECK(sol.phi(0) == 0.0);
    CHECK(sol.psi(0, 0) == 1.5);
}

TEST_CASE("stored derivatives match the rhs at every node") {
    const auto [model, pk] = bhs_model();
    const auto sol = integrate(model, pk, 50.0);
    for (std::size_t k = 0; k < sol.grid.size(); ++k) {
        const auto idx = static_cast<Eigen::Index>(k);
        const VecD psi_k = sol.psi.col(idx);
        const auto rhs = riccati_rhs(model, pk, psi_k);
        CHECK(std::abs(rhs.phi_dot - sol.phi_dot(idx)) < 1e-13);
        CHECK((rhs.psi_dot - sol.psi_dot.col(idx)).cwiseAbs().maxCoeff() < 1e-13);
    }
}

TEST_CASE("integration matches the closed forms to 1e-8") {
    for (double u : {0.0, 1.5}) {
        CirParams p;
        p.u = u;
        const auto cf = cir_closed_form(p);
        const auto sol = integrate(cir_model(p), cir_kernel(p), 50.0);
        double worst = 0.0;
        for (int k = 1; k <= 100; ++k) {
            const double t = 0.5 * k;
            worst = std::max(worst, std::abs(sol.phi_at(t) - cf.phi_of_t(t)));
            worst = std::max(worst, std::abs(sol.psi_at(t)(0) - cf.psi_of_t(t)));
        }
        CHECK(worst < 1e-8);
    }
    for (double u : {0.0, 0.5}) {
        VasicekParams p;
        p.u = u;
        const auto cf = vasicek_closed_form(p);
        const auto sol = integrate(vasicek_model(p), vasicek_kernel(p), 50.0);
        double worst = 0.0;
        for (int k = 1; k <= 100; ++k) {
            const double t = 0.5 * k;
            worst = std::max(worst, std::abs(sol.phi_at(t) - cf.phi_of_t(t)));
            worst = std::max(worst, std::abs(sol.psi_at(t)(0) - cf.psi_of_t(t)));
        }
        CHECK(worst < 1e-8);
    }
}

TEST_CASE("tighter tolerances refine toward the same solution") {
    const CirParams p;
    IntegrateOptions loose;
    loose.abs_tol = loose.rel_tol = 1e-8;
    IntegrateOptions tight;
    tight.abs_tol = tight.rel_tol = 1e-12;
    const auto sol_loose = integrate(cir_model(p), cir_kernel(p), 20.0, loose);
    const auto sol_tight = integrate(cir_model(p), cir_kernel(p), 20.0, tight);
    CHECK(sol_loose.grid.size() < sol_tight.grid.size());
    for (double t : {1.0, 7.3, 19.9})
        CHECK(std::abs(sol_loose.phi_at(t) - sol_tight.phi_at(t)) < 1e-6);
}

TEST_CASE("the transform flow settles at the fixed point") {
    const CirParams p;
    const auto cf = cir_closed_form(p);
    const auto sol = integrate(cir_model(p), cir_kernel(p), 100.0);
    CHECK(std::abs(sol.psi_at(100.0)(0) - cf.v) < 1e-8);
}

TEST_CASE("bond prices") {
    CirParams p;
    p.u = 0.7;
    const auto cf = cir_closed_form(p);
    const auto model = cir_model(p);
    const auto pk = cir_kernel(p);
    const auto sol = integrate(model, pk, 30.0);

    const VecD x0 = VecD::Zero(1);
    CHECK(bond_price(sol, pk, 0.0, x0) == 1.0);
    for (double t : {1.0, 10.0, 29.5})
        for (double x : {0.0, 0.1}) {
            const VecD xv = VecD::Constant(1, x);
            const double numeric = bond_price(sol, pk, t, xv);
            CHECK(numeric > 0.0);
            CHECK(numeric == doctest::Approx(cf.bond_price(t, x)).epsilon(1e-8));
        }

    const VecD x = VecD::Constant(1, 0.04);
    CHECK_THROWS_AS(bond_price(sol, pk, 31.0, x), std::out_of_range);
    CHECK_THROWS_AS(bond_price(sol, pk, -0.5, x), std::out_of_range);
}

TEST_CASE("flow property of the transform") {
    const auto [model, pk] = bhs_model();
    const auto sol = integrate(model, pk, 15.0);

    PricingKernelSpecD shifted = pk;
    shifted.u = sol.psi_at(5.0);
    const auto sol2 = integrate(model, shifted, 10.0);

    // The restart point psi(5) is dense-output interpolated, so allow a little
    // beyond the integrator tolerance.
    CHECK((sol2.psi_at(10.0) - sol.psi_at(15.0)).cwiseAbs().maxCoeff() < 5e-9);
    CHECK(sol.phi_at(15.0) ==
          doctest::Approx(sol.phi_at(5.0) + sol2.phi_at(10.0)).epsilon(5e-9));
}

TEST_CASE("quadratic blow-down is flagged as a finite explosion") {
    CirParams p;
    p.delta_override = -10.0;  // psi' < 0 everywhere: psi reaches -inf in finite time
    bool thrown = false;
    try {
        integrate(cir_model(p), cir_kernel(p), 100.0);
    } catch (const FiniteExplosion& e) {
        thrown = true;
        CHECK(e.superlinear());
        CHECK(e.t() > 0.0);
        CHECK(e.t() < 100.0);
    }
    CHECK(thrown);
}

TEST_CASE("unbounded exponential growth hits the norm guard without superlinearity") {
    VasicekParams p;
    p.kappa = -0.1;
    bool thrown = false;
    try {
        integrate(vasicek_model(p), vasicek_kernel(p), 500.0);
    } catch (const FiniteExplosion& e) {
        thrown = true;
        CHECK_FALSE(e.superlinear());
        CHECK(e.t() > 100.0);  // needs e^{0.1 t} ~ 1e8
    }
    CHECK(thrown);
}

TEST_CASE("yield curve endpoints") {
    const CirParams p;
    const auto model = cir_model(p);
    const auto pk = cir_kernel(p);
    const auto sol = integrate(model, pk, 1000.0);
    const auto cf = cir_closed_form(p);
    const VecD x = VecD::Constant(1, 0.04);

    const auto points = yield_curve(sol, pk, x, {1e-4, 1.0, 1000.0});
    // Short end: the yield approaches the short rate delta^T x (u = 0, gamma = 0).
    CHECK(points[0].yield == doctest::Approx(0.04).epsilon(1e-3));
    // Long end: the yield approaches the eigenvalue.
    CHECK(std::abs(points[2].yield - cf.lambda) < 1e-3);
    for (const auto& pt : points) CHECK(pt.price > 0.0);

    CHECK_THROWS_AS(yield_curve(sol, pk, x, {0.0}), std::invalid_argument);
    CHECK_THROWS_AS(yield_curve(sol, pk, x, {-1.0}), std::invalid_argument);
}

TEST_CASE("max_step bounds the node spacing") {
    IntegrateOptions opts;
    opts.max_step = 0.25;
    const CirParams p;
    const auto sol = integrate(cir_model(p), cir_kernel(p), 10.0, opts);
    for (std::size_t k = 1; k < sol.grid.size(); ++k)
        CHECK(sol.grid[k] - sol.grid[k - 1] <= 0.25 + 1e-12);
}

TEST_CASE("integrate validates its inputs") {
    const CirParams p;
    CHECK_THROWS_AS(integrate(cir_model(p), cir_kernel(p), 0.0), std::invalid_argument);
    CHECK_THROWS_AS(integrate(cir_model(p), cir_kernel(p), -2.0), std::invalid_argument);
    IntegrateOptions bad;
    bad.abs_tol = 0.0;
    CHECK_THROWS_AS(integrate(cir_model(p), cir_kernel(p), 1.0, bad),
                    std::invalid_argument);
}
