#pragma once

#include "affine/model.hpp"

#include <functional>
#include <optional>
#include <utility>

namespace affine {

// A closed form's validity condition fails; the quantity is not defined for
// these parameters (distinct from numerical failure).
class Unsupported : public std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Square-root short-rate example.  Default kernel coefficients make the short
// rate coincide with the state: gamma = -a u, delta = 1 + u kappa_p + u^2 sigma^2/2.
struct CirParams {
    double a = 0.02;  // >= 0; a = 0 gives the absorbing degenerate branch
    double kappa_p = 0.5;
    double sigma = 0.2;
    double u = 0.0;
    std::optional<double> gamma_override;
    std::optional<double> delta_override;

    double gamma() const { return gamma_override ? *gamma_override : -a * u; }
    double delta() const {
        return delta_override ? *delta_override
                              : 1.0 + u * kappa_p + 0.5 * u * u * sigma * sigma;
    }
};

struct CirClosedForm {
    double v = 0.0;
    double lambda = 0.0;
    double kappa_q = 0.0;
    double kappa_l = 0.0;
    std::function<double(double)> psi_of_t;
    std::function<double(double)> phi_of_t;
    std::function<double(double, double)> bond_price;  // (t, x)
};

CirClosedForm cir_closed_form(const CirParams& p);
AffineModel<double> cir_model(const CirParams& p);
PricingKernelSpec<double> cir_kernel(const CirParams& p);

// Gaussian short-rate example.  Defaults give r(x) = x: delta = 1 + u kappa,
// gamma = u^2 sigma^2/2 - u kappa theta_p.
struct VasicekParams {
    double kappa = 0.5;
    double theta_p = 0.05;
    double sigma = 0.02;
    double u = 0.0;
    std::optional<double> gamma_override;
    std::optional<double> delta_override;

    double gamma() const {
        return gamma_override ? *gamma_override
                              : 0.5 * sigma * sigma * u * u - u * kappa * theta_p;
    }
    double delta() const { return delta_override ? *delta_override : 1.0 + u * kappa; }
};

struct VasicekClosedForm {
    double v = 0.0;
    double lambda = 0.0;
    double theta_q = 0.0;
    double theta_l = 0.0;
    std::function<double(double)> psi_of_t;
    std::function<double(double)> phi_of_t;
    std::function<double(double, double)> bond_price;  // (t, x)
};

// Requires kappa > 0; the non-mean-reverting case has no fixed point.
VasicekClosedForm vasicek_closed_form(const VasicekParams& p);
// The model itself is well defined for any kappa (kappa < 0 is the
// non-mean-reverting Gaussian used as the negative example).
AffineModel<double> vasicek_model(const VasicekParams& p);
PricingKernelSpec<double> vasicek_kernel(const VasicekParams& p);

// (1 - e^{-kappa t})/kappa for any kappa != 0; diverges as t grows when kappa < 0.
double vasicek_bond_B(double kappa, double t);

// Consumption-based two-factor example: square-root volatility factor X^1 and
// Gaussian growth factor X^2, kernel from power utility over consumption.
struct BreedenParams {
    double kappa_v = 0.1;
    double theta_v = 1.0;
    double sigma_v = -0.05;  // < 0
    double kappa_g = 0.2;
    double theta_g = 0.02;
    double sigma_g = 0.01;  // > 0
    double sigma_c = 0.005;
    double a = 0.5;  // risk aversion; >= 0
    double b = 0.001;
};

struct BreedenClosedForm {
    double v1 = 0.0;
    double v2 = 0.0;
    double lambda = 0.0;
    double gamma = 0.0;  // kernel drift rate implied by the consumption kernel
    // Dynamics under the long forward measure: the volatility factor mean
    // reverts at sqrt(kappa_v^2 + 2 a kappa_v sigma_v) and the growth factor's
    // long-run level shifts to theta_g - a sigma_g^2/kappa_g^2 - a sigma_c sigma_g/kappa_g.
    double l_vol_reversion = 0.0;
    double l_growth_level = 0.0;
};

// Throws Unsupported when the fixed point is not guaranteed, i.e. when
// kappa_v^2 + 2 a kappa_v sigma_v < 0 or
// kappa_v + sqrt(kappa_v^2 + 2 a kappa_v sigma_v) + a sigma_v <= 0.
BreedenClosedForm breeden_closed_form(const BreedenParams& p);
AffineModel<double> breeden_model(const BreedenParams& p);
PricingKernelSpec<double> breeden_kernel(const BreedenParams& p);

// Three-factor log-kernel example, monthly time unit: square-root factor X^1
// drives every volatility, Gaussian X^2 feeds X^3 = log of the kernel's state
// integrand.  The X^1 drift loading of the log kernel is stored unrounded so
// the implied short-rate slope is -0.00057798 exactly.
std::pair<AffineModel<double>, PricingKernelSpec<double>> bhs_model();

struct BhsFixedPoint {
    VecD v;
    double lambda = 0.0;
};

// Fixed point of the bhs_model kernel from the scalar quadratic in v_1 after
// pinning v_3 = u_3 and solving the Gaussian block; independent of the solver.
BhsFixedPoint bhs_fixed_point();

}  // namespace affine
