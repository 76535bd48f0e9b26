#include "affine/oracles.hpp"

#include <cmath>

namespace affine {
namespace {

void check_cir(const CirParams& p) {
    if (!(p.sigma > 0.0)) throw std::invalid_argument("sigma must be positive");
    if (p.a < 0.0) throw std::invalid_argument("a must be nonnegative");
}

void check_vasicek_shape(const VasicekParams& p) {
    if (p.kappa == 0.0) throw std::invalid_argument("kappa must be nonzero");
    if (p.sigma < 0.0) throw std::invalid_argument("sigma must be nonnegative");
}

void check_breeden(const BreedenParams& p) {
    if (!(p.sigma_v < 0.0)) throw std::invalid_argument("sigma_v must be negative");
    if (!(p.sigma_g > 0.0)) throw std::invalid_argument("sigma_g must be positive");
    if (!(p.kappa_g > 0.0)) throw std::invalid_argument("kappa_g must be positive");
    if (p.a < 0.0) throw std::invalid_argument("a must be nonnegative");
    if (!(p.b > 0.0)) throw std::invalid_argument("b must be positive");
    if (2.0 * p.kappa_v * p.theta_v < p.sigma_v * p.sigma_v)
        throw std::invalid_argument(
            "volatility factor must stay positive: 2 kappa_v theta_v >= sigma_v^2");
}

}  // namespace

CirClosedForm cir_closed_form(const CirParams& p) {
    check_cir(p);
    const double gamma = p.gamma();
    const double delta = p.delta();
    const double sig2 = p.sigma * p.sigma;
    const double disc = p.kappa_p * p.kappa_p + 2.0 * sig2 * delta;
    if (disc < 0.0)
        throw Unsupported("kappa_p^2 + 2 sigma^2 delta < 0: no real fixed point");
    const double theta = std::sqrt(disc);
    const double r_plus = (-p.kappa_p + theta) / sig2;
    const double r_minus = (-p.kappa_p - theta) / sig2;

    CirClosedForm cf;
    cf.kappa_q = p.kappa_p + sig2 * p.u;
    cf.kappa_l = theta;  // L-tilt mean reversion: kappa_p + sigma^2 v
    cf.v = r_plus;
    cf.lambda = gamma + p.a * r_plus;

    const double u = p.u;
    const double a = p.a;
    const double kp = p.kappa_p;
    if (theta == 0.0) {
        // Double root; the flow reaches it only from above.
        if (u < r_plus) throw Unsupported("flow from u explodes (u below the double root)");
        cf.psi_of_t = [=](double t) {
            return r_plus + (u - r_plus) / (1.0 + 0.5 * sig2 * (u - r_plus) * t);
        };
        cf.phi_of_t = [=](double t) {
            return gamma * t + a * r_plus * t +
                   (2.0 * a / sig2) * std::log1p(0.5 * sig2 * (u - r_plus) * t);
        };
        cf.bond_price = [cf, u](double t, double x) {
            return std::exp(-cf.phi_of_t(t) - (cf.psi_of_t(t) - u) * x);
        };
        return cf;
    }
    if (u < r_minus) throw Unsupported("flow from u explodes (u below the smaller root)");
    if (u == r_minus) {
        cf.psi_of_t = [=](double) { return u; };
        cf.phi_of_t = [=](double t) { return (gamma + a * u) * t; };
    } else {
        const double R0 = (u - r_plus) / (u - r_minus);
        cf.psi_of_t = [=](double t) {
            const double w = R0 * std::exp(-theta * t);
            return r_plus + (r_plus - r_minus) * w / (1.0 - w);
        };
        cf.phi_of_t = [=](double t) {
            const double w = R0 * std::exp(-theta * t);
            return gamma * t + a * r_plus * t +
                   (2.0 * a / sig2) * std::log((1.0 - w) / (1.0 - R0));
        };
    }

    // Independent classical route under the risk-neutral tilt: short rate
    // g + h x with state reversion kappa_q; theta is tilt-invariant.
    const double h = delta - 0.5 * sig2 * u * u - kp * u;
    const double g = gamma + a * u;
    const double kq = cf.kappa_q;
    cf.bond_price = [=](double t, double x) {
        const double em = std::exp(-theta * t);
        const double denom = (theta + kq) * (1.0 - em) + 2.0 * theta * em;
        const double B = 2.0 * h * (1.0 - em) / denom;
        const double A_base = 2.0 * theta * std::exp(0.5 * (kq - theta) * t) / denom;
        return std::pow(A_base, 2.0 * a / sig2) * std::exp(-B * x - g * t);
    };
    return cf;
}

AffineModel<double> cir_model(const CirParams& p) {
    check_cir(p);
    AffineModel<double> model;
    model.m = 1;
    model.n = 0;
    model.a = MatD::Zero(1, 1);
    model.alpha = {MatD::Constant(1, 1, p.sigma * p.sigma)};
    model.b = VecD::Constant(1, p.a);
    model.B = MatD::Constant(1, 1, -p.kappa_p);
    VolStructure<double> vs;
    vs.rho = MatD::Constant(1, 1, p.sigma);
    vs.c = VecD::Zero(1);
    vs.kappa = MatD::Constant(1, 1, 1.0);
    model.vol_structure = vs;
    return model;
}

PricingKernelSpec<double> cir_kernel(const CirParams& p) {
    check_cir(p);
    PricingKernelSpec<double> pk;
    pk.gamma = p.gamma();
    pk.u = VecD::Constant(1, p.u);
    pk.delta = VecD::Constant(1, p.delta());
    return pk;
}

double vasicek_bond_B(double kappa, double t) {
    if (kappa == 0.0) throw std::invalid_argument("kappa must be nonzero");
    return -std::expm1(-kappa * t) / kappa;
}

VasicekClosedForm vasicek_closed_form(const VasicekParams& p) {
    check_vasicek_shape(p);
    if (!(p.kappa > 0.0))
        throw std::invalid_argument("closed form needs kappa > 0 (mean reversion)");
    const double gamma = p.gamma();
    const double delta = p.delta();
    const double sig2 = p.sigma * p.sigma;
    const double kappa = p.kappa;

    VasicekClosedForm cf;
    cf.v = delta / kappa;
    cf.theta_q = p.theta_p - sig2 * p.u / kappa;
    cf.theta_l = p.theta_p - sig2 * cf.v / kappa;
    cf.lambda = gamma + kappa * p.theta_p * cf.v - 0.5 * sig2 * cf.v * cf.v;

    const double u = p.u;
    const double v = cf.v;
    cf.psi_of_t = [=](double t) { return v + (u - v) * std::exp(-kappa * t); };
    const double theta_l = cf.theta_l;
    const double lambda = cf.lambda;
    cf.phi_of_t = [=](double t) {
        const double one_me = -std::expm1(-kappa * t);        // 1 - e^{-kt}
        const double one_me2 = -std::expm1(-2.0 * kappa * t); // 1 - e^{-2kt}
        return lambda * t + (u - v) * theta_l * one_me -
               sig2 * (u - v) * (u - v) * one_me2 / (4.0 * kappa);
    };

    // Independent route: affine bond formula under the risk-neutral tilt with
    // short rate g + h x.
    const double h = delta - kappa * u;
    const double g = gamma + kappa * p.theta_p * u - 0.5 * sig2 * u * u;
    const double theta_q = cf.theta_q;
    cf.bond_price = [=](double t, double x) {
        const double B = vasicek_bond_B(kappa, t);
        const double lnA = (h * theta_q - h * h * sig2 / (2.0 * kappa * kappa)) * (B - t) -
                           h * h * sig2 * B * B / (4.0 * kappa);
        return std::exp(lnA - B * h * x - g * t);
    };
    return cf;
}

AffineModel<double> vasicek_model(const VasicekParams& p) {
    check_vasicek_shape(p);
    AffineModel<double> model;
    model.m = 0;
    model.n = 1;
    model.a = MatD::Constant(1, 1, p.sigma * p.sigma);
    model.b = VecD::Constant(1, p.kappa * p.theta_p);
    model.B = MatD::Constant(1, 1, -p.kappa);
    VolStructure<double> vs;
    vs.rho = MatD::Constant(1, 1, p.sigma);
    vs.c = VecD::Constant(1, 1.0);
    vs.kappa = MatD::Zero(1, 1);
    model.vol_structure = vs;
    return model;
}

PricingKernelSpec<double> vasicek_kernel(const VasicekParams& p) {
    check_vasicek_shape(p);
    PricingKernelSpec<double> pk;
    pk.gamma = p.gamma();
    pk.u = VecD::Constant(1, p.u);
    pk.delta = VecD::Constant(1, p.delta());
    return pk;
}

BreedenClosedForm breeden_closed_form(const BreedenParams& p) {
    check_breeden(p);
    const double disc =
        p.kappa_v * p.kappa_v + 2.0 * p.a * p.kappa_v * p.sigma_v;
    if (disc < 0.0)
        throw Unsupported("kappa_v^2 + 2 a kappa_v sigma_v < 0: no real fixed point");
    const double root = std::sqrt(disc);
    if (!(p.kappa_v + root + p.a * p.sigma_v > 0.0))
        throw Unsupported("kappa_v + sqrt(kappa_v^2 + 2 a kappa_v sigma_v) + a sigma_v <= 0: "
                          "fixed point not guaranteed");

    BreedenClosedForm cf;
    cf.v1 = (root - p.kappa_v) / (p.sigma_v * p.sigma_v);
    cf.v2 = p.a * (1.0 / p.kappa_g + p.sigma_c / p.sigma_g);
    cf.gamma = p.b - p.a * p.kappa_v * p.theta_v / p.sigma_v -
               p.a * p.sigma_c * p.kappa_g * p.theta_g / p.sigma_g;
    cf.lambda = cf.gamma - 0.5 * p.sigma_g * p.sigma_g * cf.v2 * cf.v2 +
                p.kappa_v * p.theta_v * cf.v1 + p.kappa_g * p.theta_g * cf.v2;
    cf.l_vol_reversion = root;
    cf.l_growth_level = p.theta_g - p.a * p.sigma_g * p.sigma_g / (p.kappa_g * p.kappa_g) -
                        p.a * p.sigma_c * p.sigma_g / p.kappa_g;
    return cf;
}

AffineModel<double> breeden_model(const BreedenParams& p) {
    check_breeden(p);
    AffineModel<double> model;
    model.m = 1;
    model.n = 1;
    model.a = MatD::Zero(2, 2);
    model.a(1, 1) = p.sigma_g * p.sigma_g;
    MatD alpha1 = MatD::Zero(2, 2);
    alpha1(0, 0) = p.sigma_v * p.sigma_v;
    model.alpha = {alpha1};
    model.b = VecD(2);
    model.b << p.kappa_v * p.theta_v, p.kappa_g * p.theta_g;
    model.B = MatD::Zero(2, 2);
    model.B(0, 0) = -p.kappa_v;
    model.B(1, 1) = -p.kappa_g;
    VolStructure<double> vs;
    vs.rho = MatD::Zero(2, 2);
    vs.rho(0, 0) = p.sigma_v;
    vs.rho(1, 1) = p.sigma_g;
    vs.c = VecD(2);
    vs.c << 0.0, 1.0;
    vs.kappa = MatD::Zero(2, 2);
    vs.kappa(0, 0) = 1.0;
    model.vol_structure = vs;
    return model;
}

PricingKernelSpec<double> breeden_kernel(const BreedenParams& p) {
    check_breeden(p);
    PricingKernelSpec<double> pk;
    pk.gamma = p.b - p.a * p.kappa_v * p.theta_v / p.sigma_v -
               p.a * p.sigma_c * p.kappa_g * p.theta_g / p.sigma_g;
    pk.u = VecD(2);
    pk.u << p.a / p.sigma_v, p.a * p.sigma_c / p.sigma_g;
    pk.delta = VecD(2);
    pk.delta << p.a * p.kappa_v / p.sigma_v,
        p.a + p.a * p.sigma_c * p.kappa_g / p.sigma_g;
    return pk;
}

std::pair<AffineModel<double>, PricingKernelSpec<double>> bhs_model() {
    AffineModel<double> model;
    model.m = 1;
    model.n = 2;
    model.time_unit = "months";
    model.b = VecD(3);
    model.b << 0.013, 0.0, -0.0035;
    model.B = MatD::Zero(3, 3);
    model.B(0, 0) = -0.013;
    model.B(1, 1) = -0.021;
    // Unrounded X^1 loading: -(half the squared kernel volatility row minus the
    // short-rate slope 0.00057798); it rounds to the published -0.0118.
    model.B(2, 0) = -0.01175254;
    model.B(2, 1) = -1.0;

    MatD rho(3, 3);
    rho << -0.038, 0.0, 0.0,
            0.0, 0.00034, 0.0,
           -0.0298, -0.1330, -0.0780;
    model.a = MatD::Zero(3, 3);
    model.alpha = {MatD(rho * rho.transpose())};

    VolStructure<double> vs;
    vs.rho = rho;
    vs.c = VecD::Zero(3);
    vs.kappa = MatD::Zero(3, 3);
    vs.kappa.col(0).setOnes();  // every factor is x^1
    model.vol_structure = vs;

    PricingKernelSpec<double> pk;
    pk.gamma = 0.0;
    pk.u = VecD(3);
    pk.u << 0.0, 0.0, -1.0;
    pk.delta = VecD::Zero(3);
    return {model, pk};
}

BhsFixedPoint bhs_fixed_point() {
    auto [model, pk] = bhs_model();
    const MatD& alpha = model.alpha[0];
    const VecD beta = model.B.col(0);

    BhsFixedPoint fp;
    fp.v = VecD(3);
    fp.v(2) = pk.u(2);                              // frozen coordinate
    fp.v(1) = -model.B(2, 1) * fp.v(2) / model.B(1, 1);  // linear Gaussian block
    // Quadratic in v1 from the square-root component of the stationarity system.
    const double c2 = -0.5 * alpha(0, 0);
    const double c1 = -(alpha(0, 1) * fp.v(1) + alpha(0, 2) * fp.v(2)) + beta(0);
    const double c0 = -0.5 * (alpha(1, 1) * fp.v(1) * fp.v(1) +
                              2.0 * alpha(1, 2) * fp.v(1) * fp.v(2) +
                              alpha(2, 2) * fp.v(2) * fp.v(2)) +
                      beta(1) * fp.v(1) + beta(2) * fp.v(2) + pk.delta(0);
    const double disc = c1 * c1 - 4.0 * c2 * c0;
    if (disc < 0.0) throw Unsupported("no real fixed point");
    const double r1 = (-c1 + std::sqrt(disc)) / (2.0 * c2);
    const double r2 = (-c1 - std::sqrt(disc)) / (2.0 * c2);
    fp.v(0) = std::max(r1, r2);  // the flow converges to the larger root
    fp.lambda = pk.gamma + model.b.dot(fp.v);  // a_JJ = 0 here
    return fp;
}

}  // namespace affine
