#include "affine/riccati.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace affine {
namespace {

// Dormand-Prince 5(4) tableau (autonomous RHS, so the c abscissae drop out).
constexpr double a21 = 0.2;
constexpr double a31 = 3.0 / 40.0, a32 = 9.0 / 40.0;
constexpr double a41 = 44.0 / 45.0, a42 = -56.0 / 15.0, a43 = 32.0 / 9.0;
constexpr double a51 = 19372.0 / 6561.0, a52 = -25360.0 / 2187.0,
                 a53 = 64448.0 / 6561.0, a54 = -212.0 / 729.0;
constexpr double a61 = 9017.0 / 3168.0, a62 = -355.0 / 33.0,
                 a63 = 46732.0 / 5247.0, a64 = 49.0 / 176.0,
                 a65 = -5103.0 / 18656.0;
constexpr double a71 = 35.0 / 384.0, a73 = 500.0 / 1113.0, a74 = 125.0 / 192.0,
                 a75 = -2187.0 / 6784.0, a76 = 11.0 / 84.0;
// Difference between the 5th-order solution and the embedded 4th-order one.
constexpr double e1 = 71.0 / 57600.0, e3 = -71.0 / 16695.0, e4 = 71.0 / 1920.0,
                 e5 = -17253.0 / 339200.0, e6 = 22.0 / 525.0, e7 = -1.0 / 40.0;

constexpr double blowup_norm = 1e8;
constexpr double safety = 0.9;
constexpr double shrink_min = 0.2;
constexpr double grow_max = 10.0;

std::string explosion_message(double t, bool superlinear) {
    std::ostringstream os;
    os << "transform ODE left its existence window at t = " << t
       << (superlinear ? " (finite-time explosion)" : " (unbounded growth)");
    return os.str();
}

}  // namespace

FiniteExplosion::FiniteExplosion(double t, bool superlinear)
    : std::runtime_error(explosion_message(t, superlinear)),
      t_(t),
      superlinear_(superlinear) {}

RiccatiStepper::RiccatiStepper(const AffineModelD& model,
                               const PricingKernelSpecD& pk, double t0,
                               double phi0, VecD psi0,
                               const IntegrateOptions& opts, double max_step)
    : model_(&model),
      pk_(&pk),
      abs_tol_(opts.abs_tol),
      rel_tol_(opts.rel_tol),
      max_step_(max_step),
      t_(t0),
      phi_(phi0),
      psi_(std::move(psi0)) {
    check_dimensions(model, pk);
    detail::require_length(psi_, model.dim(), "psi0");
    if (abs_tol_ <= 0.0 || rel_tol_ <= 0.0)
        throw std::invalid_argument("tolerances must be positive");
    if (max_step_ <= 0.0) throw std::invalid_argument("max_step must be positive");
    y_.resize(1 + psi_.size());
    y_(0) = phi_;
    y_.tail(psi_.size()) = psi_;
    f_ = rhs(y_);
    envelope_scale_ = model.B.cwiseAbs().colwise().sum().maxCoeff();
    h_ = 1e-2 * (1.0 + y_.cwiseAbs().maxCoeff()) / (1.0 + f_.cwiseAbs().maxCoeff());
    h_ = std::clamp(h_, 1e-8, max_step_);
}

VecD RiccatiStepper::rhs(const VecD& y) const {
    const Eigen::Index d = y.size() - 1;
    RiccatiRhs<double> r = riccati_rhs<double>(*model_, *pk_, y.tail(d));
    VecD f(y.size());
    f(0) = r.phi_dot;
    f.tail(d) = r.psi_dot;
    return f;
}

bool RiccatiStepper::superlinear_now() const {
    const double growth = f_.tail(psi_.size()).cwiseAbs().maxCoeff();
    const double envelope = envelope_scale_ * psi_.cwiseAbs().maxCoeff() +
                            pk_->delta.cwiseAbs().maxCoeff() + 1.0;
    return growth > 10.0 * envelope;
}

void RiccatiStepper::advance(double t_limit) {
    if (!(t_limit > t_))
        throw std::invalid_argument("t_limit must exceed the current time");
    const Eigen::Index d = psi_.size();
    VecD k2, k3, k4, k5, k6, k7, ynew, yerr;

    for (;;) {
        const double h = std::min(h_, t_limit - t_);
        const bool clipped = h >= t_limit - t_;
        const VecD& k1 = f_;

        k2 = rhs(y_ + h * (a21 * k1));
        k3 = rhs(y_ + h * (a31 * k1 + a32 * k2));
        k4 = rhs(y_ + h * (a41 * k1 + a42 * k2 + a43 * k3));
        k5 = rhs(y_ + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        k6 = rhs(y_ + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        ynew = y_ + h * (a71 * k1 + a73 * k3 + a74 * k4 + a75 * k5 + a76 * k6);
        k7 = rhs(ynew);
        yerr = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);

        double err = 0.0;
        for (Eigen::Index i = 0; i < y_.size(); ++i) {
            const double sk =
                abs_tol_ + rel_tol_ * std::max(std::abs(y_(i)), std::abs(ynew(i)));
            err += (yerr(i) / sk) * (yerr(i) / sk);
        }
        err = std::sqrt(err / static_cast<double>(y_.size()));
        if (!std::isfinite(err)) err = 1e10;

        if (err <= 1.0) {
            t_ = clipped ? t_limit : t_ + h;
            y_ = ynew;
            f_ = k7;
            phi_ = y_(0);
            psi_ = y_.tail(d);
            if (psi_.cwiseAbs().maxCoeff() > blowup_norm)
                throw FiniteExplosion(t_, superlinear_now());
            double fac = err == 0.0 ? grow_max
                                    : std::clamp(safety * std::pow(err, -0.2),
                                                 shrink_min, grow_max);
            h_ = std::min(max_step_, h * fac);
            return;
        }

        h_ = h * std::clamp(safety * std::pow(err, -0.2), shrink_min, 1.0);
        if (h_ < 1e-14 * std::max(1.0, std::abs(t_)))
            throw FiniteExplosion(t_, superlinear_now());
    }
}

RiccatiSolution integrate(const AffineModelD& model, const PricingKernelSpecD& pk,
                          double horizon, const IntegrateOptions& opts) {
    if (!(horizon > 0.0)) throw std::invalid_argument("horizon must be positive");
    check_dimensions(model, pk);
    const double h_max =
        opts.max_step > 0.0 ? opts.max_step : std::max(1.0, horizon / 100.0);
    RiccatiStepper stepper(model, pk, 0.0, 0.0, pk.u, opts, h_max);

    std::vector<double> grid{0.0};
    std::vector<double> phis{0.0};
    std::vector<double> dphis{stepper.phi_dot()};
    std::vector<VecD> psis{pk.u};
    std::vector<VecD> dpsis{stepper.psi_dot()};
    while (stepper.t() < horizon) {
        stepper.advance(horizon);
        grid.push_back(stepper.t());
        phis.push_back(stepper.phi());
        dphis.push_back(stepper.phi_dot());
        psis.push_back(stepper.psi());
        dpsis.push_back(stepper.psi_dot());
    }

    RiccatiSolution sol;
    const Eigen::Index d = model.dim();
    const Eigen::Index N = static_cast<Eigen::Index>(grid.size());
    sol.grid = std::move(grid);
    sol.phi.resize(N);
    sol.phi_dot.resize(N);
    sol.psi.resize(d, N);
    sol.psi_dot.resize(d, N);
    for (Eigen::Index k = 0; k < N; ++k) {
        sol.phi(k) = phis[k];
        sol.phi_dot(k) = dphis[k];
        sol.psi.col(k) = psis[k];
        sol.psi_dot.col(k) = dpsis[k];
    }
    return sol;
}

std::size_t RiccatiSolution::locate(double t) const {
    if (grid.size() < 2 || !(t >= grid.front()) || !(t <= grid.back())) {
        std::ostringstream os;
        os << "t = " << t << " outside the solution span [0, "
           << (grid.empty() ? 0.0 : grid.back()) << "]";
        throw std::out_of_range(os.str());
    }
    auto it = std::upper_bound(grid.begin(), grid.end(), t);
    std::size_t k = it == grid.begin() ? 0 : static_cast<std::size_t>(it - grid.begin()) - 1;
    return std::min(k, grid.size() - 2);
}

namespace {

// Cubic Hermite basis on [0, 1].
struct HermiteWeights {
    double w0, wd0, w1, wd1;
    HermiteWeights(double theta, double h) {
        const double t2 = theta * theta;
        const double t3 = t2 * theta;
        w0 = 2.0 * t3 - 3.0 * t2 + 1.0;
        wd0 = h * (t3 - 2.0 * t2 + theta);
        w1 = -2.0 * t3 + 3.0 * t2;
        wd1 = h * (t3 - t2);
    }
};

}  // namespace

double RiccatiSolution::phi_at(double t) const {
    const std::size_t k = locate(t);
    const double h = grid[k + 1] - grid[k];
    const HermiteWeights w((t - grid[k]) / h, h);
    return w.w0 * phi(k) + w.wd0 * phi_dot(k) + w.w1 * phi(k + 1) +
           w.wd1 * phi_dot(k + 1);
}

VecD RiccatiSolution::psi_at(double t) const {
    const std::size_t k = locate(t);
    const double h = grid[k + 1] - grid[k];
    const HermiteWeights w((t - grid[k]) / h, h);
    return w.w0 * psi.col(k) + w.wd0 * psi_dot.col(k) + w.w1 * psi.col(k + 1) +
           w.wd1 * psi_dot.col(k + 1);
}

double bond_price(const RiccatiSolution& sol, const PricingKernelSpecD& pk, double t,
                  const VecD& x) {
    detail::require_length(x, pk.u.size(), "x");
    const double exponent = -sol.phi_at(t) - (sol.psi_at(t) - pk.u).dot(x);
    return std::exp(exponent);
}

std::vector<YieldPoint> yield_curve(const RiccatiSolution& sol,
                                    const PricingKernelSpecD& pk, const VecD& x,
                                    const std::vector<double>& maturities) {
    std::vector<YieldPoint> curve;
    curve.reserve(maturities.size());
    for (double T : maturities) {
        if (!(T > 0.0))
            throw std::invalid_argument("maturities must be positive");
        const double price = bond_price(sol, pk, T, x);
        curve.push_back({T, price, -std::log(price) / T});
    }
    return curve;
}

}  // namespace affine
