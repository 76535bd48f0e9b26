#include "affine/factorization.hpp"

#include <Eigen/LU>
#include <Eigen/QR>

#include <cmath>
#include <limits>
#include <sstream>

namespace affine {
namespace {

constexpr double newton_tol = 1e-12;
constexpr int newton_max_iters = 50;
constexpr double ode_gap_tol = 1e-6;

std::string format_scalar(double x) {
    std::ostringstream os;
    os << x;
    return os.str();
}

// Assembles the factorization once v has been identified.
LongTermFactorization assemble(const AffineModelD& model,
                               const PricingKernelSpecD& pk, const VecD& v) {
    LongTermFactorization ltf;
    ltf.v = v;
    ltf.lambda = riccati_rhs<double>(model, pk, v).phi_dot;
    ltf.eigen_coeffs = pk.u - v;
    ltf.l_model = tilt<double>(model, v);
    ltf.longbond_vol_loading = ltf.eigen_coeffs;
    ltf.mpr_inf_loading = v;
    return ltf;
}

// Solves the Gaussian block B_JJ^T v_J = -delta_J around the settled values in
// `start`.  Coordinates with frozen dynamics (zero B_JJ column and zero delta)
// keep their initial kernel value exactly; the rest get the minimum-norm
// correction, which stays on the flow-limit branch verified in Stage 3.
VecD solve_gaussian_block(const AffineModelD& model, const PricingKernelSpecD& pk,
                          const VecD& start) {
    const Eigen::Index m = model.m;
    const Eigen::Index n = model.n;
    VecD v_J = start.tail(n);
    if (n == 0) return v_J;

    const MatD B_JJ = model.B.bottomRightCorner(n, n);
    std::vector<Eigen::Index> active;
    for (Eigen::Index j = 0; j < n; ++j) {
        const bool frozen = B_JJ.col(j).cwiseAbs().maxCoeff() == 0.0 &&
                            pk.delta(m + j) == 0.0;
        if (frozen)
            v_J(j) = pk.u(m + j);
        else
            active.push_back(j);
    }
    if (active.empty()) return v_J;

    const Eigen::Index k = static_cast<Eigen::Index>(active.size());
    MatD A(k, k);
    VecD rhs(k);
    for (Eigen::Index r = 0; r < k; ++r) {
        rhs(r) = -pk.delta(m + active[r]);
        for (Eigen::Index j = 0; j < n; ++j) {
            const double coeff = B_JJ(j, active[r]);
            bool is_active = false;
            for (Eigen::Index c = 0; c < k; ++c)
                if (active[c] == j) {
                    A(r, c) = coeff;
                    is_active = true;
                    break;
                }
            if (!is_active) rhs(r) -= coeff * v_J(j);
        }
    }
    VecD y = v_J(active[0]) * VecD::Ones(k);
    for (Eigen::Index c = 0; c < k; ++c) y(c) = v_J(active[c]);
    // Minimum-norm correction relative to the settled values.
    VecD correction = A.completeOrthogonalDecomposition().solve((rhs - A * y).eval());
    y += correction;
    for (Eigen::Index c = 0; c < k; ++c) v_J(active[c]) = y(c);
    return v_J;
}

}  // namespace

RiskNeutralFactorization risk_neutral_factorize(const AffineModelD& model,
                                                const PricingKernelSpecD& pk) {
    check_dimensions(model, pk);
    RiccatiRhs<double> at_u = riccati_rhs<double>(model, pk, pk.u);
    RiskNeutralFactorization rnf;
    rnf.g = at_u.phi_dot;  // gamma - 1/2 u_J^T a_JJ u_J + b^T u
    rnf.h = at_u.psi_dot;  // h_i = delta_i - 1/2 u^T alpha_i u + beta_i^T u; h_J = delta_J + B_JJ^T u_J
    rnf.q_model = tilt<double>(model, pk.u);
    rnf.mpr_loading = pk.u;
    return rnf;
}

VecD qve_residual(const AffineModelD& model, const PricingKernelSpecD& pk,
                  const VecD& v) {
    return riccati_rhs<double>(model, pk, v).psi_dot;
}

FixedPointOutcome find_fixed_point(const AffineModelD& model,
                                   const PricingKernelSpecD& pk,
                                   const FixedPointOpts& opts) {
    check_dimensions(model, pk);
    if (!(opts.horizon_max > 0.0) || !(opts.settle_tol > 0.0) || !(opts.window > 0.0))
        throw std::invalid_argument("fixed-point options must be positive");

    FixedPointOutcome out;

    // Stage 1: run the flow until psi' stays small over a trailing window.
    // The step cap window/2 guarantees at least two nodes per window.
    RiccatiStepper stepper(model, pk, 0.0, 0.0, pk.u, opts.integrate,
                           opts.window / 2.0);
    double quiet_since = stepper.psi_dot().cwiseAbs().maxCoeff() < opts.settle_tol
                             ? 0.0
                             : std::numeric_limits<double>::quiet_NaN();
    bool settled = false;
    try {
        while (stepper.t() < opts.horizon_max) {
            stepper.advance(opts.horizon_max);
            const double slope = stepper.psi_dot().cwiseAbs().maxCoeff();
            if (slope < opts.settle_tol) {
                if (std::isnan(quiet_since)) quiet_since = stepper.t();
                if (stepper.t() - quiet_since >= opts.window) {
                    settled = true;
                    break;
                }
            } else {
                quiet_since = std::numeric_limits<double>::quiet_NaN();
            }
        }
    } catch (const FiniteExplosion& e) {
        out.converged = false;
        out.reason = e.superlinear() ? DivergenceReason::blow_up
                                     : DivergenceReason::no_settling;
        out.note = e.what();
        out.diagnostics.horizon = e.t();
        return out;
    }

    out.diagnostics.horizon = stepper.t();
    out.diagnostics.terminal_psi_dot = stepper.psi_dot().cwiseAbs().maxCoeff();
    if (!settled) {
        out.converged = false;
        out.reason = DivergenceReason::no_settling;
        out.note = "no settling by t = " + format_scalar(stepper.t()) +
                   ": ||psi'||_inf = " +
                   format_scalar(out.diagnostics.terminal_psi_dot);
        return out;
    }

    // Stage 2: polish.  The Gaussian block is linear and solved exactly; the
    // square-root block gets Newton with the analytic Jacobian rows
    // (-alpha_i v + beta_i)^T.
    const Eigen::Index m = model.m;
    const Eigen::Index d = model.dim();
    VecD v(d);
    v.head(m) = stepper.psi().head(m);
    v.tail(model.n) = solve_gaussian_block(model, pk, stepper.psi());

    int iters = 0;
    if (m > 0) {
        for (; iters < newton_max_iters; ++iters) {
            const VecD resid_I = qve_residual(model, pk, v).head(m);
            if (resid_I.cwiseAbs().maxCoeff() < newton_tol) break;
            MatD jac(m, m);
            for (Eigen::Index i = 0; i < m; ++i) {
                const VecD row = -0.5 * (model.alpha[i] + model.alpha[i].transpose()) * v +
                                 model.B.col(i);
                jac.row(i) = row.head(m).transpose();
            }
            Eigen::FullPivLU<MatD> lu(jac);
            if (!lu.isInvertible())
                throw NumericError("Newton polish: singular Jacobian at v");
            v.head(m) += lu.solve((-resid_I).eval());
        }
        if (iters == newton_max_iters &&
            qve_residual(model, pk, v).head(m).cwiseAbs().maxCoeff() >= newton_tol)
            throw NumericError(
                "Newton polish did not reach residual 1e-12 in 50 iterations");
    }
    out.diagnostics.newton_iters = iters;
    out.diagnostics.qve_residual = qve_residual(model, pk, v).cwiseAbs().maxCoeff();
    if (out.diagnostics.qve_residual >= newton_tol)
        throw NumericError("fixed-point residual " +
                           format_scalar(out.diagnostics.qve_residual) +
                           " exceeds 1e-12 after polish");

    // Stage 3: the polished root must be the flow limit.
    out.diagnostics.ode_gap = (stepper.psi() - v).cwiseAbs().maxCoeff();
    if (out.diagnostics.ode_gap >= ode_gap_tol)
        throw NumericError("polished root is " +
                           format_scalar(out.diagnostics.ode_gap) +
                           " away from the flow limit (limit 1e-6)");

    out.converged = true;
    out.ltf = assemble(model, pk, v);
    out.note = "settled at t = " + format_scalar(out.diagnostics.horizon) +
               ", ||psi'||_inf = " +
               format_scalar(out.diagnostics.terminal_psi_dot);
    return out;
}

LongTermFactorization long_term_factorize(const AffineModelD& model,
                                          const PricingKernelSpecD& pk,
                                          const FixedPointOpts& opts) {
    FixedPointOutcome outcome = find_fixed_point(model, pk, opts);
    if (!outcome.converged) throw DivergentError(outcome.reason, outcome.note);
    return *outcome.ltf;
}

double eigen_check(const AffineModelD& model, const PricingKernelSpecD& pk,
                   const LongTermFactorization& ltf, double t, const VecD& x) {
    if (!(t > 0.0)) throw std::invalid_argument("t must be positive");
    detail::require_length(x, model.dim(), "x");
    PricingKernelSpecD shifted = pk;
    shifted.u = ltf.v;  // flow started at v prices the eigenfunction payoff
    RiccatiSolution sol = integrate(model, shifted, t);
    const double exponent =
        -sol.phi_at(t) + ltf.lambda * t - (sol.psi_at(t) - ltf.v).dot(x);
    return std::abs(std::expm1(exponent));
}

StateVolatilities state_volatilities(const AffineModelD& model,
                                     const LongTermFactorization& ltf,
                                     const VecD& x) {
    if (!model.vol_structure)
        throw std::invalid_argument(
            "state_volatilities needs a model with a vol_structure");
    const MatD sigma = diffusion<double>(model, x).sigma;
    StateVolatilities sv;
    sv.sigma_inf = sigma.transpose() * ltf.longbond_vol_loading;
    sv.mpr_inf = sigma.transpose() * ltf.mpr_inf_loading;
    sv.mpr = sigma.transpose() * (ltf.longbond_vol_loading + ltf.mpr_inf_loading);
    return sv;
}

}  // namespace affine
