#pragma once

#include "affine/errors.hpp"
#include "affine/model.hpp"
#include "affine/riccati.hpp"

#include <optional>
#include <string>

namespace affine {

enum class DivergenceReason { blow_up, no_settling };

// The transform has no usable fixed point: the long bond and the long forward
// measure do not exist for this (model, kernel) pair.
class DivergentError : public std::runtime_error {
public:
    DivergentError(DivergenceReason reason, const std::string& note)
        : std::runtime_error(note), reason_(reason) {}
    DivergenceReason reason() const { return reason_; }

private:
    DivergenceReason reason_;
};

// Short rate r(x) = g + h^T x, risk-neutral dynamics, and kernel volatility
// loading (market price of risk lambda_t = sigma(X_t)^T u).
struct RiskNeutralFactorization {
    double g = 0.0;
    VecD h;
    AffineModelD q_model;
    VecD mpr_loading;  // = u
};

// Fixed point v of the transform flow, eigenvalue lambda, eigenfunction
// pi(x) = exp((u-v)^T x), and dynamics under the long forward measure.
// The volatility loadings decompose the market price of risk:
// mpr_loading = longbond_vol_loading + mpr_inf_loading, i.e. u = (u-v) + v.
struct LongTermFactorization {
    VecD v;
    double lambda = 0.0;
    VecD eigen_coeffs;  // u - v
    AffineModelD l_model;
    VecD longbond_vol_loading;  // u - v
    VecD mpr_inf_loading;       // v
};

struct FixedPointOpts {
    double horizon_max = 5000.0;
    double settle_tol = 1e-9;
    double window = 10.0;
    IntegrateOptions integrate{};
};

struct FixedPointDiagnostics {
    double horizon = 0.0;           // integration time actually used
    double terminal_psi_dot = 0.0;  // ||psi'||_inf at that horizon
    double qve_residual = 0.0;      // ||stationarity residual(v)||_inf after polish
    double ode_gap = 0.0;           // ||psi(horizon) - v||_inf
    int newton_iters = 0;
};

struct FixedPointOutcome {
    bool converged = false;
    std::optional<LongTermFactorization> ltf;    // set iff converged
    DivergenceReason reason = DivergenceReason::no_settling;  // valid iff divergent
    std::string note;                            // one-line trace summary
    FixedPointDiagnostics diagnostics;
};

RiskNeutralFactorization risk_neutral_factorize(const AffineModelD& model,
                                                const PricingKernelSpecD& pk);

// Stationarity residual of the transform flow at v (the quadratic vector
// equation): component i < m is -1/2 v^T alpha_i v + beta_i^T v + delta_i,
// the Gaussian block is B_JJ^T v_J + delta_J.  Zero exactly at a fixed point.
VecD qve_residual(const AffineModelD& model, const PricingKernelSpecD& pk,
                  const VecD& v);

// Stage 1: integrate until ||psi'||_inf stays below settle_tol over a trailing
// window, blow-up, or horizon_max.  Stage 2: Newton polish of the quadratic
// vector equation from psi(horizon) to residual < 1e-12 (Gaussian block solved
// exactly; coordinates with frozen dynamics pinned to their initial values).
// Stage 3: require ||psi(horizon) - v||_inf < 1e-6 so the returned root is the
// flow limit, never an arbitrary root of the quadratic system.
// Throws NumericError on Newton stall or a Stage-3 mismatch; divergence is a
// returned outcome, not an exception.
FixedPointOutcome find_fixed_point(const AffineModelD& model,
                                   const PricingKernelSpecD& pk,
                                   const FixedPointOpts& opts = {});

// find_fixed_point, demanding convergence.  Throws DivergentError otherwise.
LongTermFactorization long_term_factorize(const AffineModelD& model,
                                          const PricingKernelSpecD& pk,
                                          const FixedPointOpts& opts = {});

// |P_t pi(x) e^{lambda t} / pi(x) - 1| with P_t pi evaluated in closed form by
// rerunning the transform flow started at v.  Near zero when (v, lambda) is a
// genuine eigenpair.
double eigen_check(const AffineModelD& model, const PricingKernelSpecD& pk,
                   const LongTermFactorization& ltf, double t, const VecD& x);

struct StateVolatilities {
    VecD mpr;        // sigma(x)^T u
    VecD sigma_inf;  // sigma(x)^T (u - v), long bond volatility
    VecD mpr_inf;    // sigma(x)^T v, price of risk under the long forward measure
};

StateVolatilities state_volatilities(const AffineModelD& model,
                                     const LongTermFactorization& ltf,
                                     const VecD& x);

}  // namespace affine
