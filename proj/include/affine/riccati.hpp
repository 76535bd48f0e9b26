#pragma once

#include "affine/model.hpp"

#include <cstddef>
#include <vector>

namespace affine {

template <typename Scalar>
struct RiccatiRhs {
    Scalar phi_dot;
    Vec<Scalar> psi_dot;
};

// Transform ODE system for exp(-gamma t - u.(X_t - X_0) - int delta.X ds):
//   phi'   = -1/2 psi_J^T a_JJ psi_J + b^T psi + gamma
//   psi_i' = -1/2 psi^T alpha_i psi + beta_i^T psi + delta_i   (i < m, beta_i = B column i)
//   psi_J' = B_JJ^T psi_J + delta_J
template <typename Scalar>
RiccatiRhs<Scalar> riccati_rhs(const AffineModel<Scalar>& model,
                               const PricingKernelSpec<Scalar>& pk,
                               const Vec<Scalar>& psi) {
    const Eigen::Index m = model.m;
    const Eigen::Index n = model.n;
    detail::require_length(psi, model.dim(), "psi");
    const auto psi_J = psi.tail(n);

    RiccatiRhs<Scalar> out;
    out.phi_dot = Scalar(-0.5) * psi_J.dot(model.a.bottomRightCorner(n, n) * psi_J) +
                  model.b.dot(psi) + pk.gamma;
    out.psi_dot.resize(model.dim());
    for (Eigen::Index i = 0; i < m; ++i)
        out.psi_dot(i) = Scalar(-0.5) * psi.dot(model.alpha[i] * psi) +
                         model.B.col(i).dot(psi) + pk.delta(i);
    out.psi_dot.tail(n) =
        model.B.bottomRightCorner(n, n).transpose() * psi_J + pk.delta.tail(n);
    return out;
}

struct IntegrateOptions {
    double abs_tol = 1e-12;
    double rel_tol = 1e-12;
    double max_step = 0.0;  // <= 0 picks max(1, horizon / 100)
};

// The transform left its existence window: ||psi||_inf crossed 1e8 or the step
// size underflowed.  `superlinear` records whether the derivative exceeded the
// linear-growth envelope at detection, i.e. a genuine finite-time explosion as
// opposed to unbounded exponential growth.
class FiniteExplosion : public std::runtime_error {
public:
    FiniteExplosion(double t, bool superlinear);
    double t() const { return t_; }
    bool superlinear() const { return superlinear_; }

private:
    double t_;
    bool superlinear_;
};

// Accepted-node solution of the transform ODE with cubic-Hermite dense output.
// Nodes store the RHS derivatives, so interpolation needs no re-evaluation.
struct RiccatiSolution {
    std::vector<double> grid;  // strictly increasing, grid[0] = 0
    VecD phi;                  // phi(grid[k]); phi(0) = 0 exactly
    MatD psi;                  // column k = psi(grid[k]); psi(0) = u exactly
    VecD phi_dot;
    MatD psi_dot;

    double horizon() const { return grid.back(); }
    double phi_at(double t) const;
    VecD psi_at(double t) const;

private:
    std::size_t locate(double t) const;
};

// Adaptive embedded Runge-Kutta 5(4) over [0, horizon].  Local error per step
// is held within the given tolerances (Hairer-style scaled RMS norm).
RiccatiSolution integrate(const AffineModelD& model, const PricingKernelSpecD& pk,
                          double horizon, const IntegrateOptions& opts = {});

// P(t, x) = exp(-phi(t) - (psi(t) - u)^T x); throws std::out_of_range for t
// outside the solution span.
double bond_price(const RiccatiSolution& sol, const PricingKernelSpecD& pk, double t,
                  const VecD& x);

struct YieldPoint {
    double maturity;
    double price;
    double yield;  // -ln(price) / maturity
};

std::vector<YieldPoint> yield_curve(const RiccatiSolution& sol,
                                    const PricingKernelSpecD& pk, const VecD& x,
                                    const std::vector<double>& maturities);

// One accepted step at a time; lets callers watch psi' settle without
// committing to a horizon up front.  Same stepping core as integrate().
class RiccatiStepper {
public:
    RiccatiStepper(const AffineModelD& model, const PricingKernelSpecD& pk,
                   double t0, double phi0, VecD psi0, const IntegrateOptions& opts,
                   double max_step);

    // Advances to the next accepted node, never past t_limit.
    // Throws FiniteExplosion when the blow-up guard triggers.
    void advance(double t_limit);

    double t() const { return t_; }
    double phi() const { return phi_; }
    const VecD& psi() const { return psi_; }
    double phi_dot() const { return f_(0); }
    VecD psi_dot() const { return f_.tail(psi_.size()); }

private:
    VecD rhs(const VecD& y) const;
    bool superlinear_now() const;

    const AffineModelD* model_;
    const PricingKernelSpecD* pk_;
    double abs_tol_, rel_tol_, max_step_;
    double t_, phi_, h_;
    VecD psi_;
    VecD y_;  // packed (phi, psi)
    VecD f_;  // RHS at the current node (FSAL)
    double envelope_scale_;
};

}  // namespace affine
